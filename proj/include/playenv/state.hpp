#pragma once

#include "playenv/fields.hpp"
#include "playenv/geometry.hpp"

namespace playenv {

/// Per-object environment state at one timestep: position, style code, pose code.
struct EnvironmentState {
  Vec3 x = Vec3::Zero();
  StyleCode w = StyleCode::Zero(kDefaultStyleDim);
  PoseCode pi = PoseCode::Zero(kDefaultPoseDim);
  bool valid = true;

  /// Concatenated (x, w, pi).
  Eigen::VectorXd flatten() const;

  bool operator==(const EnvironmentState& other) const {
    return valid == other.valid && x == other.x && w == other.w && pi == other.pi;
  }
};

}  // namespace playenv
