#pragma once

#include <optional>
#include <span>
#include <vector>

#include "playenv/calibration.hpp"
#include "playenv/geometry.hpp"
#include "playenv/image.hpp"

namespace playenv {

/// Variance-normalized error of predicting each displacement by its action's mean displacement.
/// Reported as a raw ratio (1.0 means the labels carry no information).
double delta_mse(std::span<const Vec3> deltas, std::span<const int> actions);

/// Percentage of displacements whose nearest per-action mean is their own action's mean.
double delta_acc(std::span<const Vec3> deltas, std::span<const int> actions);

using DetectionFrame = std::vector<Detection>;

/// Mean pixel distance between box centers of same-id valid detections in the same frame.
/// Empty when nothing matches.
std::optional<double> add_metric(std::span<const DetectionFrame> gt,
                                 std::span<const DetectionFrame> rec);

/// Percentage of valid ground-truth detections with no same-id valid detection in the frame.
double mdr(std::span<const DetectionFrame> gt, std::span<const DetectionFrame> rec);

struct WarpResult {
  double l1 = 0.0;
  double coverage = 0.0;
};

/// Compares `original` with `rendered` sampled (bilinearly) at H * p for every original pixel
/// center p. Pixels mapping outside `rendered`, or outside `mask` when given, are not covered.
/// Throws DomainError when nothing is covered.
WarpResult warp_eval(const Image& original, const Image& rendered, const Homography& h,
                     const std::vector<bool>* mask = nullptr);

struct MetricsReport {
  std::optional<double> delta_mse;
  std::optional<double> delta_acc;
  std::optional<double> add;
  std::optional<double> mdr;
  std::optional<double> warp_l1;
  std::optional<double> coverage;
};

}  // namespace playenv
