#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "playenv/geometry.hpp"

namespace playenv {

/// Named landmarks on the ground plane; a point (a, b) is the world position (a, 0, b).
struct FieldModel {
  std::string name;
  std::map<std::string, Vec2> points;
};

/// Standard tennis court line intersections in meters, origin at the court center,
/// first coordinate across the court, second along it.
FieldModel tennis_court();

/// Plane-to-image homography, canonicalized to unit Frobenius norm with H(2,2) >= 0.
struct Homography {
  Mat3 matrix = Mat3::Identity();

  static Homography canonical(const Mat3& m);
  Homography inverse() const { return canonical(matrix.inverse()); }
};

struct PointPair {
  Vec2 plane;
  Vec2 pixel;
};

/// Normalized DLT. Throws DomainError with fewer than 4 pairs or a degenerate configuration.
Homography estimate_homography(std::span<const PointPair> pairs);

/// Throws DomainError when the point maps to the line at infinity.
Vec2 apply_homography(const Homography& h, const Vec2& point);

/// Homography induced by a camera on the ground plane y = 0.
Homography ground_homography(const CameraModel& camera);

struct CameraPose {
  Mat3 rotation = Mat3::Identity();  // camera-to-world
  Vec3 center = Vec3::Zero();
};

/// Pose of the camera that induced `h` on y = 0, given its intrinsics. The sign is fixed so that
/// the camera is above the plane.
CameraPose decompose_homography(const Homography& h, const Mat3& intrinsics);

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  Mat3 matrix() const;
};

struct CalibrationResult {
  CameraModel camera;
  double rms_reprojection_error = 0.0;
  std::size_t landmarks_used = 0;
};

/// DLT homography, decomposition, then a Levenberg-Marquardt pose refinement of the
/// reprojection error with intrinsics held fixed. Landmarks without a field point are ignored.
CalibrationResult calibrate_from_field(const std::map<std::string, Vec2>& landmarks,
                                       const FieldModel& field, const Intrinsics& intrinsics);

enum class SequenceVerdict { Accept, Reject };

/// Total variance of the camera centers compared against `threshold` (world units squared).
double camera_center_variance(std::span<const CameraModel> cameras);
SequenceVerdict sequence_quality_filter(std::span<const CameraModel> cameras, double threshold);

/// Fills missing cameras: lerp of centers and intrinsics, slerp of rotations between present
/// neighbors; leading and trailing gaps copy the nearest present camera.
std::vector<CameraModel> interpolate_cameras(std::span<const std::optional<CameraModel>> seq);

}  // namespace playenv
