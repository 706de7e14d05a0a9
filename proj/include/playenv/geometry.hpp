#pragma once

#include <limits>
#include <optional>

#include <Eigen/Core>

namespace playenv {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// World frame is right-handed with y up; the ground is the plane y = 0.
// Cameras look along their local +z with image x to the right and image y down.
// Pixel coordinates are continuous and 0-based: pixel (i, j) has its center at (i + 0.5, j + 0.5).

/// Pinhole camera. `rotation` maps camera coordinates to world coordinates,
/// `translation` is the camera center in world units.
struct CameraModel {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  /// Throws DomainError when an invariant is broken.
  void validate() const;

  Vec3 center() const { return translation; }
  Mat3 intrinsics() const;
};

/// Camera placed at `eye` looking at `target`; `up` fixes the roll.
CameraModel look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx, double fy,
                    int width, int height);

/// Rotation about the world y axis by `radians` (right-handed: +z turns toward +x).
Mat3 yaw_rotation(double radians);

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  double t_near = 0.0;
  double t_far = std::numeric_limits<double>::infinity();

  Vec3 point_at(double t) const { return origin + t * direction; }
};

/// Distance range assigned to camera rays.
struct RayRange {
  double t_near = 0.0;
  double t_far = std::numeric_limits<double>::infinity();
};

/// Axis-aligned box; may be flat along one axis.
struct BoundingVolume {
  Vec3 min_corner = Vec3::Zero();
  Vec3 max_corner = Vec3::Zero();

  bool valid() const { return (min_corner.array() <= max_corner.array()).all(); }
  bool contains(const Vec3& p) const {
    return (p.array() >= min_corner.array()).all() && (p.array() <= max_corner.array()).all();
  }
  BoundingVolume translated(const Vec3& offset) const {
    return {min_corner + offset, max_corner + offset};
  }
};

struct Interval {
  double t_in = 0.0;
  double t_out = 0.0;

  double length() const { return t_out - t_in; }
};

struct BoundingBox2D {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  Vec2 center() const { return {0.5 * (x_min + x_max), 0.5 * (y_min + y_max)}; }
};

struct Detection {
  int object_id = 0;
  BoundingBox2D bbox;
  bool valid = false;
};

/// Ray through a continuous pixel position. Throws DomainError outside [0,w)x[0,h).
Ray pixel_ray(const CameraModel& camera, const Vec2& pixel, const RayRange& range = {});

/// Unit world-space direction through a pixel position, without bounds checks.
Vec3 pixel_direction(const CameraModel& camera, const Vec2& pixel);

/// Pixel position of a world point. Empty when the point is not in front of the camera.
std::optional<Vec2> project(const CameraModel& camera, const Vec3& world);

/// Ray/box overlap clipped to [t_near, t_far]. A grazing hit returns t_in == t_out.
std::optional<Interval> intersect_aabb(const Ray& ray, const BoundingVolume& box);

/// Lower-mid point of the detection box cast onto y = 0.
/// Throws NoIntersectionError when the ray does not reach the ground in front of the camera.
Vec3 project_to_ground(const Detection& det, const CameraModel& camera);

/// Camera-frame displacement to world frame: M * delta.
Vec3 camera_relative_to_world(const Vec3& delta_cam, const CameraModel& camera);

/// Image-space box of a world-space volume, clipped to the image. Invalid when off-screen
/// or when any corner is behind the camera.
Detection detect_volume(int object_id, const BoundingVolume& world_box, const CameraModel& camera);

}  // namespace playenv
