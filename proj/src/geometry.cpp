#include "playenv/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Geometry>

#include "playenv/errors.hpp"

namespace playenv {

ValidationError::ValidationError(std::vector<std::string> violations)
    : std::runtime_error([&] {
        std::string msg = "validation failed:";
        for (const auto& v : violations) msg += "\n  - " + v;
        return msg;
      }()),
      violations_(std::move(violations)) {}

ParseError::ParseError(const std::string& what, std::size_t line)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
      line_(line) {}

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw DomainError("camera focal lengths must be positive");
  if (width < 1 || height < 1) throw DomainError("camera image size must be at least 1x1");
  if (!rotation.allFinite() || !translation.allFinite())
    throw DomainError("camera pose must be finite");
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-9 || std::abs(rotation.determinant() - 1.0) > 1e-9)
    throw DomainError("camera rotation must be orthonormal with determinant +1");
}

Mat3 CameraModel::intrinsics() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

CameraModel look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx, double fy,
                    int width, int height) {
  const Vec3 z = (target - eye).normalized();
  const Vec3 x = z.cross(up).normalized();
  const Vec3 y = z.cross(x);
  CameraModel cam;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.width = width;
  cam.height = height;
  cam.rotation.col(0) = x;
  cam.rotation.col(1) = y;
  cam.rotation.col(2) = z;
  cam.translation = eye;
  return cam;
}

Mat3 yaw_rotation(double radians) {
  return Eigen::AngleAxisd(radians, Vec3::UnitY()).toRotationMatrix();
}

Vec3 pixel_direction(const CameraModel& camera, const Vec2& pixel) {
  const Vec3 local((pixel.x() - camera.cx) / camera.fx, (pixel.y() - camera.cy) / camera.fy, 1.0);
  return (camera.rotation * local).normalized();
}

Ray pixel_ray(const CameraModel& camera, const Vec2& pixel, const RayRange& range) {
  if (!(pixel.x() >= 0.0 && pixel.x() < camera.width && pixel.y() >= 0.0 &&
        pixel.y() < camera.height)) {
    throw DomainError("pixel outside the image");
  }
  return Ray{camera.translation, pixel_direction(camera, pixel), range.t_near, range.t_far};
}

std::optional<Vec2> project(const CameraModel& camera, const Vec3& world) {
  const Vec3 local = camera.rotation.transpose() * (world - camera.translation);
  if (!(local.z() > 0.0)) return std::nullopt;
  return Vec2(camera.fx * local.x() / local.z() + camera.cx,
              camera.fy * local.y() / local.z() + camera.cy);
}

std::optional<Interval> intersect_aabb(const Ray& ray, const BoundingVolume& box) {
  double t_in = ray.t_near;
  double t_out = ray.t_far;
  for (int axis = 0; axis < 3; ++axis) {
    const double o = ray.origin[axis];
    const double d = ray.direction[axis];
    const double lo = box.min_corner[axis];
    const double hi = box.max_corner[axis];
    if (d == 0.0) {
      if (o < lo || o > hi) return std::nullopt;
      continue;
    }
    double t0 = (lo - o) / d;
    double t1 = (hi - o) / d;
    if (t0 > t1) std::swap(t0, t1);
    t_in = std::max(t_in, t0);
    t_out = std::min(t_out, t1);
    if (t_in > t_out) return std::nullopt;
  }
  return Interval{t_in, t_out};
}

Vec3 project_to_ground(const Detection& det, const CameraModel& camera) {
  if (!det.valid) throw DomainError("cannot project an invalid detection");
  const Vec2 foot(0.5 * (det.bbox.x_min + det.bbox.x_max), det.bbox.y_max);
  const Vec3 dir = pixel_direction(camera, foot);
  const Vec3& origin = camera.translation;
  if (dir.y() == 0.0) throw NoIntersectionError("ray is parallel to the ground plane");
  const double t = -origin.y() / dir.y();
  if (!(t > 0.0) || !std::isfinite(t))
    throw NoIntersectionError("ray does not reach the ground in front of the camera");
  Vec3 ground = origin + t * dir;
  ground.y() = 0.0;
  return ground;
}

Vec3 camera_relative_to_world(const Vec3& delta_cam, const CameraModel& camera) {
  return camera.rotation * delta_cam;
}

Detection detect_volume(int object_id, const BoundingVolume& world_box, const CameraModel& camera) {
  Detection det;
  det.object_id = object_id;
  double x_min = std::numeric_limits<double>::infinity();
  double y_min = x_min;
  double x_max = -x_min;
  double y_max = -x_min;
  for (int corner = 0; corner < 8; ++corner) {
    const Vec3 p((corner & 1) ? world_box.max_corner.x() : world_box.min_corner.x(),
                 (corner & 2) ? world_box.max_corner.y() : world_box.min_corner.y(),
                 (corner & 4) ? world_box.max_corner.z() : world_box.min_corner.z());
    const auto pix = project(camera, p);
    if (!pix) return det;
    x_min = std::min(x_min, pix->x());
    x_max = std::max(x_max, pix->x());
    y_min = std::min(y_min, pix->y());
    y_max = std::max(y_max, pix->y());
  }
  det.bbox.x_min = std::clamp(x_min, 0.0, static_cast<double>(camera.width));
  det.bbox.x_max = std::clamp(x_max, 0.0, static_cast<double>(camera.width));
  det.bbox.y_min = std::clamp(y_min, 0.0, static_cast<double>(camera.height));
  det.bbox.y_max = std::clamp(y_max, 0.0, static_cast<double>(camera.height));
  det.valid = det.bbox.x_max > det.bbox.x_min && det.bbox.y_max > det.bbox.y_min;
  return det;
}

}  // namespace playenv
