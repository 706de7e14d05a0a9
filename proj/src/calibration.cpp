#include "playenv/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include "playenv/errors.hpp"

namespace playenv {

FieldModel tennis_court() {
  constexpr double half_length = 11.885;
  constexpr double doubles = 5.485;
  constexpr double singles = 4.115;
  constexpr double service = 6.40;
  FieldModel f;
  f.name = "tennis_court";
  for (int side : {-1, 1}) {
    const std::string end = side < 0 ? "near" : "far";
    f.points[end + "_baseline_doubles_left"] = {-doubles, side * half_length};
    f.points[end + "_baseline_doubles_right"] = {doubles, side * half_length};
    f.points[end + "_baseline_singles_left"] = {-singles, side * half_length};
    f.points[end + "_baseline_singles_right"] = {singles, side * half_length};
    f.points[end + "_service_left"] = {-singles, side * service};
    f.points[end + "_service_right"] = {singles, side * service};
    f.points[end + "_service_center"] = {0.0, side * service};
  }
  return f;
}

Homography Homography::canonical(const Mat3& m) {
  const double norm = m.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw DomainError("homography is zero or not finite");
  Mat3 h = m / norm;
  if (h(2, 2) < 0.0) h = -h;
  return Homography{h};
}

namespace {

/// Similarity moving the centroid to the origin with mean distance sqrt(2).
Mat3 normalizing_transform(std::span<const Vec2> pts) {
  Vec2 mean = Vec2::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double dist = 0.0;
  for (const auto& p : pts) dist += (p - mean).norm();
  dist /= static_cast<double>(pts.size());
  if (!(dist > 0.0)) throw DomainError("homography points coincide");
  const double s = std::sqrt(2.0) / dist;
  Mat3 t;
  t << s, 0.0, -s * mean.x(), 0.0, s, -s * mean.y(), 0.0, 0.0, 1.0;
  return t;
}

Vec2 transform(const Mat3& t, const Vec2& p) {
  const Eigen::Vector3d q = t * p.homogeneous();
  return q.hnormalized();
}

bool any_collinear_triple(std::span<const Vec2> pts) {
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      for (std::size_t k = j + 1; k < pts.size(); ++k) {
        const Vec2 a = pts[j] - pts[i];
        const Vec2 b = pts[k] - pts[i];
        if (std::abs(a.x() * b.y() - a.y() * b.x()) < 1e-9) return true;
      }
  return false;
}

}  // namespace

Homography estimate_homography(std::span<const PointPair> pairs) {
  const std::size_t n = pairs.size();
  if (n < 4) throw DomainError("a homography needs at least 4 point pairs");
  std::vector<Vec2> src(n), dst(n);
  for (std::size_t i = 0; i < n; ++i) {
    src[i] = pairs[i].plane;
    dst[i] = pairs[i].pixel;
  }
  const Mat3 t_src = normalizing_transform(src);
  const Mat3 t_dst = normalizing_transform(dst);
  for (std::size_t i = 0; i < n; ++i) {
    src[i] = transform(t_src, src[i]);
    dst[i] = transform(t_dst, dst[i]);
  }
  if (n == 4 && (any_collinear_triple(src) || any_collinear_triple(dst)))
    throw DomainError("degenerate homography configuration: collinear points");

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * static_cast<Eigen::Index>(n), 9);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = src[i].x(), y = src[i].y();
    const double u = dst[i].x(), v = dst[i].y();
    const auto r = 2 * static_cast<Eigen::Index>(i);
    a.row(r) << -x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u;
    a.row(r + 1) << 0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // The null space must be one-dimensional: the 8th singular value stays clear of zero.
  if (sv.size() < 8 || !(sv[7] > 1e-9 * sv[0]))
    throw DomainError("degenerate homography configuration");
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
  return Homography::canonical(t_dst.inverse() * hn * t_src);
}

Vec2 apply_homography(const Homography& h, const Vec2& point) {
  const Eigen::Vector3d q = h.matrix * point.homogeneous();
  const double scale = h.matrix.row(2).cwiseAbs().sum() * (1.0 + point.cwiseAbs().maxCoeff());
  if (std::abs(q.z()) <= 1e-14 * scale) throw DomainError("point maps to the line at infinity");
  return q.hnormalized();
}

Homography ground_homography(const CameraModel& camera) {
  const Mat3 world_to_cam = camera.rotation.transpose();
  const Vec3 t = -world_to_cam * camera.translation;
  Mat3 m;
  m.col(0) = world_to_cam.col(0);
  m.col(1) = world_to_cam.col(2);
  m.col(2) = t;
  return Homography::canonical(camera.intrinsics() * m);
}

CameraPose decompose_homography(const Homography& h, const Mat3& intrinsics) {
  const Mat3 b = intrinsics.inverse() * h.matrix;
  const double lambda = b.col(0).norm();
  if (!(lambda > 1e-12)) throw DomainError("degenerate homography: cannot recover scale");

  const auto pose_for_sign = [&](double sign) {
    const Vec3 r1 = sign * b.col(0) / lambda;
    const Vec3 r3 = sign * b.col(1) / lambda;
    const Vec3 t = sign * b.col(2) / lambda;
    Mat3 rw;
    rw.col(0) = r1;
    rw.col(1) = r3.cross(r1);
    rw.col(2) = r3;
    const Eigen::JacobiSVD<Mat3> svd(rw, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 ortho = svd.matrixU() * svd.matrixV().transpose();
    if (ortho.determinant() < 0.0) {
      Mat3 u = svd.matrixU();
      u.col(2) = -u.col(2);
      ortho = u * svd.matrixV().transpose();
    }
    CameraPose pose;
    pose.rotation = ortho.transpose();
    pose.center = -pose.rotation * t;
    return pose;
  };
  CameraPose pose = pose_for_sign(1.0);
  if (!(pose.center.y() > 0.0)) pose = pose_for_sign(-1.0);
  return pose;
}

Mat3 Intrinsics::matrix() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

namespace {

// Reprojection residuals of a pose given as a rotation-vector update on `base` plus a center.
struct PoseResiduals {
  using Scalar = double;
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  const std::vector<PointPair>* pairs;
  Mat3 k;
  Mat3 base;

  int inputs() const { return 6; }
  int values() const { return static_cast<int>(2 * pairs->size()); }

  Mat3 rotation(const Eigen::VectorXd& p) const {
    const Vec3 omega = p.head<3>();
    const double angle = omega.norm();
    if (angle == 0.0) return base;
    return Eigen::AngleAxisd(angle, omega / angle).toRotationMatrix() * base;
  }

  int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& r) const {
    const Mat3 world_to_cam = rotation(p).transpose();
    const Vec3 center = p.tail<3>();
    for (std::size_t i = 0; i < pairs->size(); ++i) {
      const auto& pp = (*pairs)[i];
      const Vec3 q = k * (world_to_cam * (Vec3(pp.plane.x(), 0.0, pp.plane.y()) - center));
      r[2 * i] = q.x() / q.z() - pp.pixel.x();
      r[2 * i + 1] = q.y() / q.z() - pp.pixel.y();
    }
    return 0;
  }
};

CameraPose refine_pose(const CameraPose& start, const std::vector<PointPair>& pairs, const Mat3& k) {
  Eigen::NumericalDiff<PoseResiduals> functor(PoseResiduals{&pairs, k, start.rotation});
  Eigen::LevenbergMarquardt<Eigen::NumericalDiff<PoseResiduals>> lm(functor);
  Eigen::VectorXd p(6);
  p << 0.0, 0.0, 0.0, start.center;
  lm.minimize(p);
  CameraPose out{functor.rotation(p), p.tail<3>()};
  return out.center.allFinite() && out.rotation.allFinite() ? out : start;
}

}  // namespace

CalibrationResult calibrate_from_field(const std::map<std::string, Vec2>& landmarks,
                                       const FieldModel& field, const Intrinsics& intrinsics) {
  std::vector<PointPair> pairs;
  for (const auto& [name, pixel] : landmarks) {
    const auto it = field.points.find(name);
    if (it != field.points.end()) pairs.push_back({it->second, pixel});
  }
  if (pairs.size() < 4)
    throw DomainError("calibration needs at least 4 landmarks matching the field model, got " +
                      std::to_string(pairs.size()));
  const Homography h = estimate_homography(pairs);
  const CameraPose pose = refine_pose(decompose_homography(h, intrinsics.matrix()), pairs, intrinsics.matrix());

  CalibrationResult res;
  res.camera.fx = intrinsics.fx;
  res.camera.fy = intrinsics.fy;
  res.camera.cx = intrinsics.cx;
  res.camera.cy = intrinsics.cy;
  res.camera.width = intrinsics.width;
  res.camera.height = intrinsics.height;
  res.camera.rotation = pose.rotation;
  res.camera.translation = pose.center;
  res.landmarks_used = pairs.size();

  double sq = 0.0;
  for (const auto& p : pairs) {
    const auto reproj = project(res.camera, Vec3(p.plane.x(), 0.0, p.plane.y()));
    if (!reproj) {
      sq = std::numeric_limits<double>::infinity();
      break;
    }
    sq += (*reproj - p.pixel).squaredNorm();
  }
  res.rms_reprojection_error = std::sqrt(sq / static_cast<double>(pairs.size()));
  return res;
}

double camera_center_variance(std::span<const CameraModel> cameras) {
  if (cameras.empty()) throw DomainError("no cameras");
  Vec3 mean = Vec3::Zero();
  for (const auto& c : cameras) mean += c.translation;
  mean /= static_cast<double>(cameras.size());
  double var = 0.0;
  for (const auto& c : cameras) var += (c.translation - mean).squaredNorm();
  return var / static_cast<double>(cameras.size());
}

SequenceVerdict sequence_quality_filter(std::span<const CameraModel> cameras, double threshold) {
  if (cameras.size() < 2) throw DomainError("quality filter needs at least 2 cameras");
  return camera_center_variance(cameras) > threshold ? SequenceVerdict::Reject
                                                     : SequenceVerdict::Accept;
}

namespace {

CameraModel blend(const CameraModel& a, const CameraModel& b, double s) {
  CameraModel out = a;
  out.fx = a.fx + s * (b.fx - a.fx);
  out.fy = a.fy + s * (b.fy - a.fy);
  out.cx = a.cx + s * (b.cx - a.cx);
  out.cy = a.cy + s * (b.cy - a.cy);
  out.translation = a.translation + s * (b.translation - a.translation);
  const Eigen::Quaterniond qa(a.rotation);
  const Eigen::Quaterniond qb(b.rotation);
  out.rotation = qa.normalized().slerp(s, qb.normalized()).normalized().toRotationMatrix();
  return out;
}

}  // namespace

std::vector<CameraModel> interpolate_cameras(std::span<const std::optional<CameraModel>> seq) {
  std::vector<std::size_t> present;
  for (std::size_t i = 0; i < seq.size(); ++i)
    if (seq[i]) present.push_back(i);
  if (present.empty()) throw DomainError("no camera to interpolate from");

  std::vector<CameraModel> out(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (seq[i]) {
      out[i] = *seq[i];
      continue;
    }
    const auto next = std::upper_bound(present.begin(), present.end(), i);
    if (next == present.begin()) {
      out[i] = *seq[present.front()];
    } else if (next == present.end()) {
      out[i] = *seq[present.back()];
    } else {
      const std::size_t lo = *(next - 1);
      const std::size_t hi = *next;
      const double s = static_cast<double>(i - lo) / static_cast<double>(hi - lo);
      out[i] = blend(*seq[lo], *seq[hi], s);
    }
  }
  return out;
}

}  // namespace playenv
