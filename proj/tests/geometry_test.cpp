#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "playenv/errors.hpp"
#include "playenv/geometry.hpp"
#include "test_util.hpp"

namespace playenv {
namespace {

using testing::random_camera;

TEST(PixelRay, PrincipalPointLooksDownOpticalAxis) {
  CameraModel c;
  c.fx = c.fy = 100.0;
  c.cx = 32.0;
  c.cy = 24.0;
  c.width = 64;
  c.height = 48;
  const Ray r = pixel_ray(c, {32.0, 24.0});
  EXPECT_EQ(r.direction, Vec3(0, 0, 1));
  EXPECT_EQ(r.origin, c.translation);
}

TEST(PixelRay, UnitFocalOffsetPixel) {
  CameraModel c;
  c.width = 4;
  c.height = 4;
  const Ray r = pixel_ray(c, {1.0, 0.0});
  const Vec3 expected = Vec3(1, 0, 1) / std::sqrt(2.0);
  EXPECT_NEAR((r.direction - expected).norm(), 0.0, 1e-15);
}

TEST(PixelRay, OutOfBoundsPixelThrows) {
  CameraModel c;
  c.width = 4;
  c.height = 3;
  EXPECT_THROW(pixel_ray(c, {4.0, 1.0}), DomainError);
  EXPECT_THROW(pixel_ray(c, {-0.01, 1.0}), DomainError);
  EXPECT_THROW(pixel_ray(c, {1.0, 3.0}), DomainError);
  EXPECT_NO_THROW(pixel_ray(c, {3.999, 2.999}));
}

TEST(PixelRay, CarriesRange) {
  CameraModel c;
  c.width = c.height = 2;
  const Ray r = pixel_ray(c, {0.5, 0.5}, RayRange{0.25, 9.0});
  EXPECT_EQ(r.t_near, 0.25);
  EXPECT_EQ(r.t_far, 9.0);
}

TEST(PixelRay, ProjectInvertsUnprojectOnRandomCameras) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> t(0.01, 100.0);
  for (int i = 0; i < 2000; ++i) {
    const CameraModel c = random_camera(rng);
    std::uniform_real_distribution<double> px(0.0, c.width), py(0.0, c.height);
    const Vec2 p(px(rng), py(rng));
    const Ray r = pixel_ray(c, p);
    EXPECT_NEAR(r.direction.norm(), 1.0, 1e-12);
    const auto back = project(c, r.point_at(t(rng)));
    ASSERT_TRUE(back.has_value());
    EXPECT_NEAR((*back - p).norm(), 0.0, 1e-6);
  }
}

TEST(Project, BehindCameraIsEmpty) {
  CameraModel c;
  EXPECT_FALSE(project(c, Vec3(0, 0, -1)).has_value());
  EXPECT_FALSE(project(c, Vec3(1, 0, 0)).has_value());
}

TEST(CameraModel, ValidateRejectsBrokenInvariants) {
  CameraModel c;
  EXPECT_NO_THROW(c.validate());
  CameraModel bad = c;
  bad.fx = 0.0;
  EXPECT_THROW(bad.validate(), DomainError);
  bad = c;
  bad.width = 0;
  EXPECT_THROW(bad.validate(), DomainError);
  bad = c;
  bad.rotation(0, 0) = -1.0;  // reflection, det -1
  EXPECT_THROW(bad.validate(), DomainError);
  bad = c;
  bad.rotation(0, 1) = 1e-6;
  EXPECT_THROW(bad.validate(), DomainError);
}

TEST(LookAt, ProducesProperRotationFacingTarget) {
  const CameraModel c = look_at({1, 5, -10}, {0, 0, 3}, Vec3::UnitY(), 300, 300, 64, 48);
  EXPECT_NO_THROW(c.validate());
  const Vec3 fwd = c.rotation.col(2);
  EXPECT_NEAR((fwd - (Vec3(0, 0, 3) - Vec3(1, 5, -10)).normalized()).norm(), 0.0, 1e-12);
  // image y points down
  EXPECT_LT(c.rotation.col(1).y(), 0.0);
}

TEST(IntersectAabb, SlabArithmetic) {
  Ray r;
  r.origin = {0, 0, -2};
  const BoundingVolume unit{{-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}};
  const auto hit = intersect_aabb(r, unit);
  ASSERT_TRUE(hit);
  EXPECT_DOUBLE_EQ(hit->t_in, 1.5);
  EXPECT_DOUBLE_EQ(hit->t_out, 2.5);
}

TEST(IntersectAabb, ParallelOffsetMisses) {
  Ray r;
  r.origin = {2, 0, -2};
  EXPECT_FALSE(intersect_aabb(r, {{-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}}));
}

TEST(IntersectAabb, OriginInsideClampsIngress) {
  Ray r;
  const auto hit = intersect_aabb(r, {{-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}});
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->t_in, 0.0);
  EXPECT_DOUBLE_EQ(hit->t_out, 0.5);
  r.t_near = 0.2;
  EXPECT_DOUBLE_EQ(intersect_aabb(r, {{-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}})->t_in, 0.2);
}

TEST(IntersectAabb, ClipsToFarAndBehind) {
  Ray r;
  r.origin = {0, 0, -2};
  r.t_far = 2.0;
  const auto hit = intersect_aabb(r, {{-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}});
  ASSERT_TRUE(hit);
  EXPECT_DOUBLE_EQ(hit->t_out, 2.0);
  r.t_far = 1.0;
  EXPECT_FALSE(intersect_aabb(r, {{-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}}));
  Ray behind;
  behind.origin = {0, 0, 2};
  EXPECT_FALSE(intersect_aabb(behind, {{-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}}));
}

TEST(IntersectAabb, FlatBoxAndGrazingHit) {
  Ray r;
  r.origin = {0, 1, 0};
  r.direction = {0, -1, 0};
  const auto hit = intersect_aabb(r, {{-1, 0, -1}, {1, 0, 1}});
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->t_in, hit->t_out);
  EXPECT_DOUBLE_EQ(hit->t_in, 1.0);

  Ray graze;
  graze.origin = {-2, 0.5, 0};
  graze.direction = {1, 0, 0};
  const auto g = intersect_aabb(graze, {{-1, 0.5, -1}, {1, 0.5, 1}});
  ASSERT_TRUE(g);
  EXPECT_EQ(g->length(), 2.0);
}

// Marches the ray and records the first and last inside positions.
std::optional<Interval> brute_force_interval(const Ray& r, const BoundingVolume& b, double t_max,
                                             int steps) {
  const double h = (t_max - r.t_near) / steps;
  std::optional<Interval> out;
  for (int i = 0; i <= steps; ++i) {
    const double t = r.t_near + i * h;
    if (b.contains(r.point_at(t))) {
      if (!out) out = Interval{t, t};
      out->t_out = t;
    }
  }
  return out;
}

TEST(IntersectAabb, AgreesWithBruteForceMarcher) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uniform_real_distribution<double> ext(0.1, 2.0);
  std::normal_distribution<double> n(0.0, 1.0);
  const int steps = 10000;
  const double t_max = 15.0;
  const double h = t_max / steps;
  int hits = 0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 lo(u(rng), u(rng), u(rng));
    const BoundingVolume b{lo, lo + Vec3(ext(rng), ext(rng), ext(rng))};
    Ray r;
    r.origin = {u(rng), u(rng), u(rng)};
    // aim most rays at a point of the box so hits are common
    const Vec3 f(std::abs(n(rng)) / 2, std::abs(n(rng)) / 2, std::abs(n(rng)) / 2);
    const Vec3 aim = b.min_corner + (b.max_corner - b.min_corner).cwiseProduct(f);
    r.direction = (aim - r.origin).normalized();
    r.t_far = t_max;
    const auto exact = intersect_aabb(r, b);
    const auto brute = brute_force_interval(r, b, t_max, steps);
    if (!brute) {
      // the marcher can only miss slivers thinner than a step
      if (exact) EXPECT_LE(exact->length(), h) << i;
      continue;
    }
    ASSERT_TRUE(exact) << i;
    ++hits;
    EXPECT_LE(exact->t_in, brute->t_in + 1e-12);
    EXPECT_GE(exact->t_in, brute->t_in - h - 1e-12);
    EXPECT_GE(exact->t_out, brute->t_out - 1e-12);
    EXPECT_LE(exact->t_out, brute->t_out + h + 1e-12);
  }
  EXPECT_GT(hits, 800);
}

TEST(ProjectToGround, SyntheticRoundTrip) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> xz(-3.0, 3.0);
  for (int i = 0; i < 500; ++i) {
    const CameraModel c = testing::random_ground_camera(rng);
    const Vec3 g(xz(rng), 0.0, xz(rng));
    const auto p = project(c, g);
    if (!p) continue;
    Detection d{1, {p->x() - 7.0, p->y() - 20.0, p->x() + 7.0, p->y()}, true};
    const Vec3 back = project_to_ground(d, c);
    EXPECT_EQ(back.y(), 0.0);
    EXPECT_NEAR((back - g).norm(), 0.0, 1e-6);
  }
}

TEST(ProjectToGround, HorizontalRayHasNoIntersection) {
  const CameraModel c = look_at({0, 2, 0}, {0, 2, 10}, Vec3::UnitY(), 100, 100, 64, 48);
  Detection d{1, {10, 20, 30, c.cy}, true};
  EXPECT_THROW(project_to_ground(d, c), NoIntersectionError);
  // above the horizon the ray diverges from the ground
  d.bbox.y_max = c.cy - 5.0;
  EXPECT_THROW(project_to_ground(d, c), NoIntersectionError);
}

TEST(ProjectToGround, HigherPixelIsFartherAway) {
  const CameraModel c = look_at({0, 5, 0}, {0, 0, 10}, Vec3::UnitY(), 200, 200, 128, 96);
  const Detection low{1, {60, 50, 68, 90}, true};
  const Detection high{2, {60, 40, 68, 70}, true};
  const Vec3 a = project_to_ground(low, c);
  const Vec3 b = project_to_ground(high, c);
  EXPECT_GT((b - c.center()).norm(), (a - c.center()).norm());
}

TEST(ProjectToGround, AlwaysExactlyOnPlane) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 1000; ++i) {
    const CameraModel c = testing::random_ground_camera(rng, 64, 48);
    std::uniform_real_distribution<double> px(0.0, 64.0), py(30.0, 48.0);
    const double x = px(rng), y = py(rng);
    try {
      EXPECT_EQ(project_to_ground(Detection{1, {x - 1, y - 3, x + 1, y}, true}, c).y(), 0.0);
    } catch (const NoIntersectionError&) {
    }
  }
}

TEST(CameraRelative, IdentityAndYaw) {
  CameraModel c;
  EXPECT_EQ(camera_relative_to_world({1, 2, 3}, c), Vec3(1, 2, 3));
  c.rotation = yaw_rotation(std::numbers::pi / 2);
  EXPECT_NEAR((camera_relative_to_world({0, 0, 1}, c) - Vec3(1, 0, 0)).norm(), 0.0, 1e-15);
}

TEST(CameraRelative, PreservesNorm) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    CameraModel c;
    c.rotation = testing::random_rotation(rng);
    const Vec3 d(n(rng), n(rng), n(rng));
    EXPECT_NEAR(camera_relative_to_world(d, c).norm(), d.norm(), 1e-12);
  }
}

TEST(DetectVolume, BoxInFrontIsValidAndClipped) {
  const CameraModel c = testing::forward_camera(64, 48, 50.0);
  const Detection d = detect_volume(3, {{-0.5, -0.5, 4}, {0.5, 0.5, 5}}, c);
  ASSERT_TRUE(d.valid);
  EXPECT_EQ(d.object_id, 3);
  EXPECT_NEAR(d.bbox.x_min, 32 - 50 * 0.5 / 4, 1e-12);
  EXPECT_NEAR(d.bbox.y_max, 24 + 50 * 0.5 / 4, 1e-12);

  const Detection wide = detect_volume(3, {{-50, -0.5, 4}, {50, 0.5, 5}}, c);
  ASSERT_TRUE(wide.valid);
  EXPECT_EQ(wide.bbox.x_min, 0.0);
  EXPECT_EQ(wide.bbox.x_max, 64.0);
}

TEST(DetectVolume, BehindOrOffscreenIsInvalid) {
  const CameraModel c = testing::forward_camera(64, 48, 50.0);
  EXPECT_FALSE(detect_volume(1, {{-0.5, -0.5, -5}, {0.5, 0.5, -4}}, c).valid);
  EXPECT_FALSE(detect_volume(1, {{-0.5, -0.5, -1}, {0.5, 0.5, 4}}, c).valid);
  EXPECT_FALSE(detect_volume(1, {{100, -0.5, 4}, {101, 0.5, 5}}, c).valid);
}

}  // namespace
}  // namespace playenv
