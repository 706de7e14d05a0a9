#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "playenv/fields.hpp"
#include "playenv/geometry.hpp"
#include "playenv/image.hpp"
#include "playenv/state.hpp"

namespace playenv {

enum class ObjectKind { Static, Playable };

/// One bounded radiance field placed in the scene. `volume` is expressed relative to the anchor.
/// Several objects may share one field.
struct ObjectSpec {
  int id = 0;
  std::string name;
  ObjectKind kind = ObjectKind::Static;
  BoundingVolume volume;
  std::shared_ptr<const FieldDescriptor> field;
  int samples_per_ray = 1;
  Vec3 anchor = Vec3::Zero();
  std::optional<BendDescriptor> bend;
  StyleCode style = StyleCode::Zero(kDefaultStyleDim);
  PoseCode pose = PoseCode::Zero(kDefaultPoseDim);
};

enum class RenderMode { MultiScale, Dense };

struct RenderConfig {
  int width = 512;
  int height = 288;
  std::vector<int> factors{8, 4};
  RenderMode mode = RenderMode::MultiScale;
  RayRange range{0.0, 1000.0};
  /// Seeded per-sample jitter inside each stratum instead of midpoints.
  bool jitter = false;
  std::uint64_t jitter_seed = 0;
};

struct Scene {
  std::vector<ObjectSpec> objects;
  FieldDescriptor background;
  RenderConfig render;
  int feature_dim = kDefaultFeatureDim;
  int style_dim = kDefaultStyleDim;
  int pose_dim = kDefaultPoseDim;
};

/// Per-object states keyed by object id. Playable objects must have an entry; static objects
/// fall back to their spec anchor, style and pose.
using StateMap = std::map<int, EnvironmentState>;

/// An object resolved against the current states: world placement plus codes.
struct PlacedObject {
  const ObjectSpec* spec = nullptr;
  Vec3 anchor = Vec3::Zero();
  StyleCode w;
  PoseCode pi;
  BoundingVolume world_box;
};

std::vector<PlacedObject> place_objects(const Scene& scene, const StateMap& states);

struct RaySample {
  double t = 0.0;
  double delta = 0.0;
  RadianceSample sample;
  int object_id = 0;
};

using RaySampleList = std::vector<RaySample>;

/// N samples at the stratum midpoints of the ray/volume overlap (or jittered inside each stratum
/// when `jitter_key` is set). Empty on a miss or a grazing hit.
RaySampleList sample_object_ray(const Ray& ray, const PlacedObject& obj,
                                std::optional<std::uint64_t> jitter_key = std::nullopt);
RaySampleList sample_object_ray(const Ray& ray, const ObjectSpec& obj,
                                const EnvironmentState& state);

struct IntegrationResult {
  Feature feature;
  double residual_transmittance = 1.0;
};

/// Quadrature of the rendering integral; the background, when given, terminates the ray.
/// Throws DomainError on samples out of t order.
IntegrationResult integrate(std::span<const RaySample> samples,
                            const std::optional<RadianceSample>& background,
                            int feature_dim = kDefaultFeatureDim);

/// Per-sample weights T_i (1 - exp(-sigma_i delta_i)) followed by the terminal weight T_{N+1}.
std::vector<double> compositing_weights(std::span<const RaySample> samples);

/// All objects' samples merged by t; equal t integrates the lower object id first.
RaySampleList gather_ray_samples(const Ray& ray, std::span<const PlacedObject> objects,
                                 std::optional<std::uint64_t> jitter_key = std::nullopt);

RadianceSample background_sample(const Scene& scene, const Ray& ray);

Feature compose_and_render_ray(const Ray& ray, const Scene& scene,
                               std::span<const PlacedObject> objects,
                               std::optional<std::uint64_t> jitter_key = std::nullopt);
Feature compose_and_render_ray(const Ray& ray, const Scene& scene, const StateMap& states);

/// Feature grid at downsampling factor d: one ray per cell.
struct FeatureMap {
  int factor = 1;
  Image grid;  // (w/d) x (h/d), feature_dim channels
};

/// 0-based pixel-center coordinate of grid index k at factor d.
double feature_grid_position(int k, int factor);

/// Rays needed for one image at the given factors: sum of (h/d)(w/d).
std::size_t ray_budget(int width, int height, std::span<const int> factors);

FeatureMap render_feature_map(const Scene& scene, const StateMap& states,
                              const CameraModel& camera, int factor);

/// One ray per pixel center.
Image render_dense(const Scene& scene, const StateMap& states, const CameraModel& camera);

/// Turns multi-resolution feature maps into a full-resolution image.
class FeatureDecoder {
public:
  virtual ~FeatureDecoder() = default;
  virtual Image decode(std::span<const FeatureMap> maps, int width, int height) const = 0;
};

/// Bilinear upsampling of every map to full resolution, then the per-pixel mean.
class BilinearAverageDecoder final : public FeatureDecoder {
public:
  Image decode(std::span<const FeatureMap> maps, int width, int height) const override;
};

Image upsample_bilinear(const FeatureMap& map, int width, int height);

/// Full image per `scene.render`: dense, or feature maps at every factor plus decode.
Image render_image(const Scene& scene, const StateMap& states, const CameraModel& camera,
                   const FeatureDecoder& decoder = BilinearAverageDecoder{});

namespace reference {

// Single-threaded loops over the same per-ray kernel; parallel results must match bit for bit.
FeatureMap render_feature_map(const Scene& scene, const StateMap& states,
                              const CameraModel& camera, int factor);
Image render_dense(const Scene& scene, const StateMap& states, const CameraModel& camera);

}  // namespace reference

}  // namespace playenv
