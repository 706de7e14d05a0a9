#include "playenv/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "playenv/errors.hpp"
#include "render_kernel.hpp"

namespace playenv {

std::vector<PlacedObject> place_objects(const Scene& scene, const StateMap& states) {
  std::vector<PlacedObject> placed;
  placed.reserve(scene.objects.size());
  for (const auto& obj : scene.objects) {
    PlacedObject p;
    p.spec = &obj;
    const auto it = states.find(obj.id);
    if (it != states.end()) {
      p.anchor = it->second.x;
      p.w = it->second.w;
      p.pi = it->second.pi;
    } else if (obj.kind == ObjectKind::Playable) {
      throw DomainError("no state for playable object " + std::to_string(obj.id));
    } else {
      p.anchor = obj.anchor;
      p.w = obj.style;
      p.pi = obj.pose;
    }
    p.world_box = obj.volume.translated(p.anchor);
    placed.push_back(std::move(p));
  }
  return placed;
}

RaySampleList sample_object_ray(const Ray& ray, const PlacedObject& obj,
                                std::optional<std::uint64_t> jitter_key) {
  RaySampleList out;
  const ObjectSpec& spec = *obj.spec;
  const int n = spec.samples_per_ray;
  if (n < 1) return out;
  const auto hit = intersect_aabb(ray, obj.world_box);
  if (!hit || !(hit->t_out > hit->t_in)) return out;

  const double length = hit->length();
  const double delta = length / n;
  const BendDescriptor bend_desc = spec.bend.value_or(ZeroBend{});
  out.reserve(static_cast<std::size_t>(n));
  for (int p = 0; p < n; ++p) {
    double offset = 0.5;
    if (jitter_key) {
      const auto bits = detail::splitmix64(*jitter_key ^ detail::splitmix64(
                                               (static_cast<std::uint64_t>(spec.id) << 32) ^
                                               static_cast<std::uint64_t>(p)));
      offset = detail::unit_from_bits(bits);
    }
    const double t = hit->t_in + (p + offset) / n * length;
    const Vec3 local = ray.point_at(t) - obj.anchor;
    const Vec3 canonical = bend(local, obj.pi, bend_desc);
    out.push_back(RaySample{t, delta, sample_field(*spec.field, canonical, obj.w), spec.id});
  }
  return out;
}

RaySampleList sample_object_ray(const Ray& ray, const ObjectSpec& obj,
                                const EnvironmentState& state) {
  PlacedObject p{&obj, state.x, state.w, state.pi, obj.volume.translated(state.x)};
  return sample_object_ray(ray, p);
}

std::vector<double> compositing_weights(std::span<const RaySample> samples) {
  std::vector<double> weights;
  weights.reserve(samples.size() + 1);
  double optical_depth = 0.0;
  for (const auto& s : samples) {
    const double transmittance = std::exp(-optical_depth);
    weights.push_back(transmittance * -std::expm1(-s.sample.sigma * s.delta));
    optical_depth += s.sample.sigma * s.delta;
  }
  weights.push_back(std::exp(-optical_depth));
  return weights;
}

IntegrationResult integrate(std::span<const RaySample> samples,
                            const std::optional<RadianceSample>& background, int feature_dim) {
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].t < samples[i - 1].t) throw DomainError("ray samples are not sorted by t");
  }
  if (!samples.empty()) feature_dim = static_cast<int>(samples.front().sample.feature.size());
  else if (background) feature_dim = static_cast<int>(background->feature.size());

  IntegrationResult result{Feature::Zero(feature_dim), 1.0};
  double optical_depth = 0.0;
  for (const auto& s : samples) {
    const double transmittance = std::exp(-optical_depth);
    const double alpha = -std::expm1(-s.sample.sigma * s.delta);
    result.feature += (transmittance * alpha) * s.sample.feature;
    optical_depth += s.sample.sigma * s.delta;
  }
  result.residual_transmittance = std::exp(-optical_depth);
  if (background) result.feature += result.residual_transmittance * background->feature;
  return result;
}

RaySampleList gather_ray_samples(const Ray& ray, std::span<const PlacedObject> objects,
                                 std::optional<std::uint64_t> jitter_key) {
  RaySampleList merged;
  for (const auto& obj : objects) {
    auto part = sample_object_ray(ray, obj, jitter_key);
    merged.insert(merged.end(), std::make_move_iterator(part.begin()),
                  std::make_move_iterator(part.end()));
  }
  std::sort(merged.begin(), merged.end(), [](const RaySample& a, const RaySample& b) {
    if (a.t != b.t) return a.t < b.t;
    return a.object_id < b.object_id;
  });
  return merged;
}

RadianceSample background_sample(const Scene& scene, const Ray& ray) {
  return sample_field(scene.background, Vec3::Zero(), StyleCode::Zero(scene.style_dim),
                      ray.direction, ray.origin);
}

Feature compose_and_render_ray(const Ray& ray, const Scene& scene,
                               std::span<const PlacedObject> objects,
                               std::optional<std::uint64_t> jitter_key) {
  const auto samples = gather_ray_samples(ray, objects, jitter_key);
  return integrate(samples, background_sample(scene, ray), scene.feature_dim).feature;
}

Feature compose_and_render_ray(const Ray& ray, const Scene& scene, const StateMap& states) {
  const auto placed = place_objects(scene, states);
  return compose_and_render_ray(ray, scene, placed);
}

double feature_grid_position(int k, int factor) {
  // 1-based pixel index factor/2 + 1 + k*factor, moved to its 0-based pixel center.
  return static_cast<double>(factor / 2 + k * factor) + 0.5;
}

std::size_t ray_budget(int width, int height, std::span<const int> factors) {
  std::size_t rays = 0;
  for (int d : factors) {
    if (d < 1 || width % d != 0 || height % d != 0)
      throw DomainError("downsampling factor must divide the image size");
    rays += static_cast<std::size_t>(width / d) * static_cast<std::size_t>(height / d);
  }
  return rays;
}

namespace detail {

void check_factor(const CameraModel& camera, int factor) {
  if (factor < 1 || camera.width % factor != 0 || camera.height % factor != 0)
    throw DomainError("downsampling factor " + std::to_string(factor) +
                      " does not divide the image size");
}

}  // namespace detail

FeatureMap render_feature_map(const Scene& scene, const StateMap& states,
                              const CameraModel& camera, int factor) {
  detail::check_factor(camera, factor);
  const auto placed = place_objects(scene, states);
  const int cols = camera.width / factor;
  const int rows = camera.height / factor;
  FeatureMap map{factor, Image(cols, rows, scene.feature_dim)};
#pragma omp parallel for schedule(dynamic, 1)
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const Vec2 pixel(feature_grid_position(c, factor), feature_grid_position(r, factor));
      const auto key = detail::cell_jitter_key(scene.render, factor, std::size_t(r) * cols + c);
      map.grid.set_pixel(c, r, detail::render_pixel(scene, placed, camera, pixel, key));
    }
  }
  return map;
}

Image render_dense(const Scene& scene, const StateMap& states, const CameraModel& camera) {
  const auto placed = place_objects(scene, states);
  Image img(camera.width, camera.height, scene.feature_dim);
#pragma omp parallel for schedule(dynamic, 1)
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      const auto key = detail::cell_jitter_key(scene.render, 1, std::size_t(y) * camera.width + x);
      img.set_pixel(x, y, detail::render_pixel(scene, placed, camera, Vec2(x + 0.5, y + 0.5), key));
    }
  }
  return img;
}

namespace {

struct Tap {
  int i0;
  int i1;
  double a;
};

Tap grid_tap(double pixel_center, int factor, int n) {
  const double g = (pixel_center - feature_grid_position(0, factor)) / factor;
  if (g <= 0.0) return {0, 0, 0.0};
  const int i0 = std::min(static_cast<int>(std::floor(g)), n - 1);
  const int i1 = std::min(i0 + 1, n - 1);
  return {i0, i1, i1 == i0 ? 0.0 : g - i0};
}

}  // namespace

Image upsample_bilinear(const FeatureMap& map, int width, int height) {
  const Image& g = map.grid;
  Image out(width, height, g.channels);
  std::vector<Tap> xs(static_cast<std::size_t>(width));
  for (int x = 0; x < width; ++x) xs[x] = grid_tap(x + 0.5, map.factor, g.width);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < height; ++y) {
    const Tap ty = grid_tap(y + 0.5, map.factor, g.height);
    for (int x = 0; x < width; ++x) {
      const Tap& tx = xs[x];
      for (int c = 0; c < g.channels; ++c) {
        // lerp as a + t (b - a) keeps constant inputs exact
        const double v00 = g.at(tx.i0, ty.i0, c);
        const double v01 = g.at(tx.i1, ty.i0, c);
        const double v10 = g.at(tx.i0, ty.i1, c);
        const double v11 = g.at(tx.i1, ty.i1, c);
        const double top = v00 + tx.a * (v01 - v00);
        const double bottom = v10 + tx.a * (v11 - v10);
        out.at(x, y, c) = top + ty.a * (bottom - top);
      }
    }
  }
  return out;
}

Image BilinearAverageDecoder::decode(std::span<const FeatureMap> maps, int width,
                                     int height) const {
  if (maps.empty()) throw DomainError("nothing to decode");
  Image acc = upsample_bilinear(maps[0], width, height);
  for (std::size_t m = 1; m < maps.size(); ++m) {
    const Image up = upsample_bilinear(maps[m], width, height);
    for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += up.data[i];
  }
  const double n = static_cast<double>(maps.size());
  for (double& v : acc.data) v /= n;
  return acc;
}

Image render_image(const Scene& scene, const StateMap& states, const CameraModel& camera,
                   const FeatureDecoder& decoder) {
  if (scene.render.mode == RenderMode::Dense) return render_dense(scene, states, camera);
  std::vector<FeatureMap> maps;
  maps.reserve(scene.render.factors.size());
  for (int d : scene.render.factors) maps.push_back(render_feature_map(scene, states, camera, d));
  return decoder.decode(maps, camera.width, camera.height);
}

}  // namespace playenv
