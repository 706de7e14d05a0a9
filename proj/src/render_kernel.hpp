#pragma once

// Shared per-ray kernel for the parallel renderer and its serial reference.

#include <cstdint>
#include <optional>
#include <span>

#include "playenv/renderer.hpp"

namespace playenv::detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Uniform double in (0, 1) from 53 random bits.
inline double unit_from_bits(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

inline std::optional<std::uint64_t> cell_jitter_key(const RenderConfig& cfg, int factor,
                                                    std::size_t cell) {
  if (!cfg.jitter) return std::nullopt;
  return splitmix64(cfg.jitter_seed ^ splitmix64((static_cast<std::uint64_t>(factor) << 40) ^ cell));
}

inline Feature render_pixel(const Scene& scene, std::span<const PlacedObject> objects,
                            const CameraModel& camera, const Vec2& pixel,
                            std::optional<std::uint64_t> key) {
  const Ray ray = pixel_ray(camera, pixel, scene.render.range);
  return compose_and_render_ray(ray, scene, objects, key);
}

void check_factor(const CameraModel& camera, int factor);

}  // namespace playenv::detail
