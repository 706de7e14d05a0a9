#include "playenv/renderer.hpp"
#include "render_kernel.hpp"

namespace playenv::reference {

FeatureMap render_feature_map(const Scene& scene, const StateMap& states,
                              const CameraModel& camera, int factor) {
  detail::check_factor(camera, factor);
  const auto placed = place_objects(scene, states);
  const int cols = camera.width / factor;
  const int rows = camera.height / factor;
  FeatureMap map{factor, Image(cols, rows, scene.feature_dim)};
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
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      const auto key = detail::cell_jitter_key(scene.render, 1, std::size_t(y) * camera.width + x);
      img.set_pixel(x, y, detail::render_pixel(scene, placed, camera, Vec2(x + 0.5, y + 0.5), key));
    }
  }
  return img;
}

}  // namespace playenv::reference
