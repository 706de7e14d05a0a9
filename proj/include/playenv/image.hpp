#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "playenv/fields.hpp"

namespace playenv {

/// Row-major multi-channel image of doubles; channel index fastest.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c) : width(w), height(h), channels(c), data(std::size_t(w) * h * c, 0.0) {}

  double& at(int x, int y, int c) { return data[(std::size_t(y) * width + x) * channels + c]; }
  double at(int x, int y, int c) const { return data[(std::size_t(y) * width + x) * channels + c]; }

  void set_pixel(int x, int y, const Feature& f);
  Feature pixel(int x, int y) const;

  bool operator==(const Image&) const = default;
};

/// 64-bit FNV-1a over the buffer with every value rounded to 1e-6 first.
std::uint64_t content_hash(const Image& image);

std::string hash_hex(std::uint64_t hash);

/// 8-bit PNG of the first min(channels, 3) channels, clamped [0,1] -> [0,255].
std::vector<std::uint8_t> encode_png(const Image& image);
void write_png(const Image& image, const std::filesystem::path& path);

/// Reads an 8-bit PNG as an RGB image scaled to [0,1].
Image read_png(const std::filesystem::path& path);

/// Little-endian float32 dump with no header.
void write_raw(const Image& image, const std::filesystem::path& path);

}  // namespace playenv
