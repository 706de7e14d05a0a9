#include "playenv/image.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <png.h>

#include "playenv/errors.hpp"

namespace playenv {

void Image::set_pixel(int x, int y, const Feature& f) {
  double* dst = &data[(std::size_t(y) * width + x) * channels];
  for (int c = 0; c < channels; ++c) dst[c] = f[c];
}

Feature Image::pixel(int x, int y) const {
  Feature f(channels);
  const double* src = &data[(std::size_t(y) * width + x) * channels];
  for (int c = 0; c < channels; ++c) f[c] = src[c];
  return f;
}

std::uint64_t content_hash(const Image& image) {
  constexpr std::uint64_t kOffset = 14695981039346656037ull;
  constexpr std::uint64_t kPrime = 1099511628211ull;
  std::uint64_t h = kOffset;
  const auto mix = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffu;
      h *= kPrime;
    }
  };
  mix(static_cast<std::uint64_t>(image.width));
  mix(static_cast<std::uint64_t>(image.height));
  mix(static_cast<std::uint64_t>(image.channels));
  for (double v : image.data) {
    // +0.0 so that a rounded -0 hashes like 0
    const double q = std::round(v * 1e6) + 0.0;
    mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(q)));
  }
  return h;
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

namespace {

std::vector<std::uint8_t> to_rgb8(const Image& image) {
  std::vector<std::uint8_t> px(std::size_t(image.width) * image.height * 3, 0);
  const int used = std::min(image.channels, 3);
  for (std::size_t i = 0; i < std::size_t(image.width) * image.height; ++i) {
    for (int c = 0; c < 3; ++c) {
      const double v = image.data[i * image.channels + std::min(c, used - 1)];
      px[i * 3 + c] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    }
  }
  return px;
}

png_image make_header(const Image& image) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  return png;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& image) {
  if (image.channels < 1 || image.width < 1 || image.height < 1)
    throw DomainError("cannot encode an empty image");
  const auto px = to_rgb8(image);
  png_image png = make_header(image);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, px.data(), 0, nullptr))
    throw std::runtime_error(std::string("png sizing failed: ") + png.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, px.data(), 0, nullptr))
    throw std::runtime_error(std::string("png encoding failed: ") + png.message);
  out.resize(size);
  return out;
}

void write_png(const Image& image, const std::filesystem::path& path) {
  const auto bytes = encode_png(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Image read_png(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str()))
    throw std::runtime_error("cannot read " + path.string() + ": " + png.message);
  png.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, px.data(), 0, nullptr))
    throw std::runtime_error("cannot decode " + path.string() + ": " + png.message);
  Image img(static_cast<int>(png.width), static_cast<int>(png.height), 3);
  for (std::size_t i = 0; i < px.size(); ++i) img.data[i] = px[i] / 255.0;
  return img;
}

void write_raw(const Image& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  for (double v : image.data) {
    auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
}

}  // namespace playenv
