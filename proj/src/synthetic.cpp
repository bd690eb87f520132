#include "pqp/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

namespace pqp {

namespace {

// Distribution-free helpers so fixtures are identical across standard
// libraries.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

int level(std::mt19937_64& rng) { return static_cast<int>(rng() >> 56); }

}  // namespace

Image synthetic_scene(std::uint64_t seed, std::size_t height, std::size_t width) {
  std::mt19937_64 rng(seed);
  std::array<std::array<double, 3>, 4> corner;
  for (auto& c : corner) {
    for (double& v : c) v = 30.0 + 195.0 * unit(rng);
  }

  struct Blob {
    double cy, cx, ry, rx;
    std::array<double, 3> color;
  };
  const std::size_t blob_count = 2 + static_cast<std::size_t>(unit(rng) * 3.0);
  std::vector<Blob> blobs(blob_count);
  for (auto& b : blobs) {
    b.cy = unit(rng) * static_cast<double>(height);
    b.cx = unit(rng) * static_cast<double>(width);
    b.ry = (0.12 + 0.25 * unit(rng)) * static_cast<double>(height);
    b.rx = (0.12 + 0.25 * unit(rng)) * static_cast<double>(width);
    for (double& v : b.color) v = 20.0 + 215.0 * unit(rng);
  }

  const auto th = static_cast<std::size_t>((0.3 + 0.3 * unit(rng)) * static_cast<double>(height));
  const auto tw = static_cast<std::size_t>((0.3 + 0.3 * unit(rng)) * static_cast<double>(width));
  const auto ty = static_cast<std::size_t>(unit(rng) * static_cast<double>(height - th + 1));
  const auto tx = static_cast<std::size_t>(unit(rng) * static_cast<double>(width - tw + 1));
  const double amplitude = 20.0 + 40.0 * unit(rng);

  std::vector<std::uint8_t> data(height * width * Image::kChannels);
  for (std::size_t r = 0; r < height; ++r) {
    const double v = height > 1 ? static_cast<double>(r) / static_cast<double>(height - 1) : 0.0;
    for (std::size_t c = 0; c < width; ++c) {
      const double u = width > 1 ? static_cast<double>(c) / static_cast<double>(width - 1) : 0.0;
      std::array<double, 3> px;
      for (std::size_t ch = 0; ch < 3; ++ch) {
        px[ch] = (1 - u) * (1 - v) * corner[0][ch] + u * (1 - v) * corner[1][ch] +
                 (1 - u) * v * corner[2][ch] + u * v * corner[3][ch];
      }
      for (const auto& b : blobs) {
        const double dy = (static_cast<double>(r) - b.cy) / b.ry;
        const double dx = (static_cast<double>(c) - b.cx) / b.rx;
        // Opaque inside the ellipse, fading out over a short rim.
        const double a = std::clamp((1.3 - std::sqrt(dy * dy + dx * dx)) / 0.3, 0.0, 1.0);
        for (std::size_t ch = 0; ch < 3; ++ch) px[ch] = (1 - a) * px[ch] + a * b.color[ch];
      }
      const bool textured = r >= ty && r < ty + th && c >= tx && c < tx + tw;
      for (std::size_t ch = 0; ch < 3; ++ch) {
        double value = px[ch];
        if (textured) value += amplitude * (2.0 * unit(rng) - 1.0);
        data[(r * width + c) * 3 + ch] = clamp_level(static_cast<int>(std::lround(value)));
      }
    }
  }
  return Image(height, width, std::move(data));
}

Image half_flat_half_noise(std::uint64_t seed, std::size_t height, std::size_t width) {
  std::mt19937_64 rng(seed);
  std::array<std::uint8_t, 3> flat;
  for (auto& v : flat) v = static_cast<std::uint8_t>(level(rng));
  std::vector<std::uint8_t> data(height * width * Image::kChannels);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      for (std::size_t ch = 0; ch < 3; ++ch) {
        data[(r * width + c) * 3 + ch] =
            c < width / 2 ? flat[ch] : static_cast<std::uint8_t>(level(rng));
      }
    }
  }
  return Image(height, width, std::move(data));
}

Image uniform_noise(std::uint64_t seed, std::size_t height, std::size_t width) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> data(height * width * Image::kChannels);
  for (auto& v : data) v = static_cast<std::uint8_t>(level(rng));
  return Image(height, width, std::move(data));
}

}  // namespace pqp
