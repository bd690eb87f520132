#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pqp {

/// An RGB image with 8-bit integer levels.
///
/// Storage is row-major and channel-interleaved: component (row, col, ch)
/// lives at `(row * width + col) * 3 + ch`. Throughout the library a *pixel
/// index* is `row * width + col` and a *component index* is
/// `pixel * 3 + ch`. Images are immutable once built; every operation that
/// changes pixels returns a new Image.
class Image {
 public:
  static constexpr std::size_t kChannels = 3;

  Image(std::size_t height, std::size_t width, std::uint8_t fill = 0);
  Image(std::size_t height, std::size_t width, std::vector<std::uint8_t> data);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t pixel_count() const noexcept { return height_ * width_; }
  std::size_t component_count() const noexcept { return data_.size(); }

  std::uint8_t at(std::size_t row, std::size_t col, std::size_t ch) const {
    return data_[(row * width_ + col) * kChannels + ch];
  }
  std::uint8_t operator[](std::size_t component) const { return data_[component]; }

  std::span<const std::uint8_t> data() const noexcept { return data_; }

  bool same_shape(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  bool operator==(const Image&) const = default;

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<std::uint8_t> data_;
};

/// Throws DimensionMismatch unless `a` and `b` have equal height and width.
void require_same_shape(const Image& a, const Image& b, const char* what);

/// One entry of a color-coherent perturbation: every channel of `pixel`
/// moves by `delta` levels.
struct PixelDelta {
  std::size_t pixel;
  int delta;
};

/// Sparse color-coherent perturbation. Pixels are distinct and deltas are
/// nonzero; bounds are checked against an image when applied.
class Perturbation {
 public:
  Perturbation() = default;
  explicit Perturbation(std::vector<PixelDelta> entries);

  std::span<const PixelDelta> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

 private:
  std::vector<PixelDelta> entries_;
};

enum class Polarity : int { positive = 1, negative = -1 };

/// result(s, c) = clamp(x(s, c) + polarity * w(s), 0, 255) for every
/// perturbed pixel s and all channels c. Throws std::out_of_range if an
/// entry is outside `x`.
Image apply_perturbation(const Image& x, const Perturbation& w, Polarity polarity);

/// Single-component offset used by component-wise attacks and probes.
struct ComponentDelta {
  std::size_t component;
  int delta;
};

/// Adds each delta to its component with clamping to [0, 255]. Repeated
/// components accumulate before clamping. Throws std::out_of_range.
Image apply_component_deltas(const Image& x, std::span<const ComponentDelta> deltas);

inline std::uint8_t clamp_level(int value) noexcept {
  return static_cast<std::uint8_t>(value < 0 ? 0 : (value > 255 ? 255 : value));
}

}  // namespace pqp
