#include "pqp/image.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "pqp/errors.hpp"

namespace pqp {

Image::Image(std::size_t height, std::size_t width, std::uint8_t fill)
    : height_(height), width_(width), data_(height * width * kChannels, fill) {
  if (height == 0 || width == 0) {
    throw std::invalid_argument("image dimensions must be positive");
  }
}

Image::Image(std::size_t height, std::size_t width, std::vector<std::uint8_t> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (height == 0 || width == 0) {
    throw std::invalid_argument("image dimensions must be positive");
  }
  if (data_.size() != height * width * kChannels) {
    throw std::invalid_argument("image data length " + std::to_string(data_.size()) +
                                " does not match " + std::to_string(height) + "x" +
                                std::to_string(width) + "x3");
  }
}

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionMismatch(std::string(what) + ": images are " + std::to_string(a.height()) +
                            "x" + std::to_string(a.width()) + " and " +
                            std::to_string(b.height()) + "x" + std::to_string(b.width()));
  }
}

Perturbation::Perturbation(std::vector<PixelDelta> entries) : entries_(std::move(entries)) {
  std::unordered_set<std::size_t> seen;
  seen.reserve(entries_.size());
  for (const auto& e : entries_) {
    if (e.delta == 0) {
      throw std::invalid_argument("perturbation magnitudes must be nonzero");
    }
    if (!seen.insert(e.pixel).second) {
      throw std::invalid_argument("perturbation pixel " + std::to_string(e.pixel) +
                                  " appears twice");
    }
  }
}

Image apply_perturbation(const Image& x, const Perturbation& w, Polarity polarity) {
  const int sign = static_cast<int>(polarity);
  std::vector<std::uint8_t> out(x.data().begin(), x.data().end());
  for (const auto& e : w.entries()) {
    if (e.pixel >= x.pixel_count()) {
      throw std::out_of_range("perturbation pixel " + std::to_string(e.pixel) +
                              " outside image of " + std::to_string(x.pixel_count()) +
                              " pixels");
    }
    for (std::size_t c = 0; c < Image::kChannels; ++c) {
      auto& v = out[e.pixel * Image::kChannels + c];
      v = clamp_level(int{v} + sign * e.delta);
    }
  }
  return Image(x.height(), x.width(), std::move(out));
}

Image apply_component_deltas(const Image& x, std::span<const ComponentDelta> deltas) {
  std::vector<int> wide(x.data().begin(), x.data().end());
  for (const auto& d : deltas) {
    if (d.component >= wide.size()) {
      throw std::out_of_range("component " + std::to_string(d.component) + " outside image");
    }
    wide[d.component] += d.delta;
  }
  std::vector<std::uint8_t> out(wide.size());
  std::transform(wide.begin(), wide.end(), out.begin(), clamp_level);
  return Image(x.height(), x.width(), std::move(out));
}

}  // namespace pqp
