#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <vector>

#include "pqp/image.hpp"

namespace pqp {

/// Window and stabilizing constants for SSIM.
///
/// The window is separable: w(a, b) = kernel[a] * kernel[b], with an odd
/// kernel length. The default is the usual 11x11 Gaussian with sigma 1.5
/// and K1 = 0.01, K2 = 0.03 over a dynamic range of 255 levels.
struct SsimParams {
  std::vector<double> kernel = gaussian_kernel(11, 1.5);
  double dynamic_range = 255.0;
  double k1 = 0.01;
  double k2 = 0.03;

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
  std::size_t radius() const { return kernel.size() / 2; }

  /// Throws std::invalid_argument on an even/empty kernel, negative
  /// weights, weights not summing to 1 within 1e-12, or k1/k2 <= 0.
  void validate() const;

  /// Normalized 1-D Gaussian of `size` taps.
  static std::vector<double> gaussian_kernel(std::size_t size, double sigma);
  /// Normalized 1-D box of `size` taps.
  static std::vector<double> box_kernel(std::size_t size);
};

/// Real-valued field with the layout of an Image (row-major, interleaved).
struct GradientMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  double at(std::size_t row, std::size_t col, std::size_t ch) const {
    return values[(row * width + col) * Image::kChannels + ch];
  }
  std::size_t pixel_count() const { return height * width; }
};

/// Local SSIM at every component, same layout as the image. Moments are
/// taken per channel with symmetric (half-sample) boundary padding, so the
/// map covers every pixel.
std::vector<double> ssim_map(const Image& x, const Image& reference,
                             const SsimParams& params = {});

/// Mean of ssim_map over all positions and channels.
double ssim_mean(const Image& x, const Image& reference, const SsimParams& params = {});

/// Exact gradient of ssim_mean(x, reference) with respect to x, treating x
/// as real-valued and evaluating at its integer levels. Zero wherever x
/// matches the reference over the whole region of influence.
GradientMap ssim_gradient(const Image& x, const Image& reference,
                          const SsimParams& params = {});

/// Evaluates ssim_mean and ssim_gradient sharing one pass over the moments.
struct SsimWithGradient {
  double value;
  GradientMap gradient;
};
SsimWithGradient ssim_value_and_gradient(const Image& x, const Image& reference,
                                         const SsimParams& params = {});

/// SSIM of a changing image against a fixed reference, with its gradient.
/// update() recomputes only the entries a small change can reach (a
/// (2 * kernel - 1)-wide square per changed component) and falls back to a
/// full pass for larger changes. Either way the results are bit-identical
/// to ssim_mean / ssim_gradient on the same image.
class SsimTracker {
 public:
  /// Changes beyond this many components trigger a full recomputation.
  static constexpr std::size_t kLocalLimit = 12;

  SsimTracker(const Image& x, const Image& reference, const SsimParams& params = {},
              bool with_gradient = true);
  ~SsimTracker();
  SsimTracker(SsimTracker&&) noexcept;
  SsimTracker& operator=(SsimTracker&&) noexcept;

  void update(const Image& x);
  void reset(const Image& x);

  double value() const;
  const std::vector<double>& map() const;
  /// Throws std::logic_error if built without gradient.
  const GradientMap& gradient() const;
  const Image& current() const;
  const Image& reference() const;

 private:
  struct State;
  std::unique_ptr<State> state_;
};

/// 20 log10(255 / RMSE) over all components; +infinity for identical images.
double psnr(const Image& x, const Image& reference);

/// Text dump: a header line "pqp-gradient <height> <width> 3" followed by
/// one value per line in component order (row-major, channel-interleaved),
/// printed with 17 significant digits.
void write_gradient_dump(std::ostream& out, const GradientMap& gradient);

}  // namespace pqp
