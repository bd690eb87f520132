#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "pqp/attack.hpp"

namespace pqp {

std::vector<std::size_t> segment_low_gradient(const GradientMap& gradient, double q,
                                              SegmentScore score) {
  if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("Q must be in (0, 1]");
  const std::size_t pixels = gradient.pixel_count();
  if (pixels == 0) throw std::invalid_argument("empty gradient map");

  std::vector<double> scores(pixels);
  for (std::size_t s = 0; s < pixels; ++s) {
    const double* g = &gradient.values[s * Image::kChannels];
    double v = 0.0;
    for (std::size_t c = 0; c < Image::kChannels; ++c) {
      v = score == SegmentScore::channel_sum ? v + std::abs(g[c]) : std::max(v, std::abs(g[c]));
    }
    scores[s] = v;
  }

  // The small slack keeps e.g. 2/3 * 3 from rounding up to 3.
  auto keep = static_cast<std::size_t>(std::ceil(q * static_cast<double>(pixels) - 1e-9));
  keep = std::clamp<std::size_t>(keep, 1, pixels);

  std::vector<std::size_t> order(pixels);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto lower = [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b] || (scores[a] == scores[b] && a < b);
  };
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep - 1),
                   order.end(), lower);
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

Perturbation draw_perturbation(std::span<const std::size_t> m_low, std::size_t n, int delta,
                               std::mt19937_64& rng) {
  if (m_low.empty()) throw std::invalid_argument("cannot draw from an empty pixel set");
  if (n == 0) throw std::invalid_argument("N must be at least 1");
  if (delta <= 0) throw std::invalid_argument("delta must be a positive number of levels");

  const std::size_t count = std::min(n, m_low.size());
  std::vector<std::size_t> pool(m_low.begin(), m_low.end());
  // Partial Fisher-Yates: the first `count` slots become a uniform sample
  // without replacement.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  std::bernoulli_distribution coin(0.5);
  std::vector<PixelDelta> entries;
  entries.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    entries.push_back({pool[i], coin(rng) ? delta : -delta});
  }
  return Perturbation(std::move(entries));
}

}  // namespace pqp
