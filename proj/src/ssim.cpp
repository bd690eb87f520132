#include "pqp/ssim.hpp"

#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "pqp/errors.hpp"

namespace pqp {

void SsimParams::validate() const {
  if (kernel.empty() || kernel.size() % 2 == 0) {
    throw std::invalid_argument("SSIM kernel length must be odd");
  }
  double sum = 0.0;
  for (double w : kernel) {
    if (!(w >= 0.0)) throw std::invalid_argument("SSIM kernel weights must be nonnegative");
    sum += w;
  }
  // The 2-D window sums to sum^2.
  if (std::abs(sum * sum - 1.0) > 1e-12) {
    throw std::invalid_argument("SSIM window weights must sum to 1");
  }
  if (!(k1 > 0.0) || !(k2 > 0.0) || !(dynamic_range > 0.0)) {
    throw std::invalid_argument("SSIM constants must be positive");
  }
}

std::vector<double> SsimParams::gaussian_kernel(std::size_t size, double sigma) {
  if (size == 0 || size % 2 == 0 || !(sigma > 0.0)) {
    throw std::invalid_argument("gaussian kernel needs odd size and sigma > 0");
  }
  std::vector<double> k(size);
  const double center = static_cast<double>(size / 2);
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - center;
    k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
  }
  const double sum = std::accumulate(k.begin(), k.end(), 0.0);
  for (double& v : k) v /= sum;
  return k;
}

std::vector<double> SsimParams::box_kernel(std::size_t size) {
  if (size == 0 || size % 2 == 0) throw std::invalid_argument("box kernel needs odd size");
  return std::vector<double>(size, 1.0 / static_cast<double>(size));
}

namespace {

// Half-sample symmetric reflection: ... 1 0 | 0 1 ... n-1 | n-1 n-2 ...
// Works for any offset, including windows wider than the image.
std::size_t reflect(std::ptrdiff_t i, std::ptrdiff_t n) {
  const std::ptrdiff_t period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < n ? i : period - 1 - i);
}

// Tap table: taps[pos * K + k] is the source index for output `pos`, tap k.
std::vector<std::size_t> tap_table(std::size_t n, std::size_t ktaps) {
  const auto radius = static_cast<std::ptrdiff_t>(ktaps / 2);
  std::vector<std::size_t> taps(n * ktaps);
  for (std::size_t pos = 0; pos < n; ++pos) {
    for (std::size_t k = 0; k < ktaps; ++k) {
      taps[pos * ktaps + k] = reflect(static_cast<std::ptrdiff_t>(pos + k) - radius,
                                      static_cast<std::ptrdiff_t>(n));
    }
  }
  return taps;
}

struct Use {
  std::size_t pos;
  std::size_t k;
};

// One image dimension: forward taps, their inverse (who reads index j, in
// (pos, k) order), and the index sets a change at j reaches.
struct Axis {
  std::size_t n = 0;
  std::size_t kt = 0;
  std::vector<std::size_t> taps;
  std::vector<std::vector<Use>> readers;
  std::vector<std::vector<std::size_t>> users;  // outputs reading j
  std::vector<std::vector<std::size_t>> reach;  // adjoint outputs fed by users[j]

  Axis(std::size_t size, std::size_t ktaps) : n(size), kt(ktaps), taps(tap_table(size, ktaps)) {
    readers.resize(n);
    for (std::size_t pos = 0; pos < n; ++pos) {
      for (std::size_t k = 0; k < kt; ++k) readers[taps[pos * kt + k]].push_back({pos, k});
    }
    users.resize(n);
    reach.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<bool> u(n, false), r(n, false);
      for (const Use& use : readers[j]) u[use.pos] = true;
      for (std::size_t pos = 0; pos < n; ++pos) {
        if (!u[pos]) continue;
        users[j].push_back(pos);
        for (std::size_t k = 0; k < kt; ++k) r[taps[pos * kt + k]] = true;
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (r[i]) reach[j].push_back(i);
      }
    }
  }
};

// Windowed weighted sums over single-channel planes with symmetric padding,
// and the adjoint. Every output entry is computed by one function in a fixed
// order, so a partial recomputation gives bit-identical values to a full one.
struct Window {
  const std::vector<double>& kernel;
  std::size_t w;
  const Axis& rows;
  const Axis& cols;

  // Horizontal pass of the forward filter.
  double fwd_h(const std::vector<double>& in, std::size_t r, std::size_t c) const {
    const std::size_t* taps = &cols.taps[c * cols.kt];
    double acc = 0.0;
    for (std::size_t k = 0; k < cols.kt; ++k) acc += kernel[k] * in[r * w + taps[k]];
    return acc;
  }
  // Vertical pass of the forward filter over the horizontal result.
  double fwd_v(const std::vector<double>& h, std::size_t r, std::size_t c) const {
    const std::size_t* taps = &rows.taps[r * rows.kt];
    double acc = 0.0;
    for (std::size_t k = 0; k < rows.kt; ++k) acc += kernel[k] * h[taps[k] * w + c];
    return acc;
  }
  double adj_v(const std::vector<double>& in, std::size_t r, std::size_t c) const {
    double acc = 0.0;
    for (const Use& u : rows.readers[r]) acc += kernel[u.k] * in[u.pos * w + c];
    return acc;
  }
  double adj_h(const std::vector<double>& v, std::size_t r, std::size_t c) const {
    double acc = 0.0;
    for (const Use& u : cols.readers[c]) acc += kernel[u.k] * v[r * w + u.pos];
    return acc;
  }
};

// Moments of x that depend on the iterate, one plane each.
enum Plane { kX, kXX, kXY, kPlanes };

struct ChannelState {
  std::vector<double> px, py, mu_y, m_yy;
  std::array<std::vector<double>, kPlanes> src, hpass, moment;
  std::array<std::vector<double>, kPlanes> coef, vpass, back;  // da/db/dc chain
};

}  // namespace

struct SsimTracker::State {
  SsimParams params;
  std::size_t h, w;
  Axis rows, cols;
  Window win;
  Image reference;
  Image current;
  std::array<ChannelState, Image::kChannels> ch;
  std::vector<double> map;
  GradientMap gradient;
  bool with_gradient;

  State(const Image& ref, const SsimParams& p, bool grad)
      : params(p), h(ref.height()), w(ref.width()),
        rows(h, params.kernel.size()), cols(w, params.kernel.size()),
        win{params.kernel, w, rows, cols}, reference(ref), current(ref), with_gradient(grad) {}

  void source(std::size_t c, std::size_t p) {
    ChannelState& s = ch[c];
    s.src[kX][p] = s.px[p];
    s.src[kXX][p] = s.px[p] * s.px[p];
    s.src[kXY][p] = s.px[p] * s.py[p];
  }

  void local(std::size_t c, std::size_t r, std::size_t col) {
    ChannelState& s = ch[c];
    const std::size_t p = r * w + col;
    const double c1 = params.c1();
    const double c2 = params.c2();
    const double mx = s.moment[kX][p];
    const double my = s.mu_y[p];
    const double var_x = s.moment[kXX][p] - mx * mx;
    const double var_y = s.m_yy[p] - my * my;
    const double cov = s.moment[kXY][p] - mx * my;
    const double a1 = 2.0 * (mx * my) + c1;
    const double b1 = mx * mx + my * my + c1;
    const double a2 = 2.0 * cov + c2;
    const double b2 = var_x + var_y + c2;
    const double r1 = a1 / b1;
    const double r2 = a2 / b2;
    const double v = r1 * r2;
    map[p * Image::kChannels + c] = v;
    if (!with_gradient) return;
    // Partials of the local SSIM with respect to the local moments of x,
    // written so that they cancel exactly where the windows of x and y
    // coincide.
    const double d_mu = 2.0 * r2 * (my - mx * r1) / b1;
    const double d_var = -v / b2;
    const double d_cov = 2.0 * r1 / b2;
    // var_x = E[x^2] - mu_x^2 and cov = E[xy] - mu_x mu_y fold the mean
    // terms into the coefficient of E[x].
    s.coef[kX][p] = d_mu - (2.0 * d_var) * mx - d_cov * my;
    s.coef[kXX][p] = d_var;
    s.coef[kXY][p] = d_cov;
  }

  void grad(std::size_t c, std::size_t p) {
    ChannelState& s = ch[c];
    const double scale = 1.0 / static_cast<double>(h * w * Image::kChannels);
    const double g = s.back[kX][p] + (2.0 * s.px[p]) * s.back[kXX][p] + s.py[p] * s.back[kXY][p];
    gradient.values[p * Image::kChannels + c] = g * scale;
  }

  void full(const Image& x) {
    const std::size_t n = h * w;
    current = x;
    map.assign(n * Image::kChannels, 0.0);
    gradient.height = h;
    gradient.width = w;
    gradient.values.assign(with_gradient ? n * Image::kChannels : 0, 0.0);
    for (std::size_t c = 0; c < Image::kChannels; ++c) {
      ChannelState& s = ch[c];
      s.px.resize(n);
      s.py.resize(n);
      for (std::size_t p = 0; p < n; ++p) {
        s.px[p] = x[p * Image::kChannels + c];
        s.py[p] = reference[p * Image::kChannels + c];
      }
      if (s.mu_y.empty()) {
        std::vector<double> yy(n), hp(n);
        for (std::size_t p = 0; p < n; ++p) yy[p] = s.py[p] * s.py[p];
        s.mu_y.resize(n);
        s.m_yy.resize(n);
        filter(s.py, hp, s.mu_y);
        filter(yy, hp, s.m_yy);
      }
      for (int k = 0; k < kPlanes; ++k) {
        s.src[k].resize(n);
        s.hpass[k].resize(n);
        s.moment[k].resize(n);
        s.coef[k].resize(n);
        s.vpass[k].resize(n);
        s.back[k].resize(n);
      }
      for (std::size_t p = 0; p < n; ++p) source(c, p);
      for (int k = 0; k < kPlanes; ++k) filter(s.src[k], s.hpass[k], s.moment[k]);
      for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t col = 0; col < w; ++col) local(c, r, col);
      }
      if (!with_gradient) continue;
      for (int k = 0; k < kPlanes; ++k) {
        for (std::size_t r = 0; r < h; ++r) {
          for (std::size_t col = 0; col < w; ++col) s.vpass[k][r * w + col] = win.adj_v(s.coef[k], r, col);
        }
        for (std::size_t r = 0; r < h; ++r) {
          for (std::size_t col = 0; col < w; ++col) s.back[k][r * w + col] = win.adj_h(s.vpass[k], r, col);
        }
      }
      for (std::size_t p = 0; p < n; ++p) grad(c, p);
    }
  }

  void filter(const std::vector<double>& in, std::vector<double>& hp, std::vector<double>& out) {
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) hp[r * w + c] = win.fwd_h(in, r, c);
    }
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) out[r * w + c] = win.fwd_v(hp, r, c);
    }
  }

  // Recomputes everything downstream of component (r, col, c) after its
  // level changed.
  void touch(std::size_t r, std::size_t col, std::size_t c) {
    ChannelState& s = ch[c];
    const std::size_t p = r * w + col;
    s.px[p] = current[p * Image::kChannels + c];
    source(c, p);
    const auto& out_rows = rows.users[r];
    const auto& out_cols = cols.users[col];
    for (int k = 0; k < kPlanes; ++k) {
      for (std::size_t oc : out_cols) s.hpass[k][r * w + oc] = win.fwd_h(s.src[k], r, oc);
      for (std::size_t orow : out_rows) {
        for (std::size_t oc : out_cols) s.moment[k][orow * w + oc] = win.fwd_v(s.hpass[k], orow, oc);
      }
    }
    for (std::size_t orow : out_rows) {
      for (std::size_t oc : out_cols) local(c, orow, oc);
    }
    if (!with_gradient) return;
    const auto& back_rows = rows.reach[r];
    const auto& back_cols = cols.reach[col];
    for (int k = 0; k < kPlanes; ++k) {
      for (std::size_t br : back_rows) {
        for (std::size_t oc : out_cols) s.vpass[k][br * w + oc] = win.adj_v(s.coef[k], br, oc);
      }
      for (std::size_t br : back_rows) {
        for (std::size_t bc : back_cols) s.back[k][br * w + bc] = win.adj_h(s.vpass[k], br, bc);
      }
    }
    for (std::size_t br : back_rows) {
      for (std::size_t bc : back_cols) grad(c, br * w + bc);
    }
  }
};

namespace {

double mean_of(const std::vector<double>& v) {
  double sum = 0.0;
  for (double e : v) sum += e;
  return sum / static_cast<double>(v.size());
}

}  // namespace

SsimTracker::SsimTracker(const Image& x, const Image& reference, const SsimParams& params,
                         bool with_gradient) {
  require_same_shape(x, reference, "ssim");
  params.validate();
  state_ = std::make_unique<State>(reference, params, with_gradient);
  state_->full(x);
}

SsimTracker::~SsimTracker() = default;
SsimTracker::SsimTracker(SsimTracker&&) noexcept = default;
SsimTracker& SsimTracker::operator=(SsimTracker&&) noexcept = default;

void SsimTracker::reset(const Image& x) {
  require_same_shape(x, state_->reference, "ssim");
  state_->full(x);
}

void SsimTracker::update(const Image& x) {
  require_same_shape(x, state_->reference, "ssim");
  State& st = *state_;
  const auto now = st.current.data();
  const auto next = x.data();
  std::vector<std::size_t> changed;
  for (std::size_t i = 0; i < next.size(); ++i) {
    if (now[i] != next[i]) {
      changed.push_back(i);
      if (changed.size() > kLocalLimit) {
        st.full(x);
        return;
      }
    }
  }
  st.current = x;
  for (std::size_t i : changed) {
    const std::size_t p = i / Image::kChannels;
    st.touch(p / st.w, p % st.w, i % Image::kChannels);
  }
}

double SsimTracker::value() const { return mean_of(state_->map); }
const std::vector<double>& SsimTracker::map() const { return state_->map; }
const GradientMap& SsimTracker::gradient() const {
  if (!state_->with_gradient) throw std::logic_error("tracker built without gradient");
  return state_->gradient;
}
const Image& SsimTracker::current() const { return state_->current; }
const Image& SsimTracker::reference() const { return state_->reference; }

std::vector<double> ssim_map(const Image& x, const Image& reference, const SsimParams& params) {
  return SsimTracker(x, reference, params, false).map();
}

double ssim_mean(const Image& x, const Image& reference, const SsimParams& params) {
  return SsimTracker(x, reference, params, false).value();
}

GradientMap ssim_gradient(const Image& x, const Image& reference, const SsimParams& params) {
  return ssim_value_and_gradient(x, reference, params).gradient;
}

SsimWithGradient ssim_value_and_gradient(const Image& x, const Image& reference,
                                         const SsimParams& params) {
  SsimTracker t(x, reference, params);
  return {t.value(), t.gradient()};
}

double psnr(const Image& x, const Image& reference) {
  require_same_shape(x, reference, "psnr");
  const auto a = x.data();
  const auto b = reference.data();
  std::uint64_t sse = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const int d = int{a[i]} - int{b[i]};
    sse += static_cast<std::uint64_t>(d * d);
  }
  if (sse == 0) return std::numeric_limits<double>::infinity();
  const double mse = static_cast<double>(sse) / static_cast<double>(a.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

void write_gradient_dump(std::ostream& out, const GradientMap& gradient) {
  out << "pqp-gradient " << gradient.height << ' ' << gradient.width << " 3\n";
  out << std::setprecision(17);
  for (double v : gradient.values) out << v << '\n';
}

}  // namespace pqp
