#include "pqp/attack.hpp"

#include <cmath>
#include <limits>
#include <optional>

#include "pqp/errors.hpp"

namespace pqp {

void PqpConfig::validate() const {
  if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("Q must be in (0, 1]");
  if (n < 1) throw std::invalid_argument("N must be at least 1");
  if (delta < 1) throw std::invalid_argument("delta must be at least 1 level");
  if (k_max < 1) throw std::invalid_argument("k_max must be at least 1");
  if (!(ssim_min > 0.0 && ssim_min < 1.0)) throw std::invalid_argument("SSIM floor must be in (0, 1)");
  if (!std::isfinite(loss_min)) throw std::invalid_argument("loss threshold must be finite");
  if (max_queries < 2) throw std::invalid_argument("query budget must be at least 2");
  ssim.validate();
}

void IfdConfig::validate() const {
  if (epsilon < 1) throw std::invalid_argument("IFD epsilon must be at least 1 level");
  if (step < 1) throw std::invalid_argument("IFD step must be at least 1 level");
  if (!(ssim_min > 0.0 && ssim_min < 1.0)) throw std::invalid_argument("SSIM floor must be in (0, 1)");
  if (!std::isfinite(loss_min)) throw std::invalid_argument("loss threshold must be finite");
  if (max_queries < 2) throw std::invalid_argument("query budget must be at least 2");
  if (stall_limit < 1) throw std::invalid_argument("stall limit must be at least 1");
  ssim.validate();
}

IfdConfig IfdConfig::from(const PqpConfig& config) {
  IfdConfig c;
  c.ssim_min = config.ssim_min;
  c.loss_min = config.loss_min;
  c.max_queries = config.max_queries;
  c.stall_limit = config.k_max;
  c.ssim = config.ssim;
  return c;
}

std::string_view to_string(AttackStatus status) {
  switch (status) {
    case AttackStatus::success: return "success";
    case AttackStatus::quality_fail: return "quality_fail";
    case AttackStatus::budget_exhausted: return "budget_exhausted";
    case AttackStatus::interrupted: return "interrupted";
  }
  return "unknown";
}

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::pqp: return "pqp";
    case AttackKind::naive: return "naive";
    case AttackKind::ifd: return "ifd";
  }
  return "unknown";
}

AttackKind attack_kind_from_string(std::string_view name) {
  if (name == "pqp") return AttackKind::pqp;
  if (name == "naive") return AttackKind::naive;
  if (name == "ifd") return AttackKind::ifd;
  throw std::invalid_argument("unknown attack '" + std::string(name) + "'");
}

namespace {

// Bookkeeping shared by the three attacks: the current iterate, the query
// ledger and the trace.
class Run {
 public:
  Run(Oracle& oracle, const LossSpec& spec, const Image& x0, std::uint64_t budget,
      const SsimParams& ssim)
      : oracle_(oracle), spec_(spec), x0_(x0), budget_(budget), ssim_(ssim), x_(x0) {
    const InputDims dims = oracle.input_dims();
    if (dims.height != x0.height() || dims.width != x0.width()) {
      throw DimensionMismatch("attack: oracle expects " + std::to_string(dims.height) + "x" +
                              std::to_string(dims.width) + " images");
    }
  }

  double evaluate(const Image& x) {
    OutputVector y = oracle_.query(x);
    ++queries_;
    return loss(spec_, y);
  }

  bool can_afford(std::uint64_t n) const { return queries_ + n <= budget_; }
  std::uint64_t queries() const { return queries_; }

  const Image& x() const { return x_; }
  const Image& x0() const { return x0_; }
  const SsimParams& ssim_params() const { return ssim_; }

  void start() {
    loss_ = evaluate(x0_);
    ssim_value_ = 1.0;
  }

  void accept(Image x, double new_loss, double new_ssim, bool forced) {
    x_ = std::move(x);
    loss_ = new_loss;
    ssim_value_ = new_ssim;
    trace_.push_back({trace_.size() + 1, queries_, loss_, ssim_value_, forced});
  }

  double loss_value() const { return loss_; }
  double ssim_value() const { return ssim_value_; }

  void count_proposal() { ++proposals_; }
  // Queries issued through helpers that talk to the oracle directly.
  void count_external_queries(std::uint64_t n) { queries_ += n; }

  AttackResult finish(AttackStatus status) const {
    return AttackResult{status,       x_,          queries_, proposals_, loss_,
                        ssim_value_,  psnr(x_, x0_), trace_};
  }

  // Entry and loop guard shared by every attack.
  std::optional<AttackStatus> stop_reason(double ssim_min, double loss_min,
                                          std::uint64_t next_cost) const {
    if (ssim_value_ < ssim_min) return AttackStatus::quality_fail;
    if (loss_ <= loss_min) return AttackStatus::success;
    if (!can_afford(next_cost)) return AttackStatus::budget_exhausted;
    return std::nullopt;
  }

 private:
  Oracle& oracle_;
  const LossSpec& spec_;
  const Image& x0_;
  std::uint64_t budget_;
  const SsimParams& ssim_;
  Image x_;
  double loss_ = 0.0;
  double ssim_value_ = 1.0;
  std::uint64_t queries_ = 0;
  std::uint64_t proposals_ = 0;
  std::vector<TraceStep> trace_;
};

// Runs `body`, converting oracle failures into AttackInterrupted with the
// partial run attached.
template <typename Body>
AttackResult guarded(Run& run, Body&& body) {
  try {
    return body();
  } catch (const TransportError& e) {
    throw AttackInterrupted(e.what(), run.finish(AttackStatus::interrupted), true);
  } catch (const ProtocolError& e) {
    throw AttackInterrupted(e.what(), run.finish(AttackStatus::interrupted), false);
  }
}

}  // namespace

AttackResult pqp_attack(Oracle& oracle, const LossSpec& loss_spec, const Image& x0,
                        const PqpConfig& config, const ProposalObserver& observer) {
  config.validate();
  loss_spec.validate();
  Run run(oracle, loss_spec, x0, config.max_queries, config.ssim);
  std::mt19937_64 rng(config.seed);

  return guarded(run, [&]() -> AttackResult {
    run.start();
    SsimTracker tracker(x0, x0, config.ssim);
    for (;;) {
      if (auto stop = run.stop_reason(config.ssim_min, config.loss_min, 2)) {
        return run.finish(*stop);
      }
      const auto m_low = segment_low_gradient(tracker.gradient(), config.q, config.segment_score);

      // Inner loop: propose until a polarity lowers the loss or k_max
      // proposals have been tried; the better polarity of the last proposal
      // is taken either way.
      std::size_t k = 0;
      double delta_loss = 0.0;
      std::optional<Image> best;
      double best_loss = 0.0;
      while (k < config.k_max && delta_loss >= 0.0) {
        if (!run.can_afford(2)) return run.finish(AttackStatus::budget_exhausted);
        const Perturbation w = draw_perturbation(m_low, config.n, config.delta, rng);
        Image plus = apply_perturbation(run.x(), w, Polarity::positive);
        Image minus = apply_perturbation(run.x(), w, Polarity::negative);
        if (observer) observer(ProposalEvent{m_low, w, plus, minus});
        run.count_proposal();
        const double l_plus = run.evaluate(plus);
        const double l_minus = run.evaluate(minus);
        delta_loss = std::min(l_plus, l_minus) - run.loss_value();
        ++k;
        if (l_plus < l_minus) {
          best = std::move(plus);
          best_loss = l_plus;
        } else {
          best = std::move(minus);
          best_loss = l_minus;
        }
      }

      tracker.update(*best);
      run.accept(std::move(*best), best_loss, tracker.value(), delta_loss >= 0.0);
    }
  });
}

std::size_t naive_component(const GradientMap& gradient) {
  std::size_t best = 0;
  double best_abs = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < gradient.values.size(); ++i) {
    const double a = std::abs(gradient.values[i]);
    if (a < best_abs) {
      best_abs = a;
      best = i;
    }
  }
  return best;
}

AttackResult naive_pqp_attack(Oracle& oracle, const LossSpec& loss_spec, const Image& x0,
                              const PqpConfig& config) {
  config.validate();
  loss_spec.validate();
  Run run(oracle, loss_spec, x0, config.max_queries, config.ssim);

  return guarded(run, [&]() -> AttackResult {
    run.start();
    SsimTracker tracker(x0, x0, config.ssim);
    std::size_t stalled = 0;
    for (;;) {
      if (auto stop = run.stop_reason(config.ssim_min, config.loss_min, 2)) {
        return run.finish(*stop);
      }
      const std::size_t component = naive_component(tracker.gradient());
      const ComponentDelta up{component, 1};
      const ComponentDelta down{component, -1};
      Image plus = apply_component_deltas(run.x(), std::span(&up, 1));
      Image minus = apply_component_deltas(run.x(), std::span(&down, 1));
      run.count_proposal();
      const double l_plus = run.evaluate(plus);
      const double l_minus = run.evaluate(minus);
      const bool take_plus = l_plus < l_minus;
      const double new_loss = take_plus ? l_plus : l_minus;
      const bool improved = new_loss < run.loss_value();
      stalled = improved ? 0 : stalled + 1;

      Image next = take_plus ? std::move(plus) : std::move(minus);
      tracker.update(next);
      run.accept(std::move(next), new_loss, tracker.value(), !improved);
      if (stalled >= config.k_max && !run.stop_reason(config.ssim_min, config.loss_min, 0)) {
        return run.finish(AttackStatus::budget_exhausted);
      }
    }
  });
}

AttackResult ifd_attack(Oracle& oracle, const LossSpec& loss_spec, const Image& x0,
                        const IfdConfig& config) {
  config.validate();
  loss_spec.validate();
  Run run(oracle, loss_spec, x0, config.max_queries, config.ssim);
  const std::size_t components = x0.component_count();

  return guarded(run, [&]() -> AttackResult {
    run.start();
    SsimTracker tracker(x0, x0, config.ssim, false);
    std::size_t stalled = 0;
    std::vector<ComponentDelta> steps;
    for (;;) {
      if (auto stop = run.stop_reason(config.ssim_min, config.loss_min, 2 * components + 1)) {
        return run.finish(*stop);
      }
      steps.clear();
      for (std::size_t i = 0; i < components; ++i) {
        const DirectionTerm basis{i, 1};
        run.count_proposal();
        const double g = directional_derivative(oracle, loss_spec, run.x(), std::span(&basis, 1),
                                                config.epsilon);
        run.count_external_queries(2);
        if (g > 0.0) steps.push_back({i, -config.step});
        if (g < 0.0) steps.push_back({i, config.step});
      }
      Image next = apply_component_deltas(run.x(), steps);
      if (next == run.x()) {
        // Zero or fully clamped gradient: nothing can move.
        return run.finish(AttackStatus::budget_exhausted);
      }
      const double new_loss = run.evaluate(next);
      const bool improved = new_loss < run.loss_value();
      stalled = improved ? 0 : stalled + 1;
      tracker.update(next);
      run.accept(std::move(next), new_loss, tracker.value(), !improved);
      if (stalled >= config.stall_limit && !run.stop_reason(config.ssim_min, config.loss_min, 0)) {
        return run.finish(AttackStatus::budget_exhausted);
      }
    }
  });
}

AttackResult run_attack(AttackKind kind, Oracle& oracle, const LossSpec& loss_spec,
                        const Image& x0, const PqpConfig& config) {
  switch (kind) {
    case AttackKind::pqp: return pqp_attack(oracle, loss_spec, x0, config);
    case AttackKind::naive: return naive_pqp_attack(oracle, loss_spec, x0, config);
    case AttackKind::ifd: return ifd_attack(oracle, loss_spec, x0, IfdConfig::from(config));
  }
  throw std::invalid_argument("unknown attack kind");
}

}  // namespace pqp
