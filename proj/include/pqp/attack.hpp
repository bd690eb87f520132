#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pqp/image.hpp"
#include "pqp/loss.hpp"
#include "pqp/oracle.hpp"
#include "pqp/ssim.hpp"

namespace pqp {

/// How Segment ranks pixels from the per-component SSIM gradient.
enum class SegmentScore {
  channel_sum,  ///< sum over channels of |G(s, c)|
  channel_max,  ///< max over channels of |G(s, c)|
};

/// Parameters of the perceptual-quality-preserving attack. Defaults are
/// Q = 66%, N = 20, delta = 1, k_max = 20, SSIM floor 0.95 and a loss
/// threshold of -ln 0.9 (target confidence 0.9).
struct PqpConfig {
  double q = 0.66;
  std::size_t n = 20;
  int delta = 1;
  std::size_t k_max = 20;
  double ssim_min = 0.95;
  double loss_min = 0.10536051565782628;
  std::uint64_t max_queries = 500000;
  std::uint64_t seed = 0;
  SegmentScore segment_score = SegmentScore::channel_sum;
  SsimParams ssim;

  void validate() const;
};

enum class AttackStatus {
  success,
  quality_fail,
  budget_exhausted,
  interrupted,  ///< only in the partial result carried by AttackInterrupted
};

std::string_view to_string(AttackStatus status);

/// One accepted step.
struct TraceStep {
  std::size_t step;
  std::uint64_t queries;  ///< queries used when the step was accepted
  double loss;
  double ssim;
  bool forced;  ///< accepted without improving the loss
};

struct AttackResult {
  AttackStatus status;
  Image adversarial;
  std::uint64_t queries = 0;
  std::uint64_t proposals = 0;  ///< perturbation pairs submitted
  double final_loss = 0.0;
  double final_ssim = 1.0;
  double final_psnr = 0.0;
  std::vector<TraceStep> trace;
};

/// An oracle failure stopped the attack; `partial()` holds what was done.
class AttackInterrupted : public std::runtime_error {
 public:
  AttackInterrupted(const std::string& what, AttackResult partial, bool transport)
      : std::runtime_error(what), partial_(std::move(partial)), transport_(transport) {}

  const AttackResult& partial() const noexcept { return partial_; }
  /// True when the cause was a (retryable) transport failure.
  bool transport_failure() const noexcept { return transport_; }

 private:
  AttackResult partial_;
  bool transport_;
};

/// The ceil(q * H * W) pixels with the lowest score, ties broken by pixel
/// index. Returned in increasing pixel order.
std::vector<std::size_t> segment_low_gradient(const GradientMap& gradient, double q,
                                              SegmentScore score = SegmentScore::channel_sum);

/// min(n, |m_low|) distinct pixels drawn uniformly from `m_low`, each with an
/// independent sign, magnitude `delta` on all three channels.
Perturbation draw_perturbation(std::span<const std::size_t> m_low, std::size_t n, int delta,
                               std::mt19937_64& rng);

/// Called for every proposal pqp_attack submits; used by tests.
struct ProposalEvent {
  std::span<const std::size_t> m_low;
  const Perturbation& perturbation;
  const Image& plus;
  const Image& minus;
};
using ProposalObserver = std::function<void(const ProposalEvent&)>;

/// Perturbs low-SSIM-gradient pixels with random color-coherent +-delta
/// patterns, querying both polarities and keeping the better one, until the
/// loss reaches `loss_min`, SSIM falls below `ssim_min`, or the query budget
/// runs out. After k_max non-improving proposals the better polarity of the
/// last one is accepted anyway. Queries used = 1 + 2 * proposals.
AttackResult pqp_attack(Oracle& oracle, const LossSpec& loss_spec, const Image& x0,
                        const PqpConfig& config, const ProposalObserver& observer = {});

/// Deterministic single-component variant: each step moves the component
/// with the smallest |G| by +-1, keeping the better polarity. Stops with
/// budget_exhausted after k_max consecutive non-improving steps.
AttackResult naive_pqp_attack(Oracle& oracle, const LossSpec& loss_spec, const Image& x0,
                              const PqpConfig& config);

/// Component that naive_pqp_attack perturbs for gradient `g`: argmin |G|,
/// ties by component index.
std::size_t naive_component(const GradientMap& gradient);

/// Iterative finite differences: a full central-difference gradient
/// estimate (2 queries per component), then x <- clamp(x - step * sign(g)),
/// then one query at the new point.
struct IfdConfig {
  int epsilon = 1;
  int step = 1;
  double ssim_min = 0.95;
  double loss_min = 0.10536051565782628;
  std::uint64_t max_queries = 500000;
  std::size_t stall_limit = 20;  ///< consecutive non-improving iterations
  SsimParams ssim;

  static IfdConfig from(const PqpConfig& config);
  void validate() const;
};

AttackResult ifd_attack(Oracle& oracle, const LossSpec& loss_spec, const Image& x0,
                        const IfdConfig& config);

enum class AttackKind { pqp, naive, ifd };
std::string_view to_string(AttackKind kind);
AttackKind attack_kind_from_string(std::string_view name);

/// Dispatches on `kind`; IFD takes its thresholds, budget and stall limit
/// (k_max) from `config`.
AttackResult run_attack(AttackKind kind, Oracle& oracle, const LossSpec& loss_spec,
                        const Image& x0, const PqpConfig& config);

}  // namespace pqp
