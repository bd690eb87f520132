#include "pqp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace pqp {

std::string_view to_string(ScenarioKind kind) {
  return kind == ScenarioKind::confidence_targeted ? "confidence_targeted" : "feature_targeted";
}

std::string_view to_string(TargetRule rule) {
  switch (rule) {
    case TargetRule::least_confident: return "least_confident";
    case TargetRule::fixed: return "fixed";
    case TargetRule::farthest_centroid: return "farthest_centroid";
    case TargetRule::seeded_centroid: return "seeded_centroid";
  }
  return "unknown";
}

TargetRule target_rule_from_string(std::string_view name) {
  for (auto rule : {TargetRule::least_confident, TargetRule::fixed, TargetRule::farthest_centroid,
                    TargetRule::seeded_centroid}) {
    if (to_string(rule) == name) return rule;
  }
  throw std::invalid_argument("unknown target rule '" + std::string(name) + "'");
}

void Scenario::validate() const {
  if (kind == ScenarioKind::confidence_targeted) {
    if (!(confidence_threshold > 0.0 && confidence_threshold < 1.0)) {
      throw std::invalid_argument("confidence threshold must be in (0, 1)");
    }
    if (rule != TargetRule::least_confident && rule != TargetRule::fixed) {
      throw std::invalid_argument("confidence scenarios target a class: least_confident or fixed");
    }
    if (rule == TargetRule::fixed && fixed_target >= classes) {
      throw std::invalid_argument("fixed target class needs classes > target");
    }
    return;
  }
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("gamma must be > 0");
  if (!centroids) throw std::invalid_argument("feature scenarios need a centroid set");
  if (rule == TargetRule::least_confident) {
    throw std::invalid_argument("least_confident applies to confidence scenarios only");
  }
  if (rule == TargetRule::fixed && fixed_target >= centroids->size()) {
    throw std::invalid_argument("target centroid index out of range");
  }
}

double Scenario::loss_threshold() const {
  return kind == ScenarioKind::confidence_targeted ? -std::log(confidence_threshold) : gamma;
}

TargetChoice select_target(Oracle& oracle, const Image& x0, const Scenario& scenario,
                           std::uint64_t seed) {
  scenario.validate();
  if (scenario.kind == ScenarioKind::confidence_targeted) {
    if (scenario.rule == TargetRule::fixed) {
      return {LossSpec::to_class(scenario.classes, scenario.fixed_target), scenario.fixed_target,
              0, {}};
    }
    const OutputVector y = oracle.query(x0);
    if (y.kind != OutputKind::confidence) {
      throw std::invalid_argument("least-confident targeting needs a confidence oracle");
    }
    const auto it = std::min_element(y.values.begin(), y.values.end());
    const auto t = static_cast<std::size_t>(it - y.values.begin());
    return {LossSpec::to_class(y.size(), t), t, 1, *it};
  }

  const CentroidSet& cs = *scenario.centroids;
  std::size_t t = 0;
  std::uint64_t queries = 0;
  std::optional<double> start;
  switch (scenario.rule) {
    case TargetRule::fixed:
      t = scenario.fixed_target;
      break;
    case TargetRule::seeded_centroid: {
      std::mt19937_64 rng(seed);
      t = static_cast<std::size_t>(rng() % cs.size());
      break;
    }
    case TargetRule::farthest_centroid: {
      const OutputVector f = oracle.query(x0);
      queries = 1;
      const NearestCentroid far = farthest_centroid(f, cs);
      t = far.index;
      start = far.distance;
      break;
    }
    case TargetRule::least_confident:
      break;  // rejected by validate()
  }
  return {LossSpec::to_feature(cs[t]), t, queries, start};
}

Verdict judge(Oracle& oracle, const Image& x_adv, double ssim, double ssim_min,
              const TargetChoice& target, const Scenario& scenario) {
  const OutputVector y = oracle.query(x_adv);
  Verdict v;
  if (scenario.kind == ScenarioKind::confidence_targeted) {
    if (target.index >= y.size()) throw std::invalid_argument("target class out of range");
    v.target_score = y.values[target.index];
    v.success = v.target_score > scenario.confidence_threshold && ssim >= ssim_min;
    return v;
  }
  v.target_score = euclidean_distance(y.values, target.loss.target.values);
  v.success = v.target_score < scenario.gamma;
  if (scenario.centroids) {
    const NearestCentroid nn = nn_decision(y, *scenario.centroids);
    v.nearest = nn.index;
    if (scenario.nn_defense) v.success = v.success && nn.index == target.index;
  }
  return v;
}

ImageResult run_one(std::size_t index, const ImageJob& job, Oracle& oracle,
                    const Scenario& scenario, const BatchOptions& options) {
  ImageResult r;
  r.index = index;
  r.id = job.id;
  r.seed = options.config.seed + index;
  const std::uint64_t meter_start = oracle.queries();
  try {
    TargetChoice target = select_target(oracle, job.image, scenario, r.seed);
    r.target = target.index;
    r.target_queries = target.queries;
    r.start_score = target.start;

    PqpConfig config = options.config;
    config.seed = r.seed;
    config.loss_min = scenario.loss_threshold();
    AttackResult attack = run_attack(options.attack, oracle, target.loss, job.image, config);

    r.verdict = judge(oracle, attack.adversarial, attack.final_ssim, config.ssim_min, target,
                      scenario);
    r.nq = attack.queries + 1;
    if (attack.status == AttackStatus::success) {
      r.status = r.verdict->success ? "success" : "rejected";
    } else {
      r.status = std::string(to_string(attack.status));
    }
    r.attack = std::move(attack);
    if (oracle.queries() - meter_start != r.nq + r.target_queries) {
      throw std::logic_error("query meter disagrees with the reported query count");
    }
  } catch (const AttackInterrupted& e) {
    r.status = "interrupted";
    r.attack = e.partial();
    r.nq = e.partial().queries;
    r.error = e.what();
  } catch (const std::exception& e) {
    r.status = "error";
    r.error = e.what();
  }
  return r;
}

BatchReport run_batch(const std::vector<ImageJob>& images, const OracleFactory& make_oracle,
                      const Scenario& scenario, const BatchOptions& options) {
  scenario.validate();
  options.config.validate();
  BatchReport report;
  report.results.resize(images.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < images.size(); i = next++) {
      try {
        std::unique_ptr<Oracle> oracle = make_oracle();
        report.results[i] = run_one(i, images[i], *oracle, scenario, options);
      } catch (const std::exception& e) {
        ImageResult& r = report.results[i];
        r.index = i;
        r.id = images[i].id;
        r.seed = options.config.seed + i;
        r.status = "error";
        r.error = e.what();
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(images.size())));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  report.aggregates = aggregate(report.results);
  return report;
}

Aggregates aggregate(const std::vector<ImageResult>& results) {
  Aggregates a;
  a.total = results.size();
  std::vector<double> nq;
  double ssim = 0.0;
  double psnr_sum = 0.0;
  for (const auto& r : results) {
    if (!r.succeeded()) continue;
    nq.push_back(static_cast<double>(r.nq));
    ssim += r.attack->final_ssim;
    psnr_sum += r.attack->final_psnr;
  }
  a.successes = nq.size();
  a.success_rate = a.total ? 100.0 * static_cast<double>(a.successes) / static_cast<double>(a.total) : 0.0;
  if (nq.empty()) return a;
  const auto n = static_cast<double>(nq.size());
  double total = 0.0;
  for (double v : nq) total += v;
  a.mean_nq = total / n;
  std::sort(nq.begin(), nq.end());
  const std::size_t mid = nq.size() / 2;
  a.median_nq = nq.size() % 2 ? nq[mid] : 0.5 * (nq[mid - 1] + nq[mid]);
  a.mean_ssim = ssim / n;
  a.mean_psnr = psnr_sum / n;
  return a;
}

}  // namespace pqp
