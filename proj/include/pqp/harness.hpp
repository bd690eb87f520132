#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pqp/attack.hpp"

namespace pqp {

enum class ScenarioKind { confidence_targeted, feature_targeted };

enum class TargetRule {
  least_confident,    ///< confidence: argmin of the clean output (1 query)
  fixed,              ///< confidence: class `fixed_target`; feature: centroid `fixed_target`
  farthest_centroid,  ///< feature: centroid farthest from F(x0) (1 query)
  seeded_centroid,    ///< feature: centroid drawn from the per-image seed (0 queries)
};

std::string_view to_string(ScenarioKind kind);
std::string_view to_string(TargetRule rule);
TargetRule target_rule_from_string(std::string_view name);

struct Scenario {
  ScenarioKind kind = ScenarioKind::confidence_targeted;
  TargetRule rule = TargetRule::least_confident;
  std::size_t fixed_target = 0;
  /// Output length; the fixed confidence rule needs it to build the one-hot
  /// target without querying.
  std::size_t classes = 0;
  double confidence_threshold = 0.9;
  double gamma = 1.0;
  /// Required for feature scenarios.
  std::optional<CentroidSet> centroids;
  /// Feature judge also requires the target to be the nearest centroid.
  bool nn_defense = true;

  void validate() const;
  /// Loss value at which the attack stops: -ln(threshold) or gamma.
  double loss_threshold() const;
};

struct TargetChoice {
  LossSpec loss;
  std::size_t index;            ///< class or centroid index
  std::uint64_t queries = 0;    ///< spent on selection, outside the attack's NQ
  std::optional<double> start;  ///< clean target confidence or distance, when observed
};

/// `seed` only matters for TargetRule::seeded_centroid.
TargetChoice select_target(Oracle& oracle, const Image& x0, const Scenario& scenario,
                           std::uint64_t seed = 0);

struct Verdict {
  bool success = false;
  double target_score = 0.0;  ///< confidence of the target, or distance to it
  std::optional<std::size_t> nearest;  ///< nearest centroid, feature scenarios
};

/// Re-queries the oracle once on `x_adv` and applies the scenario's success
/// test: target confidence > threshold and SSIM >= ssim_min, or distance <
/// gamma (and nearest centroid == target under the NN defense).
Verdict judge(Oracle& oracle, const Image& x_adv, double ssim, double ssim_min,
              const TargetChoice& target, const Scenario& scenario);

struct ImageJob {
  std::string id;
  Image image;
};

struct ImageResult {
  std::size_t index = 0;
  std::string id;
  std::uint64_t seed = 0;
  /// success, quality_fail, budget_exhausted, rejected (the attack stopped
  /// but the judge disagreed), interrupted, error.
  std::string status;
  std::uint64_t nq = 0;  ///< attack queries + the judge query
  std::uint64_t target_queries = 0;
  std::size_t target = 0;
  std::optional<double> start_score;
  std::optional<AttackResult> attack;
  std::optional<Verdict> verdict;
  std::string error;

  bool succeeded() const { return status == "success"; }
};

struct Aggregates {
  std::size_t total = 0;
  std::size_t successes = 0;
  double success_rate = 0.0;  ///< percent
  // Over successful runs only; empty when there are none.
  std::optional<double> mean_nq;
  std::optional<double> median_nq;
  std::optional<double> mean_ssim;
  std::optional<double> mean_psnr;
};

Aggregates aggregate(const std::vector<ImageResult>& results);

struct BatchReport {
  std::vector<ImageResult> results;  ///< sorted by image index
  Aggregates aggregates;
};

using OracleFactory = std::function<std::unique_ptr<Oracle>()>;

struct BatchOptions {
  AttackKind attack = AttackKind::pqp;
  PqpConfig config;  ///< config.seed is the base seed; image i uses base + i
  unsigned jobs = 1;
};

/// Attacks every image with its own oracle instance and RNG stream. Runs
/// are independent: an error on one image is recorded and the rest go on.
BatchReport run_batch(const std::vector<ImageJob>& images, const OracleFactory& make_oracle,
                      const Scenario& scenario, const BatchOptions& options);

/// Runs one image exactly as run_batch does for index `index`.
ImageResult run_one(std::size_t index, const ImageJob& job, Oracle& oracle,
                    const Scenario& scenario, const BatchOptions& options);

// Reports. CSV numbers carry 10 significant digits, JSON full precision;
// nothing depends on the clock, so equal runs give byte-identical files.

/// image_id,status,nq,ssim,psnr,seed
std::string report_csv(const BatchReport& report);
/// One result; `trace_ref` is stored as "trace" when not empty.
nlohmann::json image_result_json(const ImageResult& result, const std::string& trace_ref = "");
/// `meta` is embedded verbatim; `trace_dir` (relative) names per-image
/// trace files when traces are written.
nlohmann::json report_json(const BatchReport& report, const nlohmann::json& meta,
                           const std::string& trace_dir = "");
/// Writes report.csv, report.json and, if `traces`, traces/<id>.csv.
void write_report(const std::filesystem::path& dir, const BatchReport& report,
                  const nlohmann::json& meta, bool traces);

/// Reads a JSON array of equal-length numeric arrays.
CentroidSet load_centroids(const std::filesystem::path& path);
CentroidSet parse_centroids(const std::string& json_text);

}  // namespace pqp
