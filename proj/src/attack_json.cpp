#include "pqp/attack_json.hpp"

#include <cmath>
#include <cstdio>

namespace pqp {

nlohmann::json number_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

nlohmann::json config_json(const PqpConfig& config) {
  return {
      {"q", config.q},
      {"n", config.n},
      {"delta", config.delta},
      {"k_max", config.k_max},
      {"ssim_min", config.ssim_min},
      {"loss_min", config.loss_min},
      {"max_queries", config.max_queries},
      {"seed", config.seed},
      {"segment_score",
       config.segment_score == SegmentScore::channel_sum ? "channel_sum" : "channel_max"},
  };
}

nlohmann::json result_json(const AttackResult& result) {
  std::size_t forced = 0;
  for (const auto& t : result.trace) forced += t.forced ? 1 : 0;
  return {
      {"status", std::string(to_string(result.status))},
      {"queries", result.queries},
      {"proposals", result.proposals},
      {"steps", result.trace.size()},
      {"forced_steps", forced},
      {"final_loss", number_json(result.final_loss)},
      {"ssim", number_json(result.final_ssim)},
      {"psnr", number_json(result.final_psnr)},
  };
}

std::string trace_csv(const AttackResult& result) {
  std::string out = "step,queries,loss,ssim,forced\n";
  char line[160];
  for (const auto& t : result.trace) {
    std::snprintf(line, sizeof line, "%zu,%llu,%.17g,%.17g,%d\n", t.step,
                  static_cast<unsigned long long>(t.queries), t.loss, t.ssim, t.forced ? 1 : 0);
    out += line;
  }
  return out;
}

}  // namespace pqp
