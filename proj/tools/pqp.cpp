// pqp: run attacks against toy or HTTP oracles, batch benchmarks, and
// generate toy models and fixtures.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pqp/attack_json.hpp"
#include "pqp/cifar10.hpp"
#include "pqp/errors.hpp"
#include "pqp/harness.hpp"
#include "pqp/http_oracle.hpp"
#include "pqp/png_io.hpp"
#include "pqp/ssim.hpp"
#include "pqp/synthetic.hpp"
#include "pqp/toy_oracle.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitAttackFailed = 2;

// Flags shared by `attack` and `bench`.
struct RunFlags {
  std::string oracle_toy;
  std::string oracle_url;
  std::string mode = "confidence";
  std::string input;
  std::string cifar;
  std::size_t index = 0;
  std::size_t count = 0;
  std::string attack = "pqp";
  pqp::PqpConfig config;
  std::string segment = "sum";
  double conf_target = 0.9;
  double gamma = 1.0;
  std::string target_rule;
  std::optional<std::size_t> target;
  std::size_t classes = 0;
  std::string centroids;
  bool no_nn_defense = false;
  std::string out;
  bool traces = false;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
};

void add_run_flags(CLI::App& app, RunFlags& f, bool batch) {
  auto* toy = app.add_option("--oracle-toy", f.oracle_toy, "Toy model spec JSON");
  auto* url = app.add_option("--oracle-url", f.oracle_url, "HTTP oracle base URL");
  toy->excludes(url);
  app.add_option("--mode", f.mode, "Output kind of an HTTP oracle")
      ->check(CLI::IsMember({"confidence", "feature"}));
  if (batch) {
    app.add_option("--cifar", f.cifar, "CIFAR-10 binary batch")->required();
    app.add_option("--first", f.index, "First record of the batch");
    app.add_option("--count", f.count, "Number of images")->required();
    app.add_option("--jobs", f.jobs, "Parallel attacks (default: core count)")
        ->check(CLI::PositiveNumber);
    app.add_flag("--traces", f.traces, "Write per-image traces");
  } else {
    auto* input = app.add_option("--input", f.input, "PNG image");
    auto* cifar = app.add_option("--cifar", f.cifar, "CIFAR-10 binary batch");
    input->excludes(cifar);
    app.add_option("--index", f.index, "Record index in the CIFAR batch");
  }
  app.add_option("--attack", f.attack, "Attack")->check(CLI::IsMember({"pqp", "naive", "ifd"}));
  app.add_option("--q", f.config.q, "Fraction of pixels eligible for perturbation");
  app.add_option("--n", f.config.n, "Pixels per proposal");
  app.add_option("--delta", f.config.delta, "Levels per perturbed component");
  app.add_option("--kmax", f.config.k_max, "Proposals before forced acceptance");
  app.add_option("--ssim-min", f.config.ssim_min, "SSIM floor");
  app.add_option("--max-queries", f.config.max_queries, "Query budget per image");
  app.add_option("--seed", f.config.seed, "Seed (bench: base seed, image i uses seed + i)");
  app.add_option("--segment", f.segment, "Pixel score from the SSIM gradient")
      ->check(CLI::IsMember({"sum", "max"}));
  app.add_option("--conf-target", f.conf_target, "Confidence threshold");
  app.add_option("--gamma", f.gamma, "Feature distance threshold");
  app.add_option("--target-rule", f.target_rule,
                 "least_confident | fixed | farthest_centroid | seeded_centroid");
  app.add_option("--target", f.target, "Class or centroid index for the fixed rule");
  app.add_option("--classes", f.classes, "Output length of an HTTP confidence oracle");
  app.add_option("--centroids", f.centroids, "Centroid JSON (feature oracles)");
  app.add_flag("--no-nn-defense", f.no_nn_defense, "Judge on distance only");
  app.add_option("--out", f.out, "Output directory")->required();
}

// Every option of `app` (given or defaulted) by long name.
json echo_flags(const CLI::App& app, const std::vector<std::string>& skip = {}) {
  json flags = json::object();
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help" || std::find(skip.begin(), skip.end(), name) != skip.end()) continue;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      flags[name] = res.size() == 1 ? json(res.front()) : json(res);
    } else if (!opt->get_default_str().empty()) {
      flags[name] = opt->get_default_str();
    }
  }
  return flags;
}

struct OracleSource {
  std::optional<pqp::ToyModelSpec> toy;
  std::string url;
  pqp::OutputKind mode = pqp::OutputKind::confidence;
  pqp::InputDims dims{0, 0};

  std::unique_ptr<pqp::Oracle> make() const {
    if (toy) return std::make_unique<pqp::ToyOracle>(*toy);
    return std::make_unique<pqp::HttpOracle>(url, mode, dims);
  }
  std::size_t classes() const { return toy ? toy->classes : 0; }
};

OracleSource oracle_source(const RunFlags& f, pqp::InputDims dims) {
  OracleSource src;
  if (!f.oracle_toy.empty()) {
    src.toy = pqp::load_toy_spec(f.oracle_toy);
    src.mode = src.toy->mode;
    if (pqp::InputDims{src.toy->height, src.toy->width} != dims) {
      throw pqp::DimensionMismatch("toy model expects " + std::to_string(src.toy->height) + "x" +
                                   std::to_string(src.toy->width) + " images");
    }
  } else if (!f.oracle_url.empty()) {
    src.url = f.oracle_url;
    src.mode = pqp::output_kind_from_string(f.mode);
  } else {
    throw std::invalid_argument("one of --oracle-toy or --oracle-url is required");
  }
  src.dims = dims;
  return src;
}

pqp::Scenario scenario_for(const RunFlags& f, const OracleSource& src) {
  pqp::Scenario s;
  s.confidence_threshold = f.conf_target;
  s.gamma = f.gamma;
  s.nn_defense = !f.no_nn_defense;
  if (src.mode == pqp::OutputKind::confidence) {
    s.kind = pqp::ScenarioKind::confidence_targeted;
    s.rule = pqp::TargetRule::least_confident;
    s.classes = f.classes ? f.classes : src.classes();
  } else {
    s.kind = pqp::ScenarioKind::feature_targeted;
    s.rule = pqp::TargetRule::farthest_centroid;
    if (f.centroids.empty()) throw std::invalid_argument("feature oracles need --centroids");
    s.centroids = pqp::load_centroids(f.centroids);
  }
  if (!f.target_rule.empty()) s.rule = pqp::target_rule_from_string(f.target_rule);
  if (f.target) {
    if (f.target_rule.empty()) s.rule = pqp::TargetRule::fixed;
    s.fixed_target = *f.target;
  }
  if (s.rule == pqp::TargetRule::fixed && !f.target) {
    throw std::invalid_argument("the fixed target rule needs --target");
  }
  s.validate();
  return s;
}

pqp::BatchOptions batch_options(const RunFlags& f) {
  pqp::BatchOptions o;
  o.attack = pqp::attack_kind_from_string(f.attack);
  o.config = f.config;
  o.config.segment_score =
      f.segment == "max" ? pqp::SegmentScore::channel_max : pqp::SegmentScore::channel_sum;
  o.jobs = f.jobs;
  return o;
}

std::string record_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05zu", index);
  return buf;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << '\n';
  if (!out) throw pqp::IoError("cannot write " + path.string());
}

int cmd_attack(const CLI::App& app, const RunFlags& f) {
  if (f.input.empty() == f.cifar.empty()) {
    throw std::invalid_argument("exactly one of --input or --cifar is required");
  }
  pqp::ImageJob job{"", pqp::Image(1, 1)};
  if (!f.input.empty()) {
    job = {fs::path(f.input).stem().string(), pqp::load_png(f.input)};
  } else {
    job = {record_id(f.index), pqp::cifar10::load_record(f.cifar, f.index).image};
  }
  const OracleSource src = oracle_source(f, {job.image.height(), job.image.width()});
  const pqp::Scenario scenario = scenario_for(f, src);
  pqp::BatchOptions options = batch_options(f);
  options.config.loss_min = scenario.loss_threshold();
  options.config.validate();

  auto oracle = src.make();
  // Seed as given: run_one adds the index, which is 0 here.
  const pqp::ImageResult r = pqp::run_one(0, job, *oracle, scenario, options);

  const fs::path dir = f.out;
  fs::create_directories(dir);
  json result = pqp::image_result_json(r, r.attack ? "trace.csv" : "");
  result["flags"] = echo_flags(app);
  result["config"] = pqp::config_json(options.config);
  result["attack_kind"] = f.attack;
  write_json(dir / "result.json", result);
  if (r.attack) {
    pqp::save_png(r.attack->adversarial, dir / "adversarial.png");
    std::ofstream(dir / "trace.csv", std::ios::binary) << pqp::trace_csv(*r.attack);
  }

  std::printf("%s: %s nq=%llu", job.id.c_str(), r.status.c_str(),
              static_cast<unsigned long long>(r.nq));
  if (r.attack) std::printf(" ssim=%.4f psnr=%.2f", r.attack->final_ssim, r.attack->final_psnr);
  std::printf("\n");
  if (r.status == "error" || r.status == "interrupted") {
    std::cerr << "pqp: " << r.error << '\n';
    return kExitError;
  }
  return r.succeeded() ? kExitOk : kExitAttackFailed;
}

int cmd_bench(const CLI::App& app, const RunFlags& f) {
  if (f.count == 0) throw std::invalid_argument("--count must be at least 1 (empty batch)");
  auto records = pqp::cifar10::load_records(f.cifar, f.index, f.count);
  std::vector<pqp::ImageJob> jobs;
  jobs.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    jobs.push_back({record_id(f.index + i), std::move(records[i].image)});
  }
  const pqp::Image& first = jobs.front().image;
  const OracleSource src = oracle_source(f, {first.height(), first.width()});
  const pqp::Scenario scenario = scenario_for(f, src);
  pqp::BatchOptions options = batch_options(f);
  options.config.loss_min = scenario.loss_threshold();

  const pqp::BatchReport report =
      pqp::run_batch(jobs, [&] { return src.make(); }, scenario, options);

  // Output location and parallelism do not change results; leaving them
  // out keeps reports of identical runs identical.
  json meta = {{"flags", echo_flags(app, {"out", "jobs"})},
               {"config", pqp::config_json(options.config)},
               {"attack_kind", f.attack},
               {"scenario", std::string(pqp::to_string(scenario.kind))},
               {"target_rule", std::string(pqp::to_string(scenario.rule))}};
  pqp::write_report(f.out, report, meta, f.traces);

  const auto& a = report.aggregates;
  std::printf("%zu/%zu succeeded (%.1f%%)", a.successes, a.total, a.success_rate);
  if (a.median_nq) {
    std::printf(", median NQ %.1f, mean SSIM %.4f, mean PSNR %.2f", *a.median_nq, *a.mean_ssim,
                *a.mean_psnr);
  }
  std::printf("\n");
  return kExitOk;
}

struct GenFlags {
  std::uint64_t seed = 0;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t classes = 10;
  std::string mode = "confidence";
  bool normalize = false;
  bool responsive = false;
  double weight_scale = 1.0;
  double bias_scale = 1.0;
  std::size_t highpass = 0;
  std::string out;
};

int cmd_gen_oracle(const CLI::App& app, const GenFlags& f) {
  pqp::ToyGenOptions opts;
  if (f.responsive) opts = pqp::ToyGenOptions::responsive(f.bias_scale);
  if (app.count("--weight-scale")) opts.weight_scale = f.weight_scale;
  if (app.count("--bias-scale")) opts.bias_scale = f.bias_scale;
  if (app.count("--highpass")) opts.highpass_radius = f.highpass;
  const auto spec = pqp::gen_toy_spec(f.seed, f.height, f.width, f.classes,
                                      pqp::output_kind_from_string(f.mode), f.normalize, opts);
  pqp::save_toy_spec(spec, f.out);
  return kExitOk;
}

struct ScenesFlags {
  std::uint64_t seed = 0;
  std::size_t count = 0;
  std::string kind = "scene";
  std::string out;
};

// 32x32 images in CIFAR-10 binary layout, label 0.
int cmd_gen_images(const ScenesFlags& f) {
  if (f.count == 0) throw std::invalid_argument("--count must be at least 1");
  std::vector<std::uint8_t> bytes;
  for (std::size_t i = 0; i < f.count; ++i) {
    const pqp::Image img = f.kind == "noise" ? pqp::uniform_noise(f.seed + i, 32, 32)
                                             : pqp::synthetic_scene(f.seed + i, 32, 32);
    const auto rec = pqp::cifar10::encode_record(img, 0);
    bytes.insert(bytes.end(), rec.begin(), rec.end());
  }
  pqp::write_file_bytes(f.out, bytes);
  return kExitOk;
}

struct CentroidFlags {
  std::string oracle_toy;
  std::uint64_t seed = 0;
  std::size_t count = 16;
  std::string out;
};

// Centroids as the features of seeded uniform-noise images.
int cmd_gen_centroids(const CentroidFlags& f) {
  const auto spec = pqp::load_toy_spec(f.oracle_toy);
  if (spec.mode != pqp::OutputKind::feature) throw std::invalid_argument("needs a feature model");
  if (f.count < 2) throw std::invalid_argument("--count must be at least 2");
  json rows = json::array();
  for (std::size_t i = 0; i < f.count; ++i) {
    rows.push_back(pqp::evaluate_toy_model(spec, pqp::uniform_noise(f.seed + i, spec.height,
                                                                    spec.width)).values);
  }
  std::ofstream out(f.out, std::ios::binary);
  out << rows.dump() << '\n';
  if (!out) throw pqp::IoError("cannot write " + f.out);
  return kExitOk;
}

struct SsimFlags {
  std::string input;
  std::string reference;
  std::string gradient_out;
};

int cmd_ssim(const SsimFlags& f) {
  const pqp::Image x = pqp::load_png(f.input);
  const pqp::Image y = pqp::load_png(f.reference);
  const auto r = pqp::ssim_value_and_gradient(x, y);
  std::printf("ssim %.10f\npsnr %.6f\n", r.value, pqp::psnr(x, y));
  if (!f.gradient_out.empty()) {
    std::ofstream out(f.gradient_out, std::ios::binary);
    pqp::write_gradient_dump(out, r.gradient);
    if (!out) throw pqp::IoError("cannot write " + f.gradient_out);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perceptual-quality-preserving black-box attacks"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  RunFlags attack_flags;
  auto* attack = app.add_subcommand("attack", "Attack one image");
  add_run_flags(*attack, attack_flags, false);

  RunFlags bench_flags;
  auto* bench = app.add_subcommand("bench", "Attack a CIFAR-10 batch and report");
  add_run_flags(*bench, bench_flags, true);

  GenFlags gen;
  auto* gen_oracle = app.add_subcommand("gen-oracle", "Write a seeded toy model spec");
  gen_oracle->add_option("--seed", gen.seed, "Seed");
  gen_oracle->add_option("--height", gen.height, "Image height")->check(CLI::PositiveNumber);
  gen_oracle->add_option("--width", gen.width, "Image width")->check(CLI::PositiveNumber);
  gen_oracle->add_option("--classes", gen.classes, "Outputs")->check(CLI::Range(2, 1 << 20));
  gen_oracle->add_option("--mode", gen.mode, "confidence | feature")
      ->check(CLI::IsMember({"confidence", "feature"}));
  gen_oracle->add_flag("--normalize", gen.normalize, "Unit-norm features");
  gen_oracle->add_flag("--responsive", gen.responsive,
                       "Scaled high-pass weights (see README)");
  gen_oracle->add_option("--weight-scale", gen.weight_scale, "Weight range");
  gen_oracle->add_option("--bias-scale", gen.bias_scale, "Bias range");
  gen_oracle->add_option("--highpass", gen.highpass, "High-pass radius, 0 = off");
  gen_oracle->add_option("--out", gen.out, "Output JSON")->required();

  ScenesFlags scenes;
  auto* gen_images = app.add_subcommand("gen-images", "Write seeded 32x32 images as a CIFAR batch");
  gen_images->add_option("--seed", scenes.seed, "Seed of image 0 (image i uses seed + i)");
  gen_images->add_option("--count", scenes.count, "Number of images")->required();
  gen_images->add_option("--kind", scenes.kind, "scene | noise")
      ->check(CLI::IsMember({"scene", "noise"}));
  gen_images->add_option("--out", scenes.out, "Output file")->required();

  CentroidFlags cent;
  auto* gen_centroids = app.add_subcommand("gen-centroids", "Centroids from noise-image features");
  gen_centroids->add_option("--oracle-toy", cent.oracle_toy, "Feature model spec")->required();
  gen_centroids->add_option("--seed", cent.seed, "Seed of the first image");
  gen_centroids->add_option("--count", cent.count, "Number of centroids");
  gen_centroids->add_option("--out", cent.out, "Output JSON")->required();

  SsimFlags ssim;
  auto* ssim_cmd = app.add_subcommand("ssim", "SSIM, PSNR and optional gradient dump");
  ssim_cmd->add_option("--input", ssim.input, "Image")->required();
  ssim_cmd->add_option("--reference", ssim.reference, "Reference image")->required();
  ssim_cmd->add_option("--gradient-out", ssim.gradient_out, "Gradient dump path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*attack) return cmd_attack(*attack, attack_flags);
    if (*bench) return cmd_bench(*bench, bench_flags);
    if (*gen_oracle) return cmd_gen_oracle(*gen_oracle, gen);
    if (*gen_images) return cmd_gen_images(scenes);
    if (*gen_centroids) return cmd_gen_centroids(cent);
    if (*ssim_cmd) return cmd_ssim(ssim);
  } catch (const std::exception& e) {
    std::cerr << "pqp: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
