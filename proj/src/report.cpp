#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pqp/attack_json.hpp"
#include "pqp/errors.hpp"
#include "pqp/harness.hpp"

namespace pqp {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

json optional_number(const std::optional<double>& v) {
  return v ? number_json(*v) : json(nullptr);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace

std::string report_csv(const BatchReport& report) {
  std::string out = "image_id,status,nq,ssim,psnr,seed\n";
  for (const auto& r : report.results) {
    out += r.id + ',' + r.status + ',' + std::to_string(r.nq) + ',';
    if (r.attack) out += fmt(r.attack->final_ssim) + ',' + fmt(r.attack->final_psnr);
    else out += ',';
    out += ',' + std::to_string(r.seed) + '\n';
  }
  return out;
}

json image_result_json(const ImageResult& r, const std::string& trace_ref) {
  json item = {
      {"image_id", r.id},
      {"index", r.index},
      {"seed", r.seed},
      {"status", r.status},
      {"nq", r.nq},
      {"target", r.target},
      {"target_queries", r.target_queries},
      {"start_score", optional_number(r.start_score)},
  };
  if (r.attack) {
    item["attack"] = result_json(*r.attack);
    if (!trace_ref.empty()) item["trace"] = trace_ref;
  }
  if (r.verdict) {
    item["target_score"] = number_json(r.verdict->target_score);
    item["nearest"] = r.verdict->nearest ? json(*r.verdict->nearest) : json(nullptr);
  }
  if (!r.error.empty()) item["error"] = r.error;
  return item;
}

json report_json(const BatchReport& report, const json& meta, const std::string& trace_dir) {
  const Aggregates& a = report.aggregates;
  json results = json::array();
  for (const auto& r : report.results) {
    const bool traced = !trace_dir.empty() && r.attack;
    results.push_back(image_result_json(r, traced ? trace_dir + "/" + r.id + ".csv" : ""));
  }
  return {
      {"meta", meta},
      {"aggregates",
       {
           {"total", a.total},
           {"successes", a.successes},
           {"success_rate", a.success_rate},
           {"mean_nq", optional_number(a.mean_nq)},
           {"median_nq", optional_number(a.median_nq)},
           {"mean_ssim", optional_number(a.mean_ssim)},
           {"mean_psnr", optional_number(a.mean_psnr)},
       }},
      {"results", std::move(results)},
  };
}

void write_report(const std::filesystem::path& dir, const BatchReport& report, const json& meta,
                  bool traces) {
  std::filesystem::create_directories(dir);
  write_text(dir / "report.csv", report_csv(report));
  write_text(dir / "report.json", report_json(report, meta, traces ? "traces" : "").dump(2) + "\n");
  if (!traces) return;
  std::filesystem::create_directories(dir / "traces");
  for (const auto& r : report.results) {
    if (r.attack) write_text(dir / "traces" / (r.id + ".csv"), trace_csv(*r.attack));
  }
}

CentroidSet parse_centroids(const std::string& json_text) {
  std::vector<std::vector<double>> rows;
  try {
    rows = json::parse(json_text).get<std::vector<std::vector<double>>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("centroid file: ") + e.what());
  }
  try {
    return CentroidSet(std::move(rows));
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("centroid file: ") + e.what());
  }
}

CentroidSet load_centroids(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_centroids(text.str());
}

}  // namespace pqp
