#include "pqp/toy_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "pqp/errors.hpp"

namespace pqp {

using nlohmann::json;

void ToyModelSpec::validate() const {
  if (height == 0 || width == 0) throw std::invalid_argument("toy model dims must be positive");
  if (classes < 2) throw std::invalid_argument("toy model needs at least 2 outputs");
  if (weights.size() != classes * input_dim()) {
    throw std::invalid_argument("toy model weights have " + std::to_string(weights.size()) +
                                " entries, expected " + std::to_string(classes * input_dim()));
  }
  if (bias.size() != classes) throw std::invalid_argument("toy model bias length mismatch");
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(weights.begin(), weights.end(), finite) ||
      !std::all_of(bias.begin(), bias.end(), finite)) {
    throw std::invalid_argument("toy model has non-finite parameters");
  }
}

namespace {

// Uniform in [-1, 1) from the top 53 bits, independent of the standard
// library's distribution implementation.
double symmetric_unit(std::mt19937_64& rng) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return 2.0 * u - 1.0;
}

// In place on one weight row laid out like an image.
void highpass(double* row, std::size_t height, std::size_t width, std::size_t radius) {
  const auto h = static_cast<std::ptrdiff_t>(height);
  const auto w = static_cast<std::ptrdiff_t>(width);
  const auto rad = static_cast<std::ptrdiff_t>(radius);
  std::vector<double> plane(height * width), smooth(height * width);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    for (std::size_t p = 0; p < plane.size(); ++p) plane[p] = row[p * 3 + ch];
    for (std::ptrdiff_t r = 0; r < h; ++r) {
      for (std::ptrdiff_t c = 0; c < w; ++c) {
        double sum = 0.0;
        int n = 0;
        for (std::ptrdiff_t rr = std::max<std::ptrdiff_t>(0, r - rad); rr <= std::min(h - 1, r + rad); ++rr) {
          for (std::ptrdiff_t cc = std::max<std::ptrdiff_t>(0, c - rad); cc <= std::min(w - 1, c + rad); ++cc) {
            sum += plane[static_cast<std::size_t>(rr * w + cc)];
            ++n;
          }
        }
        smooth[static_cast<std::size_t>(r * w + c)] = sum / n;
      }
    }
    double mean = 0.0;
    for (std::size_t p = 0; p < plane.size(); ++p) {
      plane[p] -= smooth[p];
      mean += plane[p];
    }
    mean /= static_cast<double>(plane.size());
    for (std::size_t p = 0; p < plane.size(); ++p) row[p * 3 + ch] = plane[p] - mean;
  }
}

}  // namespace

ToyModelSpec gen_toy_spec(std::uint64_t seed, std::size_t height, std::size_t width,
                          std::size_t classes, OutputKind mode, bool normalize,
                          const ToyGenOptions& options) {
  ToyModelSpec spec;
  spec.mode = mode;
  spec.height = height;
  spec.width = width;
  spec.classes = classes;
  spec.normalize = normalize;
  if (height == 0 || width == 0) throw std::invalid_argument("toy model dims must be positive");
  if (classes < 2) throw std::invalid_argument("toy model needs at least 2 outputs");

  std::mt19937_64 rng(seed);
  const std::size_t dim = spec.input_dim();
  spec.weights.resize(classes * dim);
  for (double& w : spec.weights) w = options.weight_scale * symmetric_unit(rng);
  spec.bias.resize(classes);
  for (double& b : spec.bias) b = options.bias_scale * symmetric_unit(rng);
  if (options.highpass_radius > 0) {
    for (std::size_t r = 0; r < classes; ++r) {
      highpass(spec.weights.data() + r * dim, height, width, options.highpass_radius);
    }
  }
  return spec;
}

ToyModelSpec parse_toy_spec(const std::string& json_text) {
  ToyModelSpec spec;
  try {
    const json j = json::parse(json_text);
    spec.mode = output_kind_from_string(j.at("mode").get<std::string>());
    spec.height = j.at("height").get<std::size_t>();
    spec.width = j.at("width").get<std::size_t>();
    spec.classes = j.at("classes").get<std::size_t>();
    spec.normalize = j.at("normalize").get<bool>();
    const auto& rows = j.at("weights");
    if (!rows.is_array() || rows.size() != spec.classes) {
      throw FormatError("toy spec: weights must have one row per class");
    }
    spec.weights.reserve(spec.classes * spec.input_dim());
    for (const auto& row : rows) {
      if (!row.is_array() || row.size() != spec.input_dim()) {
        throw FormatError("toy spec: weight row length must be height*width*3");
      }
      for (const auto& v : row) spec.weights.push_back(v.get<double>());
    }
    spec.bias = j.at("bias").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("toy spec: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("toy spec: ") + e.what());
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("toy spec: ") + e.what());
  }
  return spec;
}

ToyModelSpec load_toy_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_toy_spec(ss.str());
}

std::string serialize_toy_spec(const ToyModelSpec& spec) {
  spec.validate();
  json j;
  j["mode"] = std::string(to_string(spec.mode));
  j["height"] = spec.height;
  j["width"] = spec.width;
  j["classes"] = spec.classes;
  j["normalize"] = spec.normalize;
  json rows = json::array();
  const std::size_t dim = spec.input_dim();
  for (std::size_t r = 0; r < spec.classes; ++r) {
    rows.push_back(std::vector<double>(spec.weights.begin() + static_cast<std::ptrdiff_t>(r * dim),
                                       spec.weights.begin() +
                                           static_cast<std::ptrdiff_t>((r + 1) * dim)));
  }
  j["weights"] = std::move(rows);
  j["bias"] = spec.bias;
  return j.dump() + "\n";
}

void save_toy_spec(const ToyModelSpec& spec, const std::filesystem::path& path) {
  const std::string text = serialize_toy_spec(spec);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

OutputVector evaluate_toy_model(const ToyModelSpec& spec, const Image& x) {
  if (x.height() != spec.height || x.width() != spec.width) {
    throw DimensionMismatch("toy model input size mismatch");
  }
  const std::size_t dim = spec.input_dim();
  const auto pixels = x.data();
  std::vector<double> input(dim);
  const double scale = 1.0 / (255.0 * std::sqrt(static_cast<double>(dim)));
  for (std::size_t j = 0; j < dim; ++j) input[j] = pixels[j] * scale;

  OutputVector y;
  y.kind = spec.mode;
  y.values.resize(spec.classes);
  for (std::size_t r = 0; r < spec.classes; ++r) {
    const double* row = spec.weights.data() + r * dim;
    double acc = 0.0;
    for (std::size_t j = 0; j < dim; ++j) acc += row[j] * input[j];
    y.values[r] = acc + spec.bias[r];
  }

  if (spec.mode == OutputKind::confidence) {
    const double peak = *std::max_element(y.values.begin(), y.values.end());
    double sum = 0.0;
    for (double& v : y.values) {
      v = std::exp(v - peak);
      sum += v;
    }
    for (double& v : y.values) v /= sum;
  } else if (spec.normalize) {
    const double n = y.norm();
    if (n == 0.0) throw std::domain_error("toy feature vector has zero norm");
    for (double& v : y.values) v /= n;
  }
  return y;
}

ToyOracle::ToyOracle(ToyModelSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

OutputVector ToyOracle::evaluate(const Image& x) { return evaluate_toy_model(spec_, x); }

}  // namespace pqp
