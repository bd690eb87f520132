#include "pqp/loss.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "pqp/errors.hpp"

namespace pqp {

LossSpec LossSpec::to_class(std::size_t classes, std::size_t target_class) {
  if (target_class >= classes) throw std::invalid_argument("target class out of range");
  LossSpec spec;
  spec.kind = LossKind::cross_entropy;
  spec.target.kind = OutputKind::confidence;
  spec.target.values.assign(classes, 0.0);
  spec.target.values[target_class] = 1.0;
  return spec;
}

LossSpec LossSpec::to_feature(std::vector<double> target) {
  LossSpec spec;
  spec.kind = LossKind::feature_distance;
  spec.target.kind = OutputKind::feature;
  spec.target.values = std::move(target);
  spec.validate();
  return spec;
}

void LossSpec::validate() const {
  if (kind == LossKind::cross_entropy) {
    if (target.kind != OutputKind::confidence) {
      throw std::invalid_argument("cross-entropy target must be a probability vector");
    }
    validate_output(target);
  } else {
    OutputVector t = target;
    t.kind = OutputKind::feature;
    validate_output(t);
  }
}

double loss(const LossSpec& spec, const OutputVector& y) {
  if (y.size() != spec.target.size()) {
    throw std::invalid_argument("output length " + std::to_string(y.size()) +
                                " does not match target length " +
                                std::to_string(spec.target.size()));
  }
  if (spec.kind == LossKind::cross_entropy) {
    if (y.kind != OutputKind::confidence) {
      throw std::invalid_argument("cross-entropy needs a confidence vector");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double t = spec.target.values[i];
      if (t != 0.0) sum -= t * std::log(std::max(y.values[i], kLogFloor));
    }
    // -0.0 for an exact hit; report +0.
    return sum == 0.0 ? 0.0 : sum;
  }
  return euclidean_distance(y.values, spec.target.values);
}

double directional_derivative(Oracle& oracle, const LossSpec& spec, const Image& x,
                              std::span<const DirectionTerm> direction, double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("finite-difference step must be positive");
  }
  if (direction.empty()) throw std::invalid_argument("direction is empty");
  double norm2 = 0.0;
  std::unordered_set<std::size_t> seen;
  for (const auto& t : direction) {
    if (t.weight == 0) throw std::invalid_argument("direction weights must be nonzero");
    if (!seen.insert(t.component).second) {
      throw std::invalid_argument("direction repeats a component");
    }
    norm2 += static_cast<double>(t.weight) * t.weight;
  }
  const double scale = epsilon / std::sqrt(norm2);

  std::vector<ComponentDelta> plus;
  std::vector<ComponentDelta> minus;
  plus.reserve(direction.size());
  minus.reserve(direction.size());
  for (const auto& t : direction) {
    const double offset = scale * t.weight;
    const double rounded = std::round(offset);
    if (std::abs(offset - rounded) > 1e-9 || rounded == 0.0) {
      throw std::invalid_argument("step of " + std::to_string(offset) +
                                  " levels is not an integer; queries must stay 8-bit");
    }
    const int step = static_cast<int>(rounded);
    plus.push_back({t.component, step});
    minus.push_back({t.component, -step});
  }

  const Image x_plus = apply_component_deltas(x, plus);
  const Image x_minus = apply_component_deltas(x, minus);
  const double l_plus = loss(spec, oracle.query(x_plus));
  const double l_minus = loss(spec, oracle.query(x_minus));
  return (l_plus - l_minus) / (2.0 * epsilon);
}

std::vector<double> parse_vector_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_array()) throw FormatError("expected a JSON array of numbers");
    std::vector<double> v;
    v.reserve(j.size());
    for (const auto& e : j) {
      if (!e.is_number()) throw FormatError("expected a JSON array of numbers");
      v.push_back(e.get<double>());
    }
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad vector JSON: ") + e.what());
  }
}

std::vector<double> load_vector_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_vector_json(ss.str());
}

}  // namespace pqp
