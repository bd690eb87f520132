#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pqp/oracle.hpp"

namespace pqp {

enum class LossKind { cross_entropy, feature_distance };

/// Floor applied to confidences before taking the log.
inline constexpr double kLogFloor = 1e-12;

/// Mismatch between an oracle output and the attacker's target y^t.
struct LossSpec {
  LossKind kind = LossKind::cross_entropy;
  OutputVector target;

  /// One-hot cross-entropy target.
  static LossSpec to_class(std::size_t classes, std::size_t target_class);
  /// Euclidean distance to a target feature vector (e.g. a centroid).
  static LossSpec to_feature(std::vector<double> target);

  void validate() const;
};

/// cross_entropy: -sum_i t_i log(max(y_i, 1e-12)); feature_distance: ||y - t||.
/// Throws std::invalid_argument on length or kind mismatch.
double loss(const LossSpec& spec, const OutputVector& y);

/// Integer direction pattern; the unit direction is terms / ||terms||.
struct DirectionTerm {
  std::size_t component;
  int weight;
};

/// Central difference (L(f(x + eps phi)) - L(f(x - eps phi))) / (2 eps) with
/// exactly two queries. eps * phi must land on integer levels; steps that
/// would need rounding (including eps < 1 for a basis direction) are
/// rejected with std::invalid_argument. Probes are clamped to [0, 255].
double directional_derivative(Oracle& oracle, const LossSpec& spec, const Image& x,
                              std::span<const DirectionTerm> direction, double epsilon);

/// Reads a JSON array of numbers, e.g. a target feature vector.
std::vector<double> parse_vector_json(const std::string& text);
std::vector<double> load_vector_json(const std::filesystem::path& path);

}  // namespace pqp
