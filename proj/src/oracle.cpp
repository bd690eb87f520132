#include "pqp/oracle.hpp"

#include <cmath>
#include <string>

#include "pqp/errors.hpp"

namespace pqp {

std::string_view to_string(OutputKind kind) {
  return kind == OutputKind::confidence ? "confidence" : "feature";
}

OutputKind output_kind_from_string(std::string_view name) {
  if (name == "confidence") return OutputKind::confidence;
  if (name == "feature") return OutputKind::feature;
  throw std::invalid_argument("unknown output kind '" + std::string(name) + "'");
}

double OutputVector::norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

void validate_output(const OutputVector& y, double sum_tolerance) {
  if (y.values.empty()) throw std::invalid_argument("output vector is empty");
  double sum = 0.0;
  for (double v : y.values) {
    if (!std::isfinite(v)) throw std::invalid_argument("output vector has non-finite entry");
    if (y.kind == OutputKind::confidence && v < 0.0) {
      throw std::invalid_argument("confidence vector has a negative entry");
    }
    sum += v;
  }
  if (y.kind == OutputKind::confidence && std::abs(sum - 1.0) > sum_tolerance) {
    throw std::invalid_argument("confidences sum to " + std::to_string(sum) + ", not 1");
  }
}

OutputVector Oracle::query(const Image& x) {
  const InputDims dims = input_dims();
  if (x.height() != dims.height || x.width() != dims.width) {
    throw DimensionMismatch("oracle expects " + std::to_string(dims.height) + "x" +
                            std::to_string(dims.width) + " images, got " +
                            std::to_string(x.height()) + "x" + std::to_string(x.width()));
  }
  OutputVector y = evaluate(x);
  meter_.tick();
  return y;
}

CentroidSet::CentroidSet(std::vector<std::vector<double>> centroids)
    : centroids_(std::move(centroids)) {
  if (centroids_.size() < 2) throw std::invalid_argument("need at least two centroids");
  const std::size_t dim = centroids_.front().size();
  if (dim == 0) throw std::invalid_argument("centroids must be nonempty");
  for (const auto& c : centroids_) {
    if (c.size() != dim) throw std::invalid_argument("centroids differ in length");
    for (double v : c) {
      if (!std::isfinite(v)) throw std::invalid_argument("centroid has non-finite entry");
    }
  }
}

double euclidean_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DimensionMismatch("vectors differ in length");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

NearestCentroid nn_decision(const OutputVector& f, const CentroidSet& centroids) {
  NearestCentroid best{0, euclidean_distance(f.values, centroids[0])};
  for (std::size_t i = 1; i < centroids.size(); ++i) {
    const double d = euclidean_distance(f.values, centroids[i]);
    if (d < best.distance) best = {i, d};
  }
  return best;
}

NearestCentroid farthest_centroid(const OutputVector& f, const CentroidSet& centroids) {
  NearestCentroid best{0, euclidean_distance(f.values, centroids[0])};
  for (std::size_t i = 1; i < centroids.size(); ++i) {
    const double d = euclidean_distance(f.values, centroids[i]);
    if (d > best.distance) best = {i, d};
  }
  return best;
}

}  // namespace pqp
