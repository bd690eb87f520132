#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pqp/image.hpp"

namespace pqp {

enum class OutputKind { confidence, feature };

std::string_view to_string(OutputKind kind);
OutputKind output_kind_from_string(std::string_view name);

/// What an oracle returns for one image: class confidences (nonnegative,
/// summing to 1) or a feature vector (finite).
struct OutputVector {
  std::vector<double> values;
  OutputKind kind = OutputKind::confidence;

  std::size_t size() const { return values.size(); }
  double norm() const;
};

/// Throws std::invalid_argument if `y` breaks the invariants of its kind.
/// `sum_tolerance` bounds |sum - 1| for confidence vectors.
void validate_output(const OutputVector& y, double sum_tolerance = 1e-6);

/// Raised by network oracles when the exchange failed before a response
/// vector was obtained. Safe to retry.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a response violates the wire protocol or an invariant.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Counts oracle evaluations. Only Oracle can advance it.
class QueryMeter {
 public:
  std::uint64_t count() const noexcept { return count_; }

 private:
  friend class Oracle;
  void tick() noexcept { ++count_; }
  std::uint64_t count_ = 0;
};

struct InputDims {
  std::size_t height;
  std::size_t width;
  bool operator==(const InputDims&) const = default;
};

/// The black box. Attacks see only this interface: submit an integer image,
/// receive an output vector, pay one query.
class Oracle {
 public:
  virtual ~Oracle() = default;

  /// Checks dimensions, evaluates, and advances the meter by exactly one
  /// once a vector has been obtained. Failures leave the meter untouched.
  OutputVector query(const Image& x);

  std::uint64_t queries() const noexcept { return meter_.count(); }
  const QueryMeter& meter() const noexcept { return meter_; }

  virtual InputDims input_dims() const = 0;
  virtual OutputKind kind() const = 0;

 protected:
  virtual OutputVector evaluate(const Image& x) = 0;

 private:
  QueryMeter meter_;
};

/// Class centroids in feature space.
class CentroidSet {
 public:
  explicit CentroidSet(std::vector<std::vector<double>> centroids);

  std::size_t size() const noexcept { return centroids_.size(); }
  std::size_t dimension() const noexcept { return centroids_.front().size(); }
  const std::vector<double>& operator[](std::size_t i) const { return centroids_[i]; }
  const std::vector<std::vector<double>>& all() const noexcept { return centroids_; }

 private:
  std::vector<std::vector<double>> centroids_;
};

double euclidean_distance(const std::vector<double>& a, const std::vector<double>& b);

struct NearestCentroid {
  std::size_t index;
  double distance;
};

/// Closest centroid to `f`; ties go to the lowest index.
NearestCentroid nn_decision(const OutputVector& f, const CentroidSet& centroids);

/// Farthest centroid from `f`; ties go to the lowest index.
NearestCentroid farthest_centroid(const OutputVector& f, const CentroidSet& centroids);

}  // namespace pqp
