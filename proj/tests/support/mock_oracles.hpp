#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "pqp/oracle.hpp"
#include "pqp/png_io.hpp"

namespace testing_support {

// Feature oracle returning a fixed function of the image.
class FunctionOracle : public pqp::Oracle {
 public:
  using Fn = std::function<std::vector<double>(const pqp::Image&)>;
  FunctionOracle(pqp::InputDims dims, pqp::OutputKind kind, Fn fn)
      : dims_(dims), kind_(kind), fn_(std::move(fn)) {}

  pqp::InputDims input_dims() const override { return dims_; }
  pqp::OutputKind kind() const override { return kind_; }

 protected:
  pqp::OutputVector evaluate(const pqp::Image& x) override { return {fn_(x), kind_}; }

 private:
  pqp::InputDims dims_;
  pqp::OutputKind kind_;
  Fn fn_;
};

// Wraps another oracle and checks every submitted image survives the PNG
// wire encoding unchanged, counting what it saw.
class WireCheckingOracle : public pqp::Oracle {
 public:
  explicit WireCheckingOracle(pqp::Oracle& inner) : inner_(inner) {}

  pqp::InputDims input_dims() const override { return inner_.input_dims(); }
  pqp::OutputKind kind() const override { return inner_.kind(); }

  std::uint64_t seen = 0;
  std::uint64_t violations = 0;

 protected:
  pqp::OutputVector evaluate(const pqp::Image& x) override {
    ++seen;
    const auto png = pqp::encode_png(x);
    const pqp::Image back = pqp::decode_png(png);
    if (!(back == x)) ++violations;
    return inner_.query(x);
  }

 private:
  pqp::Oracle& inner_;
};

// Feature oracle whose "feature" is the image itself scaled to [0, 1]:
// loss = Euclidean distance to a target image.
inline pqp::OutputVector image_feature(const pqp::Image& x) {
  pqp::OutputVector y{{}, pqp::OutputKind::feature};
  for (auto v : x.data()) y.values.push_back(v / 255.0);
  return y;
}

}  // namespace testing_support
