#pragma once

#include <stdexcept>
#include <string>

namespace pqp {

/// Reading or writing a file failed, or the data ended early.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input is well-formed but not something this library accepts
/// (16-bit PNG, malformed CIFAR batch, bad spec file, ...).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two images (or an image and an oracle) disagree on dimensions.
class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace pqp
