#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>

#include "pqp/oracle.hpp"

namespace pqp {

/// Remote model over HTTP.
///
/// Request: POST <base>/v1/classify (confidence) or <base>/v1/features
/// (feature), body = PNG of the image, Content-Type: image/png.
/// Response: 200 with {"values": [...], "kind": "confidence"|"feature"};
/// errors are 4xx/5xx with {"error": "..."}.
struct HttpOracleOptions {
  int max_retries = 2;  ///< extra attempts after a transport failure
  std::chrono::milliseconds timeout{30000};
  double confidence_sum_tolerance = 1e-3;
};

class HttpOracle final : public Oracle {
 public:
  /// `base_url` is "http://host:port" with an optional path prefix.
  HttpOracle(const std::string& base_url, OutputKind mode, InputDims dims,
             HttpOracleOptions options = {});
  ~HttpOracle() override;

  InputDims input_dims() const override { return dims_; }
  OutputKind kind() const override { return mode_; }

  /// Transport-level attempts made so far, including retries.
  std::uint64_t attempts() const noexcept { return attempts_; }

 protected:
  OutputVector evaluate(const Image& x) override;

 private:
  struct Client;
  std::unique_ptr<Client> client_;
  std::string path_;
  OutputKind mode_;
  InputDims dims_;
  HttpOracleOptions options_;
  std::optional<std::size_t> output_length_;
  std::uint64_t attempts_ = 0;
};

/// Parses and checks a response body against the protocol; exposed for
/// conformance tests. Throws ProtocolError.
OutputVector parse_oracle_response(const std::string& body, OutputKind expected,
                                   double confidence_sum_tolerance = 1e-3);

/// Body the reference server returns for a successful evaluation.
std::string format_oracle_response(const OutputVector& y);
/// Body for an error response.
std::string format_oracle_error(const std::string& message);

/// "/v1/classify" or "/v1/features".
const char* oracle_route(OutputKind mode);

}  // namespace pqp
