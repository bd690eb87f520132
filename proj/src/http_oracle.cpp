#include "pqp/http_oracle.hpp"

#include <cmath>
#include <regex>

#include <httplib.h>
#include <json.hpp>

#include "pqp/png_io.hpp"

namespace pqp {

using nlohmann::json;

struct HttpOracle::Client {
  explicit Client(const std::string& scheme_host_port) : http(scheme_host_port) {}
  httplib::Client http;
};

const char* oracle_route(OutputKind mode) {
  return mode == OutputKind::confidence ? "/v1/classify" : "/v1/features";
}

HttpOracle::HttpOracle(const std::string& base_url, OutputKind mode, InputDims dims,
                       HttpOracleOptions options)
    : mode_(mode), dims_(dims), options_(options) {
  static const std::regex url_re(R"(^(http://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(base_url, m, url_re)) {
    throw std::invalid_argument("oracle URL must look like http://host:port[/prefix], got '" +
                                base_url + "'");
  }
  std::string prefix = m[2].matched ? m[2].str() : std::string();
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  path_ = prefix + oracle_route(mode);
  client_ = std::make_unique<Client>(m[1].str());
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
  client_->http.set_connection_timeout(secs.count(), usecs.count());
  client_->http.set_read_timeout(secs.count(), usecs.count());
  client_->http.set_write_timeout(secs.count(), usecs.count());
  client_->http.set_keep_alive(true);
}

HttpOracle::~HttpOracle() = default;

OutputVector parse_oracle_response(const std::string& body, OutputKind expected,
                                   double confidence_sum_tolerance) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("values") || !j.contains("kind")) {
    throw ProtocolError("response must be an object with \"values\" and \"kind\"");
  }
  if (!j["kind"].is_string()) throw ProtocolError("\"kind\" must be a string");
  OutputKind kind;
  try {
    kind = output_kind_from_string(j["kind"].get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ProtocolError(e.what());
  }
  if (kind != expected) {
    throw ProtocolError("response kind '" + j["kind"].get<std::string>() + "' does not match '" +
                        std::string(to_string(expected)) + "'");
  }
  const auto& values = j["values"];
  if (!values.is_array() || values.empty()) throw ProtocolError("\"values\" must be a nonempty array");
  OutputVector y;
  y.kind = kind;
  y.values.reserve(values.size());
  for (const auto& v : values) {
    if (!v.is_number()) throw ProtocolError("\"values\" must contain only numbers");
    y.values.push_back(v.get<double>());
  }
  try {
    validate_output(y, confidence_sum_tolerance);
  } catch (const std::invalid_argument& e) {
    throw ProtocolError(std::string("response violates output invariants: ") + e.what());
  }
  return y;
}

std::string format_oracle_response(const OutputVector& y) {
  json j;
  j["values"] = y.values;
  j["kind"] = std::string(to_string(y.kind));
  return j.dump();
}

std::string format_oracle_error(const std::string& message) {
  return json{{"error", message}}.dump();
}

OutputVector HttpOracle::evaluate(const Image& x) {
  const auto png = encode_png(x);
  const std::string body(png.begin(), png.end());

  httplib::Result res;
  for (int attempt = 0;; ++attempt) {
    ++attempts_;
    res = client_->http.Post(path_, body, "image/png");
    if (res) break;
    if (attempt >= options_.max_retries) {
      throw TransportError("POST " + path_ + " failed: " + httplib::to_string(res.error()));
    }
  }

  if (res->status < 200 || res->status >= 300) {
    std::string detail = res->body;
    try {
      const json j = json::parse(res->body);
      if (j.is_object() && j.contains("error") && j["error"].is_string()) {
        detail = j["error"].get<std::string>();
      }
    } catch (const json::exception&) {
    }
    throw ProtocolError("oracle returned HTTP " + std::to_string(res->status) + ": " + detail);
  }

  OutputVector y = parse_oracle_response(res->body, mode_, options_.confidence_sum_tolerance);
  if (!output_length_) {
    output_length_ = y.size();
  } else if (*output_length_ != y.size()) {
    throw ProtocolError("response length " + std::to_string(y.size()) +
                        " differs from first response length " +
                        std::to_string(*output_length_));
  }
  return y;
}

}  // namespace pqp
