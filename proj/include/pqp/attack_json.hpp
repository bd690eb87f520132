#pragma once

#include <string>

#include <json.hpp>

#include "pqp/attack.hpp"

namespace pqp {

/// JSON number, or the strings "inf"/"-inf"/"nan" for non-finite values.
nlohmann::json number_json(double v);

nlohmann::json config_json(const PqpConfig& config);

/// Summary of a run without the trace or the image.
nlohmann::json result_json(const AttackResult& result);

/// Trace as CSV: step,queries,loss,ssim,forced.
std::string trace_csv(const AttackResult& result);

}  // namespace pqp
