#pragma once

#include "lram/bench.hpp"
#include "lram/training.hpp"

#include <json.hpp>

namespace lram {

/// Toy-training config file (JSON object, every key optional):
///   seed, keys, steps, batch, log_every, control_hidden   integers
///   input_dim, output_dim, heads, value_dim              integers
///   locations   "base" | "small" | "medium" | "large"
///   periods     8 integers (overrides locations)
///   query_norm  bool
///   query_init_scale, dense_lr, memory_lr                numbers
/// Throws ConfigError on unknown keys, wrong types or invalid values.
ToyConfig toy_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ToyConfig& c);

nlohmann::json to_json(const UtilisationReport& r);
/// One training-log line: {step, loss, lr: {dense, memory}, touched_slots}.
nlohmann::json to_json(const StepRecord& s, const ToyConfig& c);
nlohmann::json to_json(const BenchEntry& e);

}  // namespace lram
