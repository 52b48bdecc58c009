#include "lram/report.hpp"

#include <set>
#include <string>

namespace lram {

using nlohmann::json;

namespace {

template <class T>
T get_as(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config: '") + key + "' has the wrong type");
  }
}

std::size_t get_positive(const json& j, const char* key) {
  const auto v = get_as<int64_t>(j, key);
  if (v <= 0) throw ConfigError(std::string("config: '") + key + "' must be positive");
  return static_cast<std::size_t>(v);
}

}  // namespace

ToyConfig toy_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  static const std::set<std::string> known{"seed",      "keys",       "steps",      "batch",
                                           "log_every", "control_hidden", "input_dim", "output_dim",
                                           "heads",     "value_dim",  "locations",  "periods",
                                           "query_norm", "query_init_scale", "dense_lr", "memory_lr"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("config: unknown key '" + key + "'");
  }
  ToyConfig c;
  if (j.contains("seed")) c.seed = get_as<uint64_t>(j, "seed");
  if (j.contains("keys")) c.keys = get_positive(j, "keys");
  if (j.contains("steps")) c.steps = get_positive(j, "steps");
  if (j.contains("batch")) c.batch = get_positive(j, "batch");
  if (j.contains("log_every")) c.log_every = get_as<std::size_t>(j, "log_every");
  if (j.contains("control_hidden")) c.control_hidden = get_as<std::size_t>(j, "control_hidden");
  if (j.contains("input_dim")) c.model.input_dim = get_positive(j, "input_dim");
  if (j.contains("output_dim")) c.model.output_dim = get_positive(j, "output_dim");
  if (j.contains("heads")) c.model.shape.heads = static_cast<int>(get_positive(j, "heads"));
  if (j.contains("value_dim")) c.model.shape.value_dim = static_cast<int>(get_positive(j, "value_dim"));
  if (j.contains("locations")) c.model.periods = TorusConfig::preset(get_as<std::string>(j, "locations")).periods();
  if (j.contains("periods")) {
    const auto p = get_as<std::vector<int32_t>>(j, "periods");
    if (p.size() != kDim) throw ConfigError("config: 'periods' needs 8 entries");
    std::copy(p.begin(), p.end(), c.model.periods.begin());
    TorusConfig check(c.model.periods);
  }
  if (j.contains("query_norm")) c.model.query_norm = get_as<bool>(j, "query_norm");
  if (j.contains("query_init_scale")) c.model.query_init_scale = get_as<double>(j, "query_init_scale");
  if (j.contains("dense_lr")) c.dense_lr = get_as<double>(j, "dense_lr");
  if (j.contains("memory_lr")) c.memory_lr = get_as<double>(j, "memory_lr");
  if (!(c.model.query_init_scale > 0) || !(c.dense_lr > 0) || !(c.memory_lr > 0)) {
    throw ConfigError("config: scales and learning rates must be positive");
  }
  return c;
}

json to_json(const ToyConfig& c) {
  return {{"seed", c.seed},
          {"keys", c.keys},
          {"steps", c.steps},
          {"batch", c.batch},
          {"log_every", c.log_every},
          {"control_hidden", c.control_hidden},
          {"input_dim", c.model.input_dim},
          {"output_dim", c.model.output_dim},
          {"heads", c.model.shape.heads},
          {"value_dim", c.model.shape.value_dim},
          {"periods", c.model.periods},
          {"query_norm", c.model.query_norm},
          {"query_init_scale", c.model.query_init_scale},
          {"dense_lr", c.dense_lr},
          {"memory_lr", c.memory_lr}};
}

json to_json(const UtilisationReport& r) {
  return {{"slots", r.slots},
          {"used_slots", r.used_slots},
          {"usage_fraction", r.usage_fraction},
          {"kl_divergence", r.kl_divergence},
          {"histogram_edges", {"unused", 0.0, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0}},
          {"histogram", r.histogram}};
}

json to_json(const StepRecord& s, const ToyConfig& c) {
  return {{"step", s.step},
          {"loss", s.loss},
          {"lr", {{"dense", c.dense_lr}, {"memory", c.memory_lr}}},
          {"touched_slots", s.touched_slots}};
}

json to_json(const BenchEntry& e) {
  return {{"kind", e.kind},   {"width", e.width},   {"slots", e.slots},         {"threads", e.threads},
          {"batch", e.batch}, {"runs", e.runs},     {"median_us", e.median_us}, {"min_us", e.min_us},
          {"max_us", e.max_us}, {"params", e.params}};
}

}  // namespace lram
