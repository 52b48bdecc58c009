// lram: table generation, verification, statistics, benchmarks, toy training.
// Exit codes: 0 success, 1 check failed, 2 usage error.

#include "lram/bench.hpp"
#include "lram/e8.hpp"
#include "lram/neighbor_table.hpp"
#include "lram/report.hpp"
#include "lram/training.hpp"
#include "lram/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lram;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------

struct GenTableArgs {
  std::string out = "neighbor_table.bin";
  std::string emit_source;
  bool json_output = false;
};

int cmd_gen_table(const GenTableArgs& a) {
  const fs::path bin = a.out;
  fs::path meta = bin;
  meta.replace_extension(".json");

  json report{{"artifact", bin.string()}, {"metadata", meta.string()}};
  std::string previous;
  if (fs::exists(bin)) {
    try {
      const NeighborTable old = read_neighbor_table(bin, meta);
      report["previous"] = {{"status", "valid"}, {"checksum", checksum_hex(old.checksum())}};
      previous = "existing artifact valid";
    } catch (const std::exception& e) {
      report["previous"] = {{"status", "corrupt"}, {"error", e.what()}};
      previous = std::string("existing artifact rejected (") + e.what() + "); replacing it";
    }
  }

  const auto t0 = std::chrono::steady_clock::now();
  NeighborTable table;
  try {
    table = generate_neighbor_table();
  } catch (const std::exception& e) {
    std::cerr << "gen-table: " << e.what() << '\n';
    return kFailed;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_neighbor_table(table, bin, meta);
  if (!a.emit_source.empty()) {
    std::ofstream src(a.emit_source);
    if (!src) throw std::runtime_error("cannot write " + a.emit_source);
    src << neighbor_table_source(table);
  }
  const bool embedded_match = table.points == neighbor_table().points;
  const bool ok = table.count() == kNeighborCount;
  report.update({{"count", table.count()},
                 {"checksum", checksum_hex(table.checksum())},
                 {"matches_embedded", embedded_match},
                 {"seconds", secs},
                 {"passed", ok}});
  if (a.json_output) {
    std::cout << report.dump(2) << '\n';
  } else {
    if (!previous.empty()) std::cout << previous << '\n';
    std::printf("count=%zu checksum=%s matches_embedded=%s (%.3fs)\n", table.count(),
                checksum_hex(table.checksum()).c_str(), embedded_match ? "yes" : "no", secs);
    std::printf("wrote %s and %s\n", bin.c_str(), meta.c_str());
  }
  return ok ? kOk : kFailed;
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
  uint64_t samples = 10'000'000;
  std::optional<uint64_t> coverage_samples;
  uint64_t seed = VerifyOptions{}.seed;
  int threads = 1;
  std::string table;
  std::vector<int> only;
  std::size_t steps = ToyConfig{}.steps;
  std::string out;
  bool json_output = false;
};

int cmd_verify(const VerifyArgs& a) {
  VerifyOptions opt;
  opt.seed = a.seed;
  opt.support_samples = a.samples;
  opt.coverage_samples = a.coverage_samples.value_or(std::min<uint64_t>(a.samples, 1'000'000));
  opt.threads = a.threads;
  opt.only = a.only;
  opt.toy.steps = a.steps;
  if (!a.table.empty()) {
    if (!fs::exists(a.table)) throw UsageError("table artifact not found: " + a.table + " (run gen-table first)");
    opt.table_artifact = a.table;
  }
  for (int id : a.only) {
    if (id < 1 || id > kCriterionCount) throw UsageError("--only: criteria are numbered 1.." + std::to_string(kCriterionCount));
  }

  json results = json::array();
  bool all = true;
  const auto results_vec = run_acceptance(opt, [&](const CriterionResult& r) {
    if (!a.json_output) {
      std::printf("%-4s %2d  %-27s %s\n", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str(), r.summary.c_str());
      std::fflush(stdout);
    }
  });
  for (const auto& r : results_vec) {
    all = all && r.passed;
    results.push_back(to_json(r));
  }
  const json report{{"seed", a.seed}, {"passed", all}, {"criteria", results}};
  if (a.json_output) std::cout << report.dump(2) << '\n';
  if (!a.out.empty()) write_json(a.out, report);
  return all ? kOk : kFailed;
}

// ---------------------------------------------------------------------------

struct StatsArgs {
  uint64_t samples = 1'000'000;
  uint64_t seed = VerifyOptions{}.seed;
  int threads = 1;
  std::string out;
  bool json_output = false;
};

int cmd_stats(const StatsArgs& a) {
  const SupportSampleStats s = sample_support_statistics(a.samples, a.seed, a.threads);
  json analytic = json::array();
  for (const auto& r : reference_lattices()) {
    analytic.push_back({{"lattice", r.name},
                        {"dimension", r.dimension},
                        {"covering_radius", r.covering_radius},
                        {"mean_support", expected_support_count(r.dimension, r.covering_radius)},
                        {"published_mean_support", r.mean_support}});
  }
  const json report{{"seed", a.seed},
                    {"monte_carlo", to_json(s)},
                    {"support_just_off_lattice_point", support_count_near_lattice_point()},
                    {"analytic_mean_support", analytic}};
  if (a.json_output) {
    std::cout << report.dump(2) << '\n';
  } else {
    std::printf("samples           %llu (seed %llu, %.1fs)\n", static_cast<unsigned long long>(s.samples),
                static_cast<unsigned long long>(a.seed), s.seconds);
    std::printf("support count     min %d  max %d  mean %.4f +- %.4f\n", s.min_support, s.max_support,
                s.mean_support, s.support_stderr);
    std::printf("total weight      min %.6f  max %.6f  mean %.6f\n", s.min_total_weight, s.max_total_weight,
                s.mean_total_weight);
    std::printf("top-32 coverage   min %.4f  mean %.5f +- %.5f\n", s.min_coverage, s.mean_coverage,
                s.coverage_stderr);
    std::printf("support just off a lattice point: %d\n", report["support_just_off_lattice_point"].get<int>());
    std::printf("%-10s %4s %8s %12s %12s\n", "lattice", "dim", "cov.rad", "mean support", "published");
    for (const auto& r : analytic) {
      std::printf("%-10s %4d %8.4f %12.2f %12.2f\n", r["lattice"].get<std::string>().c_str(), r["dimension"].get<int>(),
                  r["covering_radius"].get<double>(), r["mean_support"].get<double>(),
                  r["published_mean_support"].get<double>());
    }
  }
  if (!a.out.empty()) write_json(a.out, report);
  return kOk;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::vector<int> widths{256, 512, 1024};
  std::vector<std::string> locations{"base", "large"};
  std::size_t batch = 64;
  int runs = 15;
  int threads = 1;
  uint64_t seed = 1;
  bool no_dense = false;
  bool no_memory = false;
  std::string out;
  bool json_output = false;
};

// Least-squares slope of log(median) against log(width).
std::optional<double> loglog_slope(const std::vector<BenchEntry>& es) {
  if (es.size() < 2) return std::nullopt;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& e : es) {
    const double x = std::log(e.width), y = std::log(e.median_us);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(es.size());
  const double den = n * sxx - sx * sx;
  if (den == 0) return std::nullopt;
  return (n * sxy - sx * sy) / den;
}

int cmd_bench(const BenchArgs& a) {
  for (const auto& l : a.locations) TorusConfig::preset(l);
  std::vector<int> modes{1};
  if (a.threads > 1) modes.push_back(a.threads);

  json entries = json::array();
  json summary = json::array();
  if (!a.json_output) {
    std::printf("%-6s %6s %9s %8s %12s %12s %12s %14s\n", "kind", "width", "slots", "threads", "median_us",
                "min_us", "max_us", "params");
  }
  for (int threads : modes) {
    BenchConfig cfg;
    cfg.widths = a.widths;
    cfg.locations = a.locations;
    cfg.batch = a.batch;
    cfg.runs = a.runs;
    cfg.threads = threads;
    cfg.seed = a.seed;
    cfg.dense = !a.no_dense;
    cfg.memory = !a.no_memory;
    const auto es = run_bench(cfg, [&](const BenchEntry& e) {
      if (!a.json_output) {
        std::printf("%-6s %6d %9llu %8d %12.3f %12.3f %12.3f %14llu\n", e.kind.c_str(), e.width,
                    static_cast<unsigned long long>(e.slots), e.threads, e.median_us, e.min_us, e.max_us,
                    static_cast<unsigned long long>(e.params));
        std::fflush(stdout);
      }
    });
    std::vector<BenchEntry> dense;
    for (const auto& e : es) {
      entries.push_back(to_json(e));
      if (e.kind == "dense") dense.push_back(e);
    }
    json mode{{"threads", threads}};
    if (auto slope = loglog_slope(dense)) mode["dense_loglog_slope"] = *slope;
    // Memory latency at each width relative to the smallest slot count.
    json ratios = json::array();
    for (int w : a.widths) {
      std::optional<BenchEntry> first;
      for (const auto& e : es) {
        if (e.kind != "lram" || e.width != w) continue;
        if (!first) {
          first = e;
        } else {
          ratios.push_back({{"width", w},
                            {"slots_from", first->slots},
                            {"slots_to", e.slots},
                            {"ratio", e.median_us / first->median_us}});
        }
      }
    }
    mode["lram_latency_ratios"] = ratios;
    summary.push_back(mode);
  }
  if (!a.json_output) {
    for (const auto& m : summary) {
      if (m.contains("dense_loglog_slope")) {
        std::printf("threads=%d dense log-log slope %.3f\n", m["threads"].get<int>(), m["dense_loglog_slope"].get<double>());
      }
      for (const auto& r : m["lram_latency_ratios"]) {
        std::printf("threads=%d lram w=%d latency ratio %llu -> %llu slots: %.3f\n", m["threads"].get<int>(),
                    r["width"].get<int>(), r["slots_from"].get<unsigned long long>(),
                    r["slots_to"].get<unsigned long long>(), r["ratio"].get<double>());
      }
    }
  }
  const json report{{"protocol", {{"runs", a.runs}, {"warmup", BenchConfig{}.warmup}, {"statistic", "median"}, {"dtype", "float32"}}},
                    {"entries", entries},
                    {"summary", summary}};
  if (a.json_output) std::cout << report.dump(2) << '\n';
  if (!a.out.empty()) write_json(a.out, report);
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::optional<uint64_t> seed;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> batch;
  std::string locations;
  std::string out = "lram-toy";
  bool control = false;
  bool json_output = false;
};

int cmd_train_toy(const TrainArgs& a) {
  ToyConfig cfg;
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) throw UsageError("cannot read config " + a.config);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw UsageError("config " + a.config + " is not valid JSON: " + e.what());
    }
    cfg = toy_config_from_json(j);
  }
  if (a.seed) cfg.seed = *a.seed;
  if (a.steps) cfg.steps = *a.steps;
  if (a.batch) cfg.batch = *a.batch;
  if (!a.locations.empty()) cfg.model.periods = TorusConfig::preset(a.locations).periods();
  if (cfg.steps == 0 || cfg.batch == 0) throw UsageError("--steps and --batch must be positive");

  const fs::path dir = a.out;
  fs::create_directories(dir);
  std::ofstream log(dir / "train_log.jsonl");
  if (!log) throw std::runtime_error("cannot write " + (dir / "train_log.jsonl").string());

  const ToyResult r = run_toy_training(cfg, [&](const StepRecord& s) { log << to_json(s, cfg).dump() << '\n'; });
  json report{{"config", to_json(cfg)},
              {"initial_loss", r.initial_loss},
              {"final_loss", r.final_loss},
              {"loss_ratio", r.final_loss / r.initial_loss},
              {"dense_params", r.dense_params},
              {"table_params", r.table_params},
              {"utilisation", to_json(r.utilisation)}};
  if (a.control) {
    const ControlResult c = run_dense_control(cfg);
    report["control"] = {{"initial_loss", c.initial_loss},
                         {"final_loss", c.final_loss},
                         {"hidden", c.hidden},
                         {"params", c.params}};
  }
  write_json(dir / "utilisation.json", to_json(r.utilisation));
  write_json(dir / "report.json", report);
  if (a.json_output) {
    std::cout << report.dump(2) << '\n';
  } else {
    std::printf("steps          %zu (batch %zu, keys %zu, slots %llu)\n", cfg.steps, cfg.batch, cfg.keys,
                static_cast<unsigned long long>(r.utilisation.slots));
    std::printf("loss           %.5f -> %.5f (x%.4f)\n", r.initial_loss, r.final_loss, r.final_loss / r.initial_loss);
    if (a.control) {
      std::printf("dense control  %.5f -> %.5f (hidden %zu, %zu params)\n", report["control"]["initial_loss"].get<double>(),
                  report["control"]["final_loss"].get<double>(), report["control"]["hidden"].get<std::size_t>(),
                  report["control"]["params"].get<std::size_t>());
    }
    std::printf("usage          %.4f (%llu slots)\n", r.utilisation.usage_fraction,
                static_cast<unsigned long long>(r.utilisation.used_slots));
    std::printf("KL divergence  %.4f nats\n", r.utilisation.kl_divergence);
    std::printf("wrote %s\n", dir.c_str());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"E8 lattice memory layer: tables, verification, statistics, benchmarks, toy training"};
  app.require_subcommand(1);
  bool json_output = false;
  app.add_flag("--json", json_output, "Print the JSON report on stdout instead of text");

  GenTableArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-table", "Generate the 232-point neighbour table artifact");
  gen_cmd->add_option("--out", gen.out, "Artifact path; metadata goes next to it as .json")->capture_default_str();
  gen_cmd->add_option("--emit-source", gen.emit_source, "Also write the C++ include for the embedded table");

  VerifyArgs ver;
  auto* ver_cmd = app.add_subcommand("verify", "Run the acceptance suite");
  ver_cmd->add_option("--samples", ver.samples, "Monte Carlo samples for support and weight statistics")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  ver_cmd->add_option("--coverage-samples", ver.coverage_samples, "Samples for the top-32 coverage check")
      ->check(CLI::PositiveNumber);
  ver_cmd->add_option("--seed", ver.seed, "64-bit seed")->capture_default_str();
  ver_cmd->add_option("--threads", ver.threads, "Monte Carlo worker threads")->check(CLI::PositiveNumber);
  ver_cmd->add_option("--table", ver.table, "Check this neighbour-table artifact against the embedded table");
  ver_cmd->add_option("--only", ver.only, "Criteria to run (1-12)")->delimiter(',');
  ver_cmd->add_option("--steps", ver.steps, "Toy training steps")->capture_default_str()->check(CLI::PositiveNumber);
  ver_cmd->add_option("--out", ver.out, "Write the JSON report here");

  StatsArgs st;
  auto* st_cmd = app.add_subcommand("stats", "Monte Carlo neighbourhood statistics and analytic averages");
  st_cmd->add_option("--samples", st.samples)->capture_default_str()->check(CLI::PositiveNumber);
  st_cmd->add_option("--seed", st.seed)->capture_default_str();
  st_cmd->add_option("--threads", st.threads)->check(CLI::PositiveNumber);
  st_cmd->add_option("--out", st.out, "Write the JSON report here");

  BenchArgs be;
  auto* be_cmd = app.add_subcommand("bench", "Time dense and memory feed-forward blocks (float32)");
  be_cmd->add_option("--widths", be.widths, "Model widths (multiples of 16)")->delimiter(',')->capture_default_str();
  be_cmd->add_option("--locations", be.locations, "Slot-count presets: base|small|medium|large")
      ->delimiter(',')
      ->capture_default_str();
  be_cmd->add_option("--batch", be.batch)->capture_default_str()->check(CLI::PositiveNumber);
  be_cmd->add_option("--runs", be.runs, "Timed runs per configuration")->capture_default_str()->check(CLI::PositiveNumber);
  be_cmd->add_option("--threads", be.threads, "Also report a multi-threaded mode with this many threads")
      ->check(CLI::PositiveNumber);
  be_cmd->add_option("--seed", be.seed)->capture_default_str();
  be_cmd->add_flag("--no-dense", be.no_dense);
  be_cmd->add_flag("--no-lram", be.no_memory);
  be_cmd->add_option("--out", be.out, "Write the JSON report here");

  TrainArgs tr;
  auto* tr_cmd = app.add_subcommand("train-toy", "Train the memory model on the key-value recall task");
  tr_cmd->add_option("--config", tr.config, "JSON config file");
  tr_cmd->add_option("--seed", tr.seed);
  tr_cmd->add_option("--steps", tr.steps)->check(CLI::PositiveNumber);
  tr_cmd->add_option("--batch", tr.batch)->check(CLI::PositiveNumber);
  tr_cmd->add_option("--locations", tr.locations, "Slot-count preset: base|small|medium|large");
  tr_cmd->add_option("--out", tr.out, "Output directory")->capture_default_str();
  tr_cmd->add_flag("--control", tr.control, "Also train the dense-only control");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*gen_cmd) {
      gen.json_output = json_output;
      return cmd_gen_table(gen);
    }
    if (*ver_cmd) {
      ver.json_output = json_output;
      return cmd_verify(ver);
    }
    if (*st_cmd) {
      st.json_output = json_output;
      return cmd_stats(st);
    }
    if (*be_cmd) {
      be.json_output = json_output;
      return cmd_bench(be);
    }
    if (*tr_cmd) {
      tr.json_output = json_output;
      return cmd_train_toy(tr);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailed;
  }
  return kUsage;
}
