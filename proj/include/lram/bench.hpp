#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace lram {

struct BenchConfig {
  std::vector<int> widths{256, 512, 1024};
  std::vector<std::string> locations{"base", "large"};  // TorusConfig presets
  std::size_t batch = 64;
  int runs = 15;
  int warmup = 2;
  int threads = 1;
  int ratio = 4;  // dense hidden width = ratio * w
  uint64_t seed = 1;
  bool dense = true;
  bool memory = true;
};

struct BenchEntry {
  std::string kind;  // "dense" or "lram"
  int width = 0;
  uint64_t slots = 0;  // 0 for dense
  int threads = 1;
  std::size_t batch = 0;
  int runs = 0;
  double median_us = 0.0;  // per vector
  double min_us = 0.0;
  double max_us = 0.0;
  uint64_t params = 0;
};

/// Float32 forward-pass timings. Dense: w -> rw -> GELU -> w. Memory block:
/// w -> w query map, memory activation (w/16 heads, 64-wide values), rw -> w.
/// Every entry is the median over `runs` timed batches after `warmup` untimed
/// ones, divided by the batch size.
std::vector<BenchEntry> run_bench(const BenchConfig& config,
                                  const std::function<void(const BenchEntry&)>& on_entry = {});

double median(std::vector<double> xs);

}  // namespace lram
