#pragma once

#include "lram/e8.hpp"
#include "lram/training.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lram {

// ---------------------------------------------------------------------------
// Monte Carlo neighbourhood statistics over uniform torus samples.

struct SupportSampleStats {
  uint64_t samples = 0;
  int min_support = 0;
  int max_support = 0;
  double mean_support = 0.0;
  double support_stderr = 0.0;
  double min_total_weight = 0.0;
  double max_total_weight = 0.0;
  double mean_total_weight = 0.0;
  double mean_coverage = 0.0;  // top-32 retained / total weight
  double coverage_stderr = 0.0;
  double min_coverage = 0.0;
  Vec8 min_support_point{};
  Vec8 max_support_point{};
  Vec8 min_weight_point{};
  double seconds = 0.0;
};

/// Samples are drawn uniformly from [0, 4)^8, a period box of the lattice.
/// Work is split into fixed blocks seeded from (seed, block index), so the
/// result does not depend on `threads`.
SupportSampleStats sample_support_statistics(uint64_t samples, uint64_t seed, int threads = 1);

/// Support size just off a lattice point: the point itself plus every
/// minimal vector on the near side of a generic small displacement.
int support_count_near_lattice_point(double offset = 1e-6, uint64_t seed = 7);

struct ReferenceLattice {
  const char* name;
  int dimension;
  double covering_radius;  // at determinant 1
  double mean_support;     // published average support size
};

/// Z8, E8, K12, Lambda16, Lambda24.
std::span<const ReferenceLattice> reference_lattices();

// ---------------------------------------------------------------------------
// Acceptance suite.

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string summary;  // one line, human readable
  nlohmann::json details;
  double seconds = 0.0;
};

struct VerifyOptions {
  uint64_t seed = 20240601;
  uint64_t support_samples = 10'000'000;
  uint64_t coverage_samples = 1'000'000;
  std::size_t lattice_points = 1000;
  std::size_t gradient_points = 1000;
  std::size_t homogeneity_points = 1000;
  int threads = 1;
  std::optional<std::filesystem::path> table_artifact;
  int bench_width = 256;
  std::size_t bench_batch = 256;
  ToyConfig toy;
  std::vector<int> only;  // empty = every criterion
};

inline constexpr int kCriterionCount = 12;

const char* criterion_name(int id);

/// Runs one criterion. Throws std::out_of_range for an unknown id.
CriterionResult run_criterion(int id, const VerifyOptions& options);

/// Runs the selected criteria in order, reporting each as it finishes.
std::vector<CriterionResult> run_acceptance(const VerifyOptions& options,
                                            const std::function<void(const CriterionResult&)>& on_result = {});

nlohmann::json to_json(const SupportSampleStats& s);
nlohmann::json to_json(const CriterionResult& r);

}  // namespace lram
