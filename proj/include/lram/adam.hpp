#pragma once

#include "lram/layer.hpp"
#include "lram/torus.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace lram {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline constexpr double kDenseLearningRate = 1e-4;
inline constexpr double kMemoryLearningRate = 1e-3;

struct NonFiniteGradient : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Plain Adam over a flat parameter vector.
class DenseAdam {
 public:
  DenseAdam(std::size_t size, AdamConfig config);

  /// One update at step `t` (1-based, shared with the memory optimizer).
  void update(std::span<double> params, std::span<const double> grads, uint64_t t);

  const AdamConfig& config() const { return config_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
};

/// Adam over value-table rows, updated lazily: a row is only touched when it
/// receives a gradient, and its moments are first decayed by beta^skipped for
/// the steps it sat out. With every row touched every step this is exactly
/// dense Adam.
class LazyRowAdam {
 public:
  LazyRowAdam(uint64_t rows, std::size_t dim, AdamConfig config);

  void update(ValueTable& table, const SparseRowGrad& grads, uint64_t t);

  const AdamConfig& config() const { return config_; }
  uint64_t last_step(uint64_t row) const { return last_[row]; }
  std::span<const double> first_moment(uint64_t row) const { return {m_.data() + row * dim_, dim_}; }

 private:
  AdamConfig config_;
  std::size_t dim_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::vector<uint64_t> last_;  // 0 = never updated
};

/// Dense and memory optimizers advancing on one shared step counter.
struct OptimizerState {
  DenseAdam dense;
  LazyRowAdam memory;
  uint64_t step = 0;

  OptimizerState(std::size_t dense_size, uint64_t rows, std::size_t dim,
                 AdamConfig dense_config = {kDenseLearningRate}, AdamConfig memory_config = {kMemoryLearningRate});
};

/// Validates every gradient, then applies one dense and one lazy memory
/// update. Throws NonFiniteGradient, leaving all state untouched, if any
/// gradient entry is NaN or infinite.
void sparse_adam_step(OptimizerState& state, std::span<double> dense_params, std::span<const double> dense_grads,
                      ValueTable& values, const SparseRowGrad& value_grads);

}  // namespace lram
