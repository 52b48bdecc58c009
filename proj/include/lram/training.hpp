#pragma once

#include "lram/adam.hpp"
#include "lram/layer.hpp"
#include "lram/torus.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lram {

// ---------------------------------------------------------------------------
// Utilisation

struct UtilisationReport {
  uint64_t slots = 0;
  uint64_t used_slots = 0;
  double usage_fraction = 0.0;  // slots with positive accumulated weight / slots
  double kl_divergence = 0.0;   // nats, weighted access distribution vs uniform
  /// Slot counts bucketed by p_s * N (access share relative to uniform):
  /// bucket 0 holds unused slots, then [0, 1/8), [1/8, 1/4), ..., [8, inf).
  std::vector<uint64_t> histogram;
};

/// Usage fraction and KL(p || uniform) = sum_s p_s log(p_s N) of the
/// weight-normalised access distribution. Throws std::invalid_argument when
/// nothing was recorded.
UtilisationReport utilisation(const AccessStats& stats);

// ---------------------------------------------------------------------------
// Parameter counts for a feed-forward block of width w and hidden ratio r.

enum class LayerKind { dense, lram, pkm };

/// dense: 2 r w^2;  lram: m N + (5/4) r w^2;  pkm: m N + 2 w sqrt(N) + w^2.
uint64_t param_count(uint64_t width, uint64_t ratio, uint64_t value_dim, uint64_t locations, LayerKind kind);

// ---------------------------------------------------------------------------
// Small trainable networks for the recall task.

/// y = W x + b over a batch, W stored row-major (out x in) inside a flat
/// parameter vector owned by the model.
struct AffineView {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t offset = 0;  // into the flat parameter vector

  std::size_t size() const { return in * out + out; }
  void forward(std::span<const double> params, std::span<const double> x, std::size_t batch,
               std::span<double> y) const;
  /// Accumulates dW, db into `grads` and writes dx (when non-empty).
  void backward(std::span<const double> params, std::span<const double> x, std::span<const double> dy,
                std::size_t batch, std::span<double> grads, std::span<double> dx) const;
};

/// Per-feature batch standardisation without affine parameters. Training
/// mode uses batch statistics and tracks running estimates for evaluation.
class QueryNorm {
 public:
  explicit QueryNorm(std::size_t features, double momentum = 0.1, double eps = 1e-5);

  void forward(std::span<const double> x, std::size_t batch, std::span<double> y, bool training);
  void backward(std::span<const double> dy, std::size_t batch, std::span<double> dx) const;

 private:
  std::size_t features_;
  double momentum_;
  double eps_;
  std::vector<double> running_mean_;
  std::vector<double> running_var_;
  std::vector<double> inv_std_;
  std::vector<double> normalized_;
};

struct MemoryModelConfig {
  std::size_t input_dim = 32;
  std::size_t output_dim = 64;
  LayerShape shape{1, 64};
  Periods periods{8, 8, 8, 8, 8, 8, 8, 8};
  bool query_norm = false;
  double query_init_scale = 32.0;  // std of the first affine map's weights, times 1/sqrt(in)
};

/// dense affine -> (optional query norm) -> memory layer -> dense affine.
class MemoryModel {
 public:
  MemoryModel(const MemoryModelConfig& config, uint64_t seed);

  std::vector<double> forward(std::span<const double> x, std::size_t batch, bool training = true,
                              AccessStats* stats = nullptr);

  struct Grads {
    std::vector<double> dense;
    SparseRowGrad values;
  };
  /// Gradients of the last forward() for upstream dL/dy.
  Grads backward(std::span<const double> dy) const;

  std::span<double> dense_params() { return params_; }
  std::span<const double> dense_params() const { return params_; }
  ValueTable& values() { return values_; }
  const ValueTable& values() const { return values_; }
  const TorusConfig& torus() const { return torus_; }
  const LramLayer& layer() const { return layer_; }
  std::size_t dense_param_count() const { return params_.size(); }

 private:
  MemoryModelConfig config_;
  TorusConfig torus_;
  AffineView in_;
  AffineView out_;
  std::vector<double> params_;
  ValueTable values_;
  std::optional<QueryNorm> norm_;
  LramLayer layer_;
  std::size_t batch_ = 0;
  std::vector<double> x_, pre_, query_, mem_;
};

/// dense affine -> GELU -> dense affine; the dense-only control.
class DenseModel {
 public:
  DenseModel(std::size_t input_dim, std::size_t hidden, std::size_t output_dim, uint64_t seed);

  std::vector<double> forward(std::span<const double> x, std::size_t batch);
  std::vector<double> backward(std::span<const double> dy) const;

  std::span<double> params() { return params_; }
  std::size_t param_count() const { return params_.size(); }

 private:
  AffineView in_;
  AffineView out_;
  std::vector<double> params_;
  std::size_t batch_ = 0;
  std::vector<double> x_, pre_, act_;
};

// ---------------------------------------------------------------------------
// Key -> value recall task and the training driver.

struct ToyConfig {
  uint64_t seed = 1;
  std::size_t keys = 4096;
  std::size_t steps = 5000;
  std::size_t batch = 128;
  MemoryModelConfig model;
  double dense_lr = kDenseLearningRate;
  double memory_lr = kMemoryLearningRate;
  /// Hidden width of the dense control; 0 picks the smallest width whose
  /// parameter count reaches the memory model's dense parameter count.
  std::size_t control_hidden = 0;
  std::size_t log_every = 1;
};

/// Fixed random key codes (N(0,1), keys x input_dim) and targets (N(0,1),
/// keys x output_dim).
struct ToyTask {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::vector<double> inputs;
  std::vector<double> targets;

  static ToyTask make(std::size_t keys, std::size_t input_dim, std::size_t output_dim, uint64_t seed);
  std::size_t size() const { return input_dim ? inputs.size() / input_dim : 0; }
};

struct StepRecord {
  std::size_t step = 0;
  double loss = 0.0;
  std::size_t touched_slots = 0;
};

struct ToyResult {
  std::vector<StepRecord> log;   // one record per logged step
  double initial_loss = 0.0;     // full-task loss before training
  double final_loss = 0.0;       // full-task loss after training
  std::size_t dense_params = 0;  // memory model, excluding the value table
  std::size_t table_params = 0;
  UtilisationReport utilisation;
};

struct ControlResult {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::size_t hidden = 0;
  std::size_t params = 0;
};

struct TrainingDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Trains the memory model on the recall task with per-group Adam learning
/// rates (dense vs memory), then measures utilisation over one pass of all
/// keys. `on_step` sees every logged record as it is produced. Throws
/// TrainingDiverged if the loss becomes non-finite.
ToyResult run_toy_training(const ToyConfig& config, const std::function<void(const StepRecord&)>& on_step = {});

/// Same task, sampling order and budget with the dense-only control.
ControlResult run_dense_control(const ToyConfig& config);

/// Mean squared error over batch and output dimensions, and its gradient.
double mse_loss(std::span<const double> pred, std::span<const double> target, std::span<double> grad);

}  // namespace lram
