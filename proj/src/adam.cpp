#include "lram/adam.hpp"

#include <algorithm>
#include <cmath>

namespace lram {

namespace {

bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

inline void adam_element(double& p, double& m, double& v, double g, const AdamConfig& c, double bc1, double bc2) {
  m = c.beta1 * m + (1.0 - c.beta1) * g;
  v = c.beta2 * v + (1.0 - c.beta2) * g * g;
  const double m_hat = m / bc1;
  const double v_hat = v / bc2;
  p -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
}

}  // namespace

DenseAdam::DenseAdam(std::size_t size, AdamConfig config) : config_(config), m_(size, 0.0), v_(size, 0.0) {}

void DenseAdam::update(std::span<double> params, std::span<const double> grads, uint64_t t) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw std::invalid_argument("DenseAdam: parameter/gradient size mismatch");
  }
  if (t == 0) throw std::invalid_argument("DenseAdam: steps are 1-based");
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) adam_element(params[i], m_[i], v_[i], grads[i], config_, bc1, bc2);
}

LazyRowAdam::LazyRowAdam(uint64_t rows, std::size_t dim, AdamConfig config)
    : config_(config), dim_(dim), m_(rows * dim, 0.0), v_(rows * dim, 0.0), last_(rows, 0) {}

void LazyRowAdam::update(ValueTable& table, const SparseRowGrad& grads, uint64_t t) {
  if (table.dim() != dim_ || (grads.size() > 0 && grads.dim != dim_) || table.rows() != last_.size()) {
    throw std::invalid_argument("LazyRowAdam: table/gradient shape mismatch");
  }
  if (t == 0) throw std::invalid_argument("LazyRowAdam: steps are 1-based");
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t));
  for (std::size_t r = 0; r < grads.size(); ++r) {
    const uint64_t slot = grads.slots[r];
    if (slot >= last_.size()) throw std::out_of_range("LazyRowAdam: slot out of range");
    double* m = m_.data() + slot * dim_;
    double* v = v_.data() + slot * dim_;
    const uint64_t skipped = last_[slot] == 0 ? 0 : t - 1 - last_[slot];
    if (skipped > 0) {
      const double d1 = std::pow(config_.beta1, static_cast<double>(skipped));
      const double d2 = std::pow(config_.beta2, static_cast<double>(skipped));
      for (std::size_t j = 0; j < dim_; ++j) {
        m[j] *= d1;
        v[j] *= d2;
      }
    }
    auto row = table.row(slot);
    const auto g = grads.row(r);
    for (std::size_t j = 0; j < dim_; ++j) adam_element(row[j], m[j], v[j], g[j], config_, bc1, bc2);
    last_[slot] = t;
  }
}

OptimizerState::OptimizerState(std::size_t dense_size, uint64_t rows, std::size_t dim, AdamConfig dense_config,
                               AdamConfig memory_config)
    : dense(dense_size, dense_config), memory(rows, dim, memory_config) {}

void sparse_adam_step(OptimizerState& state, std::span<double> dense_params, std::span<const double> dense_grads,
                      ValueTable& values, const SparseRowGrad& value_grads) {
  if ((value_grads.size() > 0 && value_grads.dim != values.dim()) || dense_grads.size() != dense_params.size()) {
    throw std::invalid_argument("sparse_adam_step: gradient shape mismatch");
  }
  if (!all_finite(dense_grads)) throw NonFiniteGradient("non-finite dense gradient; step rejected");
  if (!all_finite(value_grads.rows)) throw NonFiniteGradient("non-finite value-table gradient; step rejected");
  const uint64_t t = state.step + 1;
  state.dense.update(dense_params, dense_grads, t);
  state.memory.update(values, value_grads, t);
  state.step = t;
}

}  // namespace lram
