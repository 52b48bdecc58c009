#include "lram/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace lram {

namespace {

void init_normal(std::span<double> xs, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& x : xs) x = dist(rng);
}

void init_affine(const AffineView& a, std::span<double> params, double scale, std::mt19937_64& rng) {
  init_normal(params.subspan(a.offset, a.in * a.out), scale / std::sqrt(static_cast<double>(a.in)), rng);
  std::fill_n(params.begin() + static_cast<std::ptrdiff_t>(a.offset + a.in * a.out), a.out, 0.0);
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

// Sampling order shared by the memory model and the control.
std::vector<std::size_t> sample_batch(std::mt19937_64& rng, std::size_t keys, std::size_t batch) {
  std::uniform_int_distribution<std::size_t> pick(0, keys - 1);
  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

void gather(const ToyTask& task, std::span<const std::size_t> idx, std::vector<double>& x, std::vector<double>& y) {
  x.resize(idx.size() * task.input_dim);
  y.resize(idx.size() * task.output_dim);
  for (std::size_t b = 0; b < idx.size(); ++b) {
    std::copy_n(task.inputs.begin() + static_cast<std::ptrdiff_t>(idx[b] * task.input_dim), task.input_dim,
                x.begin() + static_cast<std::ptrdiff_t>(b * task.input_dim));
    std::copy_n(task.targets.begin() + static_cast<std::ptrdiff_t>(idx[b] * task.output_dim), task.output_dim,
                y.begin() + static_cast<std::ptrdiff_t>(b * task.output_dim));
  }
}

template <class Predict>
double full_task_loss(const ToyTask& task, Predict&& predict) {
  constexpr std::size_t kChunk = 512;
  double total = 0.0;
  std::vector<double> x, y;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < task.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, task.size() - start);
    idx.resize(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = start + i;
    gather(task, idx, x, y);
    const auto pred = predict(x, n);
    for (std::size_t i = 0; i < pred.size(); ++i) total += (pred[i] - y[i]) * (pred[i] - y[i]);
  }
  return total / static_cast<double>(task.size() * task.output_dim);
}

std::size_t control_hidden_for(const ToyConfig& c, std::size_t target_params) {
  if (c.control_hidden > 0) return c.control_hidden;
  // (in + 1) h + (h + 1) out >= target
  const std::size_t in = c.model.input_dim;
  const std::size_t out = c.model.output_dim;
  const std::size_t per_unit = in + 1 + out;
  return std::max<std::size_t>(1, (target_params - std::min(target_params, out) + per_unit - 1) / per_unit);
}

}  // namespace

// ---------------------------------------------------------------------------

UtilisationReport utilisation(const AccessStats& stats) {
  const auto N = static_cast<uint64_t>(stats.accumulated_weight.size());
  double total = 0.0;
  for (double w : stats.accumulated_weight) total += w;
  if (N == 0 || !(total > 0.0)) throw std::invalid_argument("utilisation: no accesses recorded");

  UtilisationReport r;
  r.slots = N;
  r.histogram.assign(9, 0);
  const double n = static_cast<double>(N);
  for (double w : stats.accumulated_weight) {
    if (w <= 0.0) {
      ++r.histogram[0];
      continue;
    }
    ++r.used_slots;
    const double p = w / total;
    r.kl_divergence += p * std::log(p * n);
    const double rel = p * n;
    std::size_t bucket = 1;
    for (double edge = 0.125; bucket < 8 && rel >= edge; edge *= 2.0) ++bucket;
    ++r.histogram[bucket];
  }
  r.kl_divergence = std::max(0.0, r.kl_divergence);
  r.usage_fraction = static_cast<double>(r.used_slots) / n;
  return r;
}

uint64_t param_count(uint64_t width, uint64_t ratio, uint64_t value_dim, uint64_t locations, LayerKind kind) {
  const uint64_t w2 = width * width;
  switch (kind) {
    case LayerKind::dense:
      return 2 * ratio * w2;
    case LayerKind::lram:
      return value_dim * locations + 5 * ratio * w2 / 4;
    case LayerKind::pkm: {
      const auto root = static_cast<uint64_t>(std::llround(std::sqrt(static_cast<double>(locations))));
      return value_dim * locations + 2 * width * root + w2;
    }
  }
  throw std::invalid_argument("param_count: unknown layer kind");
}

// ---------------------------------------------------------------------------

void AffineView::forward(std::span<const double> params, std::span<const double> x, std::size_t batch,
                         std::span<double> y) const {
  const double* W = params.data() + offset;
  const double* bias = W + in * out;
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = x.data() + b * in;
    double* yb = y.data() + b * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double* row = W + o * in;
      double acc = bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += row[i] * xb[i];
      yb[o] = acc;
    }
  }
}

void AffineView::backward(std::span<const double> params, std::span<const double> x, std::span<const double> dy,
                          std::size_t batch, std::span<double> grads, std::span<double> dx) const {
  const double* W = params.data() + offset;
  double* dW = grads.data() + offset;
  double* db = dW + in * out;
  if (!dx.empty()) std::fill(dx.begin(), dx.end(), 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = x.data() + b * in;
    const double* dyb = dy.data() + b * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double g = dyb[o];
      db[o] += g;
      double* dWrow = dW + o * in;
      for (std::size_t i = 0; i < in; ++i) dWrow[i] += g * xb[i];
      if (!dx.empty()) {
        const double* row = W + o * in;
        double* dxb = dx.data() + b * in;
        for (std::size_t i = 0; i < in; ++i) dxb[i] += g * row[i];
      }
    }
  }
}

QueryNorm::QueryNorm(std::size_t features, double momentum, double eps)
    : features_(features), momentum_(momentum), eps_(eps), running_mean_(features, 0.0), running_var_(features, 1.0) {}

void QueryNorm::forward(std::span<const double> x, std::size_t batch, std::span<double> y, bool training) {
  const std::size_t F = features_;
  if (!training || batch < 2) {
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t f = 0; f < F; ++f) {
        y[b * F + f] = (x[b * F + f] - running_mean_[f]) / std::sqrt(running_var_[f] + eps_);
      }
    }
    return;
  }
  inv_std_.assign(F, 0.0);
  normalized_.assign(batch * F, 0.0);
  for (std::size_t f = 0; f < F; ++f) {
    double mean = 0.0;
    for (std::size_t b = 0; b < batch; ++b) mean += x[b * F + f];
    mean /= static_cast<double>(batch);
    double var = 0.0;
    for (std::size_t b = 0; b < batch; ++b) var += (x[b * F + f] - mean) * (x[b * F + f] - mean);
    var /= static_cast<double>(batch);
    inv_std_[f] = 1.0 / std::sqrt(var + eps_);
    for (std::size_t b = 0; b < batch; ++b) {
      normalized_[b * F + f] = (x[b * F + f] - mean) * inv_std_[f];
      y[b * F + f] = normalized_[b * F + f];
    }
    running_mean_[f] = (1.0 - momentum_) * running_mean_[f] + momentum_ * mean;
    running_var_[f] = (1.0 - momentum_) * running_var_[f] + momentum_ * var;
  }
}

void QueryNorm::backward(std::span<const double> dy, std::size_t batch, std::span<double> dx) const {
  const std::size_t F = features_;
  const double n = static_cast<double>(batch);
  for (std::size_t f = 0; f < F; ++f) {
    double mean_dy = 0.0;
    double mean_dy_xhat = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      mean_dy += dy[b * F + f];
      mean_dy_xhat += dy[b * F + f] * normalized_[b * F + f];
    }
    mean_dy /= n;
    mean_dy_xhat /= n;
    for (std::size_t b = 0; b < batch; ++b) {
      dx[b * F + f] = inv_std_[f] * (dy[b * F + f] - mean_dy - normalized_[b * F + f] * mean_dy_xhat);
    }
  }
}

// ---------------------------------------------------------------------------

MemoryModel::MemoryModel(const MemoryModelConfig& config, uint64_t seed)
    : config_(config),
      torus_(config.periods),
      in_{config.input_dim, static_cast<std::size_t>(config.shape.input_width()), 0},
      out_{static_cast<std::size_t>(config.shape.output_width()), config.output_dim, 0},
      values_(torus_.slot_count(), static_cast<std::size_t>(config.shape.value_dim)),
      layer_(torus_, config.shape, values_) {
  out_.offset = in_.size();
  params_.assign(in_.size() + out_.size(), 0.0);
  std::mt19937_64 rng(seed);
  init_affine(in_, params_, config.query_init_scale, rng);
  init_affine(out_, params_, 1.0, rng);
  values_.init_gaussian(rng());
  if (config.query_norm) norm_.emplace(in_.out);
}

std::vector<double> MemoryModel::forward(std::span<const double> x, std::size_t batch, bool training,
                                         AccessStats* stats) {
  if (x.size() != batch * config_.input_dim) throw ConfigError("MemoryModel: input size mismatch");
  batch_ = batch;
  x_.assign(x.begin(), x.end());
  pre_.assign(batch * in_.out, 0.0);
  in_.forward(params_, x_, batch, pre_);
  if (norm_) {
    query_.assign(pre_.size(), 0.0);
    norm_->forward(pre_, batch, query_, training);
  } else {
    query_ = pre_;
  }
  mem_ = layer_.forward(query_, batch, stats);
  std::vector<double> y(batch * out_.out, 0.0);
  out_.forward(params_, mem_, batch, y);
  return y;
}

MemoryModel::Grads MemoryModel::backward(std::span<const double> dy) const {
  if (batch_ == 0) throw std::logic_error("MemoryModel::backward called without a forward pass");
  Grads g;
  g.dense.assign(params_.size(), 0.0);
  std::vector<double> dmem(mem_.size(), 0.0);
  out_.backward(params_, mem_, dy, batch_, g.dense, dmem);
  ThetaGrad tg = layer_.backward(dmem);
  std::vector<double> dpre = std::move(tg.grad_input);
  if (norm_) {
    std::vector<double> dq = std::move(dpre);
    dpre.assign(dq.size(), 0.0);
    norm_->backward(dq, batch_, dpre);
  }
  in_.backward(params_, x_, dpre, batch_, g.dense, {});
  g.values = std::move(tg.grad_values);
  return g;
}

DenseModel::DenseModel(std::size_t input_dim, std::size_t hidden, std::size_t output_dim, uint64_t seed)
    : in_{input_dim, hidden, 0}, out_{hidden, output_dim, 0} {
  out_.offset = in_.size();
  params_.assign(in_.size() + out_.size(), 0.0);
  std::mt19937_64 rng(seed);
  init_affine(in_, params_, 1.0, rng);
  init_affine(out_, params_, 1.0, rng);
}

std::vector<double> DenseModel::forward(std::span<const double> x, std::size_t batch) {
  batch_ = batch;
  x_.assign(x.begin(), x.end());
  pre_.assign(batch * in_.out, 0.0);
  in_.forward(params_, x_, batch, pre_);
  act_.resize(pre_.size());
  std::transform(pre_.begin(), pre_.end(), act_.begin(), gelu);
  std::vector<double> y(batch * out_.out, 0.0);
  out_.forward(params_, act_, batch, y);
  return y;
}

std::vector<double> DenseModel::backward(std::span<const double> dy) const {
  std::vector<double> grads(params_.size(), 0.0);
  std::vector<double> dact(act_.size(), 0.0);
  out_.backward(params_, act_, dy, batch_, grads, dact);
  for (std::size_t i = 0; i < dact.size(); ++i) dact[i] *= gelu_grad(pre_[i]);
  in_.backward(params_, x_, dact, batch_, grads, {});
  return grads;
}

// ---------------------------------------------------------------------------

ToyTask ToyTask::make(std::size_t keys, std::size_t input_dim, std::size_t output_dim, uint64_t seed) {
  ToyTask t;
  t.input_dim = input_dim;
  t.output_dim = output_dim;
  t.inputs.resize(keys * input_dim);
  t.targets.resize(keys * output_dim);
  std::mt19937_64 rng(seed);
  init_normal(t.inputs, 1.0, rng);
  init_normal(t.targets, 1.0, rng);
  return t;
}

double mse_loss(std::span<const double> pred, std::span<const double> target, std::span<double> grad) {
  if (pred.size() != target.size() || grad.size() != pred.size()) throw std::invalid_argument("mse_loss: size mismatch");
  const double n = static_cast<double>(pred.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    loss += d * d;
    grad[i] = 2.0 * d / n;
  }
  return loss / n;
}

ToyResult run_toy_training(const ToyConfig& config, const std::function<void(const StepRecord&)>& on_step) {
  if (config.keys == 0 || config.batch == 0) throw ConfigError("toy training needs keys > 0 and batch > 0");
  const ToyTask task = ToyTask::make(config.keys, config.model.input_dim, config.model.output_dim, config.seed);
  MemoryModel model(config.model, config.seed + 1);
  OptimizerState opt(model.dense_param_count(), model.values().rows(), model.values().dim(), AdamConfig{config.dense_lr},
                     AdamConfig{config.memory_lr});

  ToyResult result;
  result.dense_params = model.dense_param_count();
  result.table_params = model.values().data().size();
  auto predict = [&](std::span<const double> x, std::size_t n) { return model.forward(x, n, false); };
  result.initial_loss = full_task_loss(task, predict);

  std::mt19937_64 order(config.seed + 2);
  std::vector<double> x, y;
  std::vector<double> dy;
  for (std::size_t step = 1; step <= config.steps; ++step) {
    const auto idx = sample_batch(order, config.keys, config.batch);
    gather(task, idx, x, y);
    const auto pred = model.forward(x, config.batch, true);
    dy.resize(pred.size());
    const double loss = mse_loss(pred, y, dy);
    if (!std::isfinite(loss)) {
      std::ostringstream os;
      os << "loss became non-finite at step " << step << " (previous loss "
         << (result.log.empty() ? result.initial_loss : result.log.back().loss) << ")";
      throw TrainingDiverged(os.str());
    }
    auto grads = model.backward(dy);
    try {
      sparse_adam_step(opt, model.dense_params(), grads.dense, model.values(), grads.values);
    } catch (const NonFiniteGradient& e) {
      throw TrainingDiverged("step " + std::to_string(step) + ": " + e.what());
    }
    if (config.log_every > 0 && (step % config.log_every == 0 || step == 1 || step == config.steps)) {
      StepRecord rec{step, loss, grads.values.size()};
      result.log.push_back(rec);
      if (on_step) on_step(rec);
    }
  }

  result.final_loss = full_task_loss(task, predict);

  AccessStats stats(model.values().rows());
  std::vector<std::size_t> all(task.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  gather(task, all, x, y);
  model.forward(x, all.size(), false, &stats);
  result.utilisation = utilisation(stats);
  return result;
}

ControlResult run_dense_control(const ToyConfig& config) {
  const ToyTask task = ToyTask::make(config.keys, config.model.input_dim, config.model.output_dim, config.seed);
  const MemoryModel reference(config.model, config.seed + 1);
  const std::size_t hidden = control_hidden_for(config, reference.dense_param_count());
  DenseModel model(config.model.input_dim, hidden, config.model.output_dim, config.seed + 1);
  DenseAdam opt(model.param_count(), AdamConfig{config.dense_lr});

  ControlResult result;
  result.hidden = hidden;
  result.params = model.param_count();
  auto predict = [&](std::span<const double> x, std::size_t n) { return model.forward(x, n); };
  result.initial_loss = full_task_loss(task, predict);

  std::mt19937_64 order(config.seed + 2);
  std::vector<double> x, y, dy;
  for (std::size_t step = 1; step <= config.steps; ++step) {
    const auto idx = sample_batch(order, config.keys, config.batch);
    gather(task, idx, x, y);
    const auto pred = model.forward(x, config.batch);
    dy.resize(pred.size());
    const double loss = mse_loss(pred, y, dy);
    if (!std::isfinite(loss)) throw TrainingDiverged("dense control diverged at step " + std::to_string(step));
    const auto grads = model.backward(dy);
    opt.update(model.params(), grads, step);
  }
  result.final_loss = full_task_loss(task, predict);
  return result;
}

}  // namespace lram
