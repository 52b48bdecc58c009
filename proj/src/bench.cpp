#include "lram/bench.hpp"

#include "lram/layer.hpp"
#include "lram/training.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>
#include <thread>

namespace lram {

namespace {

using MatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

MatF random_matrix(Eigen::Index rows, Eigen::Index cols, float stddev, std::mt19937_64& rng) {
  std::normal_distribution<float> dist(0.0f, stddev);
  MatF m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

// Runs body(begin, end) over [0, n) split into `threads` contiguous chunks.
template <class Body>
void parallel_rows(std::size_t n, int threads, Body&& body) {
  if (threads <= 1 || n < 2) {
    body(std::size_t{0}, n);
    return;
  }
  const auto t = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  pool.reserve(t);
  for (std::size_t i = 0; i < t; ++i) {
    const std::size_t begin = n * i / t;
    const std::size_t end = n * (i + 1) / t;
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
  for (auto& th : pool) th.join();
}

template <class Fn>
BenchEntry time_batches(const BenchConfig& cfg, Fn&& fn) {
  for (int i = 0; i < cfg.warmup; ++i) fn();
  std::vector<double> per_vector;
  per_vector.reserve(static_cast<std::size_t>(cfg.runs));
  for (int i = 0; i < cfg.runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    per_vector.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count() / static_cast<double>(cfg.batch));
  }
  BenchEntry e;
  e.runs = cfg.runs;
  e.batch = cfg.batch;
  e.threads = cfg.threads;
  e.min_us = *std::min_element(per_vector.begin(), per_vector.end());
  e.max_us = *std::max_element(per_vector.begin(), per_vector.end());
  e.median_us = median(std::move(per_vector));
  return e;
}

BenchEntry bench_dense(const BenchConfig& cfg, int w, std::mt19937_64& rng) {
  const Eigen::Index B = static_cast<Eigen::Index>(cfg.batch);
  const Eigen::Index hidden = static_cast<Eigen::Index>(cfg.ratio) * w;
  const MatF x = random_matrix(B, w, 1.0f, rng);
  const MatF w1 = random_matrix(w, hidden, 1.0f / std::sqrt(static_cast<float>(w)), rng);
  const MatF w2 = random_matrix(hidden, w, 1.0f / std::sqrt(static_cast<float>(hidden)), rng);
  MatF h(B, hidden), y(B, w);

  auto run = [&] {
    parallel_rows(cfg.batch, cfg.threads, [&](std::size_t begin, std::size_t end) {
      const auto r0 = static_cast<Eigen::Index>(begin);
      const auto rn = static_cast<Eigen::Index>(end - begin);
      h.middleRows(r0, rn).noalias() = x.middleRows(r0, rn) * w1;
      h.middleRows(r0, rn) = h.middleRows(r0, rn).unaryExpr(
          [](float v) { return 0.5f * v * (1.0f + std::erf(v * 0.70710678f)); });
      y.middleRows(r0, rn).noalias() = h.middleRows(r0, rn) * w2;
    });
  };
  BenchEntry e = time_batches(cfg, run);
  e.kind = "dense";
  e.width = w;
  e.params = param_count(static_cast<uint64_t>(w), static_cast<uint64_t>(cfg.ratio), 0, 0, LayerKind::dense);
  return e;
}

BenchEntry bench_memory(const BenchConfig& cfg, int w, const TorusConfig& torus, const ValueTableF32& values,
                        std::mt19937_64& rng) {
  const LayerShape shape = LayerShape::for_width(w, static_cast<int>(values.dim()));
  const Eigen::Index B = static_cast<Eigen::Index>(cfg.batch);
  const Eigen::Index out_width = shape.output_width();
  const MatF x = random_matrix(B, w, 1.0f, rng);
  const MatF wq = random_matrix(w, shape.input_width(), 1.0f / std::sqrt(static_cast<float>(w)), rng);
  const MatF wo = random_matrix(out_width, w, 1.0f / std::sqrt(static_cast<float>(out_width)), rng);
  MatF z(B, shape.input_width()), h(B, out_width), y(B, w);

  auto run = [&] {
    parallel_rows(cfg.batch, cfg.threads, [&](std::size_t begin, std::size_t end) {
      const auto r0 = static_cast<Eigen::Index>(begin);
      const auto rn = static_cast<Eigen::Index>(end - begin);
      z.middleRows(r0, rn).noalias() = x.middleRows(r0, rn) * wq;
      std::array<double, kHeadInputWidth> zh;
      for (auto b = r0; b < r0 + rn; ++b) {
        for (int head = 0; head < shape.heads; ++head) {
          for (int i = 0; i < kHeadInputWidth; ++i) zh[i] = z(b, head * kHeadInputWidth + i);
          std::span<float> out(h.row(b).data() + static_cast<std::ptrdiff_t>(head) * shape.value_dim,
                               static_cast<std::size_t>(shape.value_dim));
          theta_head_forward<float, float>(zh, torus, values, out);
        }
      }
      y.middleRows(r0, rn).noalias() = h.middleRows(r0, rn) * wo;
    });
  };
  BenchEntry e = time_batches(cfg, run);
  e.kind = "lram";
  e.width = w;
  e.slots = torus.slot_count();
  e.params = param_count(static_cast<uint64_t>(w), static_cast<uint64_t>(cfg.ratio), values.dim(),
                         torus.slot_count(), LayerKind::lram);
  return e;
}

}  // namespace

double median(std::vector<double> xs) {
  if (xs.empty()) throw std::invalid_argument("median of an empty sample");
  const auto mid = xs.begin() + static_cast<std::ptrdiff_t>(xs.size() / 2);
  std::nth_element(xs.begin(), mid, xs.end());
  if (xs.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(xs.begin(), mid);
  return 0.5 * (lower + upper);
}

std::vector<BenchEntry> run_bench(const BenchConfig& config, const std::function<void(const BenchEntry&)>& on_entry) {
  if (config.batch == 0 || config.runs < 1 || config.warmup < 0 || config.threads < 1 || config.ratio < 1) {
    throw std::invalid_argument("bench: batch, runs, threads and ratio must be positive");
  }
  for (int w : config.widths) {
    if (w <= 0 || w % kHeadInputWidth != 0) throw std::invalid_argument("bench: widths must be positive multiples of 16");
  }
  std::vector<BenchEntry> entries;
  auto emit = [&](BenchEntry e) {
    if (on_entry) on_entry(e);
    entries.push_back(std::move(e));
  };
  std::mt19937_64 rng(config.seed);
  if (config.dense) {
    for (int w : config.widths) emit(bench_dense(config, w, rng));
  }
  if (config.memory) {
    for (const auto& name : config.locations) {
      const TorusConfig torus = TorusConfig::preset(name);
      ValueTableF32 values(torus.slot_count(), 64);
      values.init_gaussian(rng());
      for (int w : config.widths) emit(bench_memory(config, w, torus, values, rng));
    }
  }
  return entries;
}

}  // namespace lram
