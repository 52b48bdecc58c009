#pragma once

#include "lram/e8.hpp"
#include "lram/kernel.hpp"
#include "lram/torus.hpp"

#include <array>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace lram {

inline constexpr int kTopK = 32;

/// Per-head input width: eight complex numbers as interleaved (re, im) pairs.
inline constexpr int kHeadInputWidth = 2 * kDim;

struct Neighbor {
  uint64_t slot = 0;
  double weight = 0.0;
  Vec8 grad{};  // d weight / d q, in torus coordinates
};

/// The retained neighbours of one query, heaviest first (ties: smaller slot).
struct LookupResult {
  std::array<Neighbor, kTopK> entries{};
  int count = 0;
  double total_weight = 0.0;     // over every lattice point in the support
  double retained_weight = 0.0;  // over the kept entries

  std::span<const Neighbor> neighbors() const { return {entries.data(), static_cast<std::size_t>(count)}; }
};

/// Kernel-weighted neighbours of a torus point. Lifts q into R^8,
/// canonicalises it, scores the 232 table points, maps the survivors back
/// through the inverse isometry and keeps the `top_k` heaviest.
LookupResult lookup(const Vec8& q, const TorusConfig& config, int top_k = kTopK);

/// out = sum_i w_i v_{slot_i}, summed in descending-weight order.
template <class T, class Out>
void phi_forward(const LookupResult& r, const BasicValueTable<T>& values, std::span<Out> out) {
  for (auto& o : out) o = Out{0};
  for (const auto& n : r.neighbors()) {
    const auto row = values.row(n.slot);
    const auto w = static_cast<Out>(n.weight);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += w * static_cast<Out>(row[j]);
  }
}

/// Torus coordinates and reciprocal-sum scale of one head's complex input.
struct HeadQuery {
  Vec8 q{};
  double scale = 0.0;    // (sum 1/|z_i|)^-1, zero when some z_i is zero
  bool degenerate = false;  // some |z_i| == 0
  std::array<double, kDim> modulus{};
};

/// q_i = K_i / (2 pi) * arg z_i, wrapped into [0, K_i); arg in (-pi, pi].
HeadQuery head_query(std::span<const double> z, const TorusConfig& config);

/// One head of the activation: scale * phi(q). `z` holds 16 reals.
template <class T, class Out>
LookupResult theta_head_forward(std::span<const double> z, const TorusConfig& config,
                                const BasicValueTable<T>& values, std::span<Out> out) {
  const HeadQuery h = head_query(z, config);
  if (h.degenerate) {
    for (auto& o : out) o = Out{0};
    return {};
  }
  LookupResult r = lookup(h.q, config);
  phi_forward(r, values, out);
  const auto s = static_cast<Out>(h.scale);
  for (auto& o : out) o *= s;
  return r;
}

/// Value gradients for the rows a backward pass touched, sorted by slot.
struct SparseRowGrad {
  std::size_t dim = 0;
  std::vector<uint64_t> slots;
  std::vector<double> rows;  // slots.size() x dim

  std::span<const double> row(std::size_t i) const { return {rows.data() + i * dim, dim}; }
  std::size_t size() const { return slots.size(); }
};

struct LayerShape {
  int heads = 1;
  int value_dim = 64;

  int input_width() const { return heads * kHeadInputWidth; }
  int output_width() const { return heads * value_dim; }

  /// Heads and value size for a memory layer fed by width w: h = w / 16,
  /// m = value_dim, so the output width is h * m (4w for m = 64).
  static LayerShape for_width(int width, int value_dim = 64);
};

struct ThetaGrad {
  std::vector<double> grad_input;  // batch x input_width
  SparseRowGrad grad_values;
};

/// Multi-head memory layer over a shared value table. Inputs are batch-major,
/// head-minor: sample b, head h, coordinate i occupies
/// x[b * 16H + h * 16 + 2i] (real) and [.. + 1] (imaginary). Outputs are
/// out[b * H * m + h * m + j].
class LramLayer {
 public:
  LramLayer(TorusConfig config, LayerShape shape, const ValueTable& values);

  const TorusConfig& config() const { return config_; }
  const LayerShape& shape() const { return shape_; }
  const ValueTable& values() const { return *values_; }

  /// Forward pass; keeps the lookups for a later backward(). When `stats` is
  /// given, every retained (slot, weight) is recorded.
  std::vector<double> forward(std::span<const double> x, std::size_t batch, AccessStats* stats = nullptr);

  /// Reverse-mode gradients of the last forward(). Throws std::logic_error
  /// when there is no forward context or the upstream size is wrong.
  ThetaGrad backward(std::span<const double> upstream) const;

  bool has_context() const { return batch_ > 0; }
  void clear_context();

  /// Value rows read by forward() since construction.
  uint64_t rows_read() const { return rows_read_; }

 private:
  struct HeadContext {
    HeadQuery query;
    LookupResult lookup;
  };

  TorusConfig config_;
  LayerShape shape_;
  const ValueTable* values_;
  std::size_t batch_ = 0;
  std::vector<double> input_;
  std::vector<HeadContext> heads_;
  uint64_t rows_read_ = 0;
};

/// Stateless wrappers: one forward pass, or a forward pass followed by the
/// matching backward pass.
std::vector<double> theta_forward(std::span<const double> z, std::size_t batch, const TorusConfig& config,
                                  const LayerShape& shape, const ValueTable& values);
ThetaGrad theta_backward(std::span<const double> z, std::size_t batch, const TorusConfig& config,
                         const LayerShape& shape, const ValueTable& values, std::span<const double> upstream);

}  // namespace lram
