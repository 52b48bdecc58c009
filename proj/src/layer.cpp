#include "lram/layer.hpp"

#include "lram/neighbor_table.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace lram {

namespace {

struct Candidate {
  double weight;
  double t3;  // (1 - d2/8)^3
  uint64_t slot;
  uint16_t index;
};

}  // namespace

LookupResult lookup(const Vec8& q, const TorusConfig& config, int top_k) {
  const Canonical c = canonicalize(q);
  const auto table = neighbor_table_coords();

  std::array<double, kNeighborCount> d2;
  neighbor_squared_distances(c.point, d2);

  std::array<Candidate, kNeighborCount> cand;
  std::size_t n = 0;
  LookupResult r;
  for (std::size_t j = 0; j < kNeighborCount; ++j) {
    if (d2[j] >= kSupportRadius2) continue;
    const double t = 1.0 - d2[j] / kSupportRadius2;
    const double t3 = t * t * t;
    cand[n++] = {t3 * t, t3, 0, static_cast<uint16_t>(j)};
    r.total_weight += t3 * t;
  }

  auto slot_of = [&](const Candidate& x) {
    LatticePoint local;
    for (int i = 0; i < kDim; ++i) local[i] = static_cast<int32_t>(table[x.index][i]);
    return detail::slot_index_unchecked(c.iso.apply_inverse(local), config);
  };

  const auto keep = std::min<std::size_t>(n, static_cast<std::size_t>(std::clamp(top_k, 0, kTopK)));
  auto first = cand.begin();
  auto last = cand.begin() + static_cast<std::ptrdiff_t>(n);
  if (keep < n) {
    std::nth_element(first, first + static_cast<std::ptrdiff_t>(keep), last,
                     [](const Candidate& x, const Candidate& y) { return x.weight > y.weight; });
  }

  if (keep > 0 && keep < n) {
    // Equal weights straddling the cut: keep the smallest slots.
    const double cut = cand[keep].weight;  // heaviest dropped candidate
    auto tied_begin = static_cast<std::size_t>(
        std::partition(first, first + static_cast<std::ptrdiff_t>(keep), [cut](const Candidate& x) { return x.weight != cut; }) -
        first);
    auto tied_end = std::partition(first + static_cast<std::ptrdiff_t>(keep), last,
                                   [cut](const Candidate& x) { return x.weight == cut; });
    if (tied_begin < keep) {
      for (auto it = first + static_cast<std::ptrdiff_t>(tied_begin); it != tied_end; ++it) it->slot = slot_of(*it);
      std::sort(first + static_cast<std::ptrdiff_t>(tied_begin), tied_end,
                [](const Candidate& x, const Candidate& y) { return x.slot < y.slot; });
    }
  }
  for (std::size_t a = 0; a < keep; ++a) cand[a].slot = slot_of(cand[a]);
  std::sort(first, first + static_cast<std::ptrdiff_t>(keep), [](const Candidate& x, const Candidate& y) {
    return x.weight != y.weight ? x.weight > y.weight : x.slot < y.slot;
  });

  r.count = static_cast<int>(keep);
  for (std::size_t a = 0; a < keep; ++a) {
    const auto& p = table[cand[a].index];
    Neighbor& e = r.entries[a];
    e.slot = cand[a].slot;
    e.weight = cand[a].weight;
    for (int i = 0; i < kDim; ++i) {
      // d w / d z_i, pulled back through z_i = s_i (q_perm(i) - t_perm(i)).
      e.grad[c.iso.perm[i]] = c.iso.signs[i] * (-(c.point[i] - p[i]) * cand[a].t3);
    }
    r.retained_weight += e.weight;
  }
  return r;
}

HeadQuery head_query(std::span<const double> z, const TorusConfig& config) {
  if (z.size() != static_cast<std::size_t>(kHeadInputWidth)) {
    throw ConfigError("head input must hold 16 reals (8 complex numbers)");
  }
  HeadQuery h;
  double inv_sum = 0.0;
  for (int i = 0; i < kDim; ++i) {
    const double re = z[2 * i];
    const double im = z[2 * i + 1];
    const double r = std::hypot(re, im);
    h.modulus[i] = r;
    if (r == 0.0) {
      h.degenerate = true;
      continue;
    }
    inv_sum += 1.0 / r;
    double arg = std::atan2(im, re);
    if (arg == -std::numbers::pi) arg = std::numbers::pi;
    h.q[i] = config.period(i) / (2.0 * std::numbers::pi) * arg;
  }
  if (h.degenerate) {
    h.q = {};
    h.scale = 0.0;
    return h;
  }
  h.q = wrap(h.q, config);
  h.scale = 1.0 / inv_sum;
  return h;
}

LayerShape LayerShape::for_width(int width, int value_dim) {
  if (width <= 0 || width % kHeadInputWidth != 0) {
    throw ConfigError("memory layer width must be a positive multiple of 16");
  }
  if (value_dim <= 0) throw ConfigError("value_dim must be positive");
  return {width / kHeadInputWidth, value_dim};
}

LramLayer::LramLayer(TorusConfig config, LayerShape shape, const ValueTable& values)
    : config_(config), shape_(shape), values_(&values) {
  if (shape_.heads <= 0 || shape_.value_dim <= 0) throw ConfigError("heads and value_dim must be positive");
  if (values.rows() != config_.slot_count()) throw ConfigError("value table rows do not match slot count");
  if (values.dim() != static_cast<std::size_t>(shape_.value_dim)) {
    throw ConfigError("value table dim does not match layer value_dim");
  }
}

void LramLayer::clear_context() {
  batch_ = 0;
  input_.clear();
  heads_.clear();
}

std::vector<double> LramLayer::forward(std::span<const double> x, std::size_t batch, AccessStats* stats) {
  const auto in_w = static_cast<std::size_t>(shape_.input_width());
  const auto m = static_cast<std::size_t>(shape_.value_dim);
  if (batch == 0 || x.size() != batch * in_w) {
    throw ConfigError("memory layer input must be batch x " + std::to_string(in_w) + " reals");
  }
  if (stats && stats->accumulated_weight.size() != config_.slot_count()) {
    throw ConfigError("access stats size does not match slot count");
  }

  const auto H = static_cast<std::size_t>(shape_.heads);
  std::vector<double> out(batch * H * m, 0.0);
  heads_.assign(batch * H, {});
  input_.assign(x.begin(), x.end());
  batch_ = batch;

  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < H; ++h) {
      auto& ctx = heads_[b * H + h];
      const auto z = x.subspan(b * in_w + h * kHeadInputWidth, kHeadInputWidth);
      std::span<double> o(out.data() + (b * H + h) * m, m);
      ctx.query = head_query(z, config_);
      if (ctx.query.degenerate) continue;
      ctx.lookup = lookup(ctx.query.q, config_);
      phi_forward(ctx.lookup, *values_, o);
      for (auto& v : o) v *= ctx.query.scale;
      rows_read_ += static_cast<uint64_t>(ctx.lookup.count);
      if (stats) {
        for (const auto& n : ctx.lookup.neighbors()) stats->record(n.slot, n.weight);
      }
    }
  }
  return out;
}

ThetaGrad LramLayer::backward(std::span<const double> upstream) const {
  if (!has_context()) throw std::logic_error("LramLayer::backward called without a forward context");
  const auto in_w = static_cast<std::size_t>(shape_.input_width());
  const auto m = static_cast<std::size_t>(shape_.value_dim);
  const auto H = static_cast<std::size_t>(shape_.heads);
  if (upstream.size() != batch_ * H * m) throw std::logic_error("upstream gradient has the wrong size");

  ThetaGrad g;
  g.grad_input.assign(batch_ * in_w, 0.0);
  g.grad_values.dim = m;

  std::unordered_map<uint64_t, std::size_t> row_of;
  std::vector<uint64_t> slots;
  std::vector<double> rows;

  std::vector<double> phi(m);
  for (std::size_t b = 0; b < batch_; ++b) {
    for (std::size_t h = 0; h < H; ++h) {
      const auto& ctx = heads_[b * H + h];
      if (ctx.query.degenerate) continue;  // zero output, zero (sub)gradient
      const auto up = upstream.subspan((b * H + h) * m, m);
      const double s = ctx.query.scale;

      // phi, d loss / d scale, and d loss / d q.
      phi_forward(ctx.lookup, *values_, std::span<double>(phi));
      double d_scale = 0.0;
      for (std::size_t j = 0; j < m; ++j) d_scale += up[j] * phi[j];
      Vec8 d_q{};
      for (const auto& n : ctx.lookup.neighbors()) {
        const auto v = values_->row(n.slot);
        double gv = 0.0;
        for (std::size_t j = 0; j < m; ++j) gv += up[j] * v[j];
        for (int i = 0; i < kDim; ++i) d_q[i] += s * gv * n.grad[i];

        auto [it, inserted] = row_of.try_emplace(n.slot, slots.size());
        if (inserted) {
          slots.push_back(n.slot);
          rows.resize(rows.size() + m, 0.0);
        }
        double* dst = rows.data() + it->second * m;
        const double sw = s * n.weight;
        for (std::size_t j = 0; j < m; ++j) dst[j] += sw * up[j];
      }

      // Chain through |z_i| (scale) and arg z_i (torus coordinate).
      const double* z = input_.data() + b * in_w + h * kHeadInputWidth;
      double* gz = g.grad_input.data() + b * in_w + h * kHeadInputWidth;
      for (int i = 0; i < kDim; ++i) {
        const double re = z[2 * i];
        const double im = z[2 * i + 1];
        const double r = ctx.query.modulus[i];
        const double r2 = r * r;
        const double ds_dr = s * s / r2;
        const double dq_darg = config_.period(i) / (2.0 * std::numbers::pi);
        gz[2 * i] += d_scale * ds_dr * re / r + d_q[i] * dq_darg * (-im / r2);
        gz[2 * i + 1] += d_scale * ds_dr * im / r + d_q[i] * dq_darg * (re / r2);
      }
    }
  }

  std::vector<std::size_t> order(slots.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return slots[a] < slots[b]; });
  g.grad_values.slots.reserve(slots.size());
  g.grad_values.rows.reserve(rows.size());
  for (auto idx : order) {
    g.grad_values.slots.push_back(slots[idx]);
    g.grad_values.rows.insert(g.grad_values.rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(idx * m),
                              rows.begin() + static_cast<std::ptrdiff_t>((idx + 1) * m));
  }
  return g;
}

std::vector<double> theta_forward(std::span<const double> z, std::size_t batch, const TorusConfig& config,
                                  const LayerShape& shape, const ValueTable& values) {
  LramLayer layer(config, shape, values);
  return layer.forward(z, batch);
}

ThetaGrad theta_backward(std::span<const double> z, std::size_t batch, const TorusConfig& config,
                         const LayerShape& shape, const ValueTable& values, std::span<const double> upstream) {
  LramLayer layer(config, shape, values);
  layer.forward(z, batch);
  return layer.backward(upstream);
}

}  // namespace lram
