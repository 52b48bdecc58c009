#include "lram/kernel.hpp"

#include "lram/neighbor_table.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace lram {

double total_weight_lower_bound() { return (22158.0 - 625.0 * std::sqrt(5.0)) / 24389.0; }

double kernel_eval(double d_squared) {
  if (d_squared < 0.0 || std::isnan(d_squared)) throw std::domain_error("kernel_eval: negative squared distance");
  if (d_squared >= kSupportRadius2) return 0.0;
  const double t = 1.0 - d_squared / kSupportRadius2;
  const double t2 = t * t;
  return t2 * t2;
}

KernelWeight kernel_weight(const Vec8& q, const LatticePoint& k) {
  KernelWeight w;
  const double d2 = squared_distance(q, k);
  if (d2 >= kSupportRadius2) return w;
  const double t = 1.0 - d2 / kSupportRadius2;
  const double t3 = t * t * t;
  w.value = t3 * t;
  for (int i = 0; i < kDim; ++i) w.gradient[i] = -(q[i] - k[i]) * t3;
  return w;
}

Vec8 kernel_grad(const Vec8& q, const LatticePoint& k) { return kernel_weight(q, k).gradient; }

NeighborhoodStats neighborhood_stats(const Vec8& q, int top_k) {
  const Canonical c = canonicalize(q);
  NeighborhoodStats s;
  std::array<double, kNeighborCount> d2;
  neighbor_squared_distances(c.point, d2);
  // Branch-free over the whole table; points outside the support weigh 0.
  std::array<double, kNeighborCount> weights;
  for (std::size_t j = 0; j < kNeighborCount; ++j) {
    const double t = std::max(0.0, 1.0 - d2[j] / kSupportRadius2);
    weights[j] = (t * t) * (t * t);
  }
  for (std::size_t j = 0; j < kNeighborCount; ++j) {
    s.total_weight += weights[j];
    s.support_count += d2[j] < kSupportRadius2 ? 1 : 0;
  }
  const std::size_t n = kNeighborCount;

  const auto keep = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(top_k, 0)));
  if (keep > 0 && keep < n) {
    std::nth_element(weights.begin(), weights.begin() + keep, weights.end(), std::greater<>());
  }
  std::sort(weights.begin(), weights.begin() + keep, std::greater<>());
  for (std::size_t i = 0; i < keep; ++i) s.top_k_weight += weights[i];
  return s;
}

double total_weight(const Vec8& q) { return neighborhood_stats(q, 0).total_weight; }

}  // namespace lram
