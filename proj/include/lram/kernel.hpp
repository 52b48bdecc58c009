#pragma once

#include "lram/e8.hpp"

namespace lram {

inline constexpr double kSupportRadius2 = 8.0;

/// Lower bound on the total kernel weight, (22158 - 625 sqrt 5) / 24389.
double total_weight_lower_bound();

/// max(0, 1 - d2/8)^4. Throws std::domain_error for negative d2.
double kernel_eval(double d_squared);

/// Gradient of kernel_eval(|q - k|^2) with respect to q:
/// -(q - k) (1 - d2/8)^3 inside the support, zero outside.
Vec8 kernel_grad(const Vec8& q, const LatticePoint& k);

struct KernelWeight {
  double value = 0.0;
  Vec8 gradient{};
};

KernelWeight kernel_weight(const Vec8& q, const LatticePoint& k);

struct NeighborhoodStats {
  double total_weight = 0.0;
  int support_count = 0;     // lattice points with d2 < 8
  double top_k_weight = 0.0;  // weight kept by the k heaviest neighbours
};

/// Total weight, support size and top-k retained weight at q, computed
/// through canonicalisation and the neighbour table.
NeighborhoodStats neighborhood_stats(const Vec8& q, int top_k = 32);

double total_weight(const Vec8& q);

}  // namespace lram
