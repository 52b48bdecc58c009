#pragma once

// Brute-force references used by the unit tests. Nothing here goes through
// canonicalisation, the neighbour table or the decoder.

#include "lram/e8.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using lram::kDim;
using lram::LatticePoint;
using lram::Vec8;

// Every lattice point k with |q - k|^2 < radius2, by depth-first search over
// both parity classes with partial-distance pruning.
inline std::vector<LatticePoint> points_within(const Vec8& q, double radius2) {
  std::vector<LatticePoint> out;
  const double r = std::sqrt(radius2);
  LatticePoint k;
  for (int parity = 0; parity < 2; ++parity) {
    std::function<void(int, double, long)> rec = [&](int i, double partial, long sum) {
      if (i == kDim) {
        if (((sum % 4) + 4) % 4 == 0 && partial < radius2) out.push_back(k);
        return;
      }
      long lo = static_cast<long>(std::ceil(q[i] - r));
      if (((lo % 2) + 2) % 2 != parity) ++lo;
      for (long c = lo; c <= q[i] + r; c += 2) {
        const double d = q[i] - static_cast<double>(c);
        if (partial + d * d >= radius2) continue;
        k[i] = static_cast<int32_t>(c);
        rec(i + 1, partial + d * d, sum + c);
      }
    };
    rec(0, 0.0, 0);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Nearest lattice point; ties go to the lexicographically smaller point.
inline LatticePoint nearest(const Vec8& q) {
  const auto cands = points_within(q, 4.0 + 1e-9);  // covering radius 2
  LatticePoint best = cands.at(0);
  double best_d = lram::squared_distance(q, best);
  for (const auto& k : cands) {
    const double d = lram::squared_distance(q, k);
    if (d < best_d || (d == best_d && k < best)) {
      best = k;
      best_d = d;
    }
  }
  return best;
}

inline double kernel(double d2) {
  if (d2 >= 8.0) return 0.0;
  return std::pow(1.0 - d2 / 8.0, 4);
}

inline Vec8 uniform_point(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec8 q;
  for (auto& x : q) x = u(rng);
  return q;
}

inline LatticePoint random_lattice_point(std::mt19937_64& rng, int half_range) {
  std::uniform_int_distribution<int> u(-half_range, half_range);
  for (;;) {
    LatticePoint k;
    for (auto& c : k.coords) c = u(rng);
    if (lram::is_lattice_point(k)) return k;
  }
}

}  // namespace oracle
