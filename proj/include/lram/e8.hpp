#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <vector>

namespace lram {

inline constexpr int kDim = 8;

using Vec8 = std::array<double, kDim>;

/// A point of the scaled E8 lattice: integer coordinates, all of one parity,
/// coordinate sum divisible by 4. Minimal vectors have squared norm 8.
struct LatticePoint {
  std::array<int32_t, kDim> coords{};

  int32_t operator[](int i) const { return coords[i]; }
  int32_t& operator[](int i) { return coords[i]; }

  int64_t norm2() const;
  Vec8 as_vec() const;

  friend bool operator==(const LatticePoint&, const LatticePoint&) = default;
  friend auto operator<=>(const LatticePoint&, const LatticePoint&) = default;
};

bool is_lattice_point(const std::array<int32_t, kDim>& x);
inline bool is_lattice_point(const LatticePoint& k) { return is_lattice_point(k.coords); }

double squared_distance(const Vec8& a, const Vec8& b);
double squared_distance(const Vec8& q, const LatticePoint& k);

/// Nearest lattice point to q. Equidistant candidates resolve to the
/// lexicographically smallest coordinate tuple. Throws std::domain_error on
/// non-finite input or coordinates too large for 32-bit lattice coordinates.
LatticePoint decode(const Vec8& q);

/// Lattice isometry built from a lattice translation, a coordinate
/// permutation and an even number of sign changes:
///   z[i] = signs[i] * (x[perm[i]] - t[perm[i]])
struct Isometry {
  LatticePoint translation{};
  std::array<uint8_t, kDim> perm{0, 1, 2, 3, 4, 5, 6, 7};
  std::array<int8_t, kDim> signs{1, 1, 1, 1, 1, 1, 1, 1};

  Vec8 apply(const Vec8& x) const;
  Vec8 apply_inverse(const Vec8& z) const;
  LatticePoint apply(const LatticePoint& k) const;
  LatticePoint apply_inverse(const LatticePoint& p) const;

  bool is_identity() const;
  bool is_valid() const;  // perm is a bijection, even sign count, translation in the lattice
};

/// Tolerance-aware membership test for the fundamental region
///   z1 >= z2 >= ... >= z7 >= |z8|,  z1 + z2 <= 2,  sum(z) <= 4.
bool in_fundamental_region(const Vec8& z, double tol = 1e-12);

struct Canonical {
  Vec8 point;  // lies in the fundamental region
  Isometry iso;  // iso.apply(q) == point
};

/// Map q into the fundamental region: translate by -decode(q), sort by
/// descending magnitude, then flip signs so the first seven coordinates are
/// non-negative (the eighth absorbs the parity).
Canonical canonicalize(const Vec8& q);

/// All 240 lattice vectors of squared norm 8, in lexicographic order.
std::vector<LatticePoint> min_vectors();

/// Volume of the n-ball of radius sqrt(2) * covering_radius. For a lattice
/// scaled to determinant 1 this is the mean number of lattice points inside
/// the kernel support.
double expected_support_count(int dimension, double covering_radius);

}  // namespace lram
