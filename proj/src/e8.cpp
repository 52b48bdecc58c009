#include "lram/e8.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lram {

namespace {

constexpr double kMaxCoord = 1 << 29;

// Round half toward -inf so ties land on the lexicographically smaller point.
inline double round_half_down(double y) { return std::ceil(y - 0.5); }

// Nearest point of 2*D8 + offset*(1,...,1), where D8 = {x in Z^8 : sum even}.
LatticePoint decode_coset(const Vec8& q, int offset) {
  std::array<double, kDim> y{};
  std::array<double, kDim> r{};
  long long sum = 0;
  for (int i = 0; i < kDim; ++i) {
    y[i] = (q[i] - offset) * 0.5;
    r[i] = round_half_down(y[i]);
    sum += static_cast<long long>(r[i]);
  }
  if (sum % 2 != 0) {
    // Parity repair: move the worst-rounded coordinate to its other neighbour.
    int worst = 0;
    double worst_err = -1.0;
    for (int i = 0; i < kDim; ++i) {
      double err = std::abs(y[i] - r[i]);
      if (err > worst_err) {
        worst_err = err;
        worst = i;
      }
    }
    r[worst] += (y[worst] > r[worst]) ? 1.0 : -1.0;
  }
  LatticePoint k;
  for (int i = 0; i < kDim; ++i) k[i] = static_cast<int32_t>(2.0 * r[i]) + offset;
  return k;
}

}  // namespace

int64_t LatticePoint::norm2() const {
  int64_t s = 0;
  for (auto c : coords) s += int64_t{c} * c;
  return s;
}

Vec8 LatticePoint::as_vec() const {
  Vec8 v{};
  for (int i = 0; i < kDim; ++i) v[i] = coords[i];
  return v;
}

bool is_lattice_point(const std::array<int32_t, kDim>& x) {
  const int parity = x[0] & 1;
  int64_t sum = 0;
  for (auto c : x) {
    if ((c & 1) != parity) return false;
    sum += c;
  }
  return sum % 4 == 0;
}

double squared_distance(const Vec8& a, const Vec8& b) {
  double s = 0.0;
  for (int i = 0; i < kDim; ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double squared_distance(const Vec8& q, const LatticePoint& k) {
  double s = 0.0;
  for (int i = 0; i < kDim; ++i) {
    double d = q[i] - k[i];
    s += d * d;
  }
  return s;
}

LatticePoint decode(const Vec8& q) {
  for (double x : q) {
    if (!std::isfinite(x)) throw std::domain_error("decode: non-finite coordinate");
    if (std::abs(x) > kMaxCoord) throw std::domain_error("decode: coordinate out of range");
  }
  LatticePoint even = decode_coset(q, 0);
  LatticePoint odd = decode_coset(q, 1);
  double de = squared_distance(q, even);
  double dodd = squared_distance(q, odd);
  if (de < dodd) return even;
  if (dodd < de) return odd;
  return std::min(even, odd);
}

Vec8 Isometry::apply(const Vec8& x) const {
  Vec8 z{};
  for (int i = 0; i < kDim; ++i) z[i] = signs[i] * (x[perm[i]] - translation[perm[i]]);
  return z;
}

Vec8 Isometry::apply_inverse(const Vec8& z) const {
  Vec8 x{};
  for (int i = 0; i < kDim; ++i) x[perm[i]] = signs[i] * z[i] + translation[perm[i]];
  return x;
}

LatticePoint Isometry::apply(const LatticePoint& k) const {
  LatticePoint p;
  for (int i = 0; i < kDim; ++i) p[i] = signs[i] * (k[perm[i]] - translation[perm[i]]);
  return p;
}

LatticePoint Isometry::apply_inverse(const LatticePoint& p) const {
  LatticePoint k;
  for (int i = 0; i < kDim; ++i) k[perm[i]] = signs[i] * p[i] + translation[perm[i]];
  return k;
}

bool Isometry::is_identity() const {
  for (int i = 0; i < kDim; ++i) {
    if (perm[i] != i || signs[i] != 1 || translation[i] != 0) return false;
  }
  return true;
}

bool Isometry::is_valid() const {
  std::array<bool, kDim> seen{};
  int negatives = 0;
  for (int i = 0; i < kDim; ++i) {
    if (perm[i] >= kDim || seen[perm[i]]) return false;
    seen[perm[i]] = true;
    if (signs[i] != 1 && signs[i] != -1) return false;
    if (signs[i] < 0) ++negatives;
  }
  return negatives % 2 == 0 && is_lattice_point(translation);
}

bool in_fundamental_region(const Vec8& z, double tol) {
  for (int i = 0; i + 1 < kDim - 1; ++i) {
    if (z[i] < z[i + 1] - tol) return false;
  }
  if (z[6] < std::abs(z[7]) - tol) return false;
  if (z[0] + z[1] > 2.0 + tol) return false;
  double sum = 0.0;
  for (double x : z) sum += x;
  return sum <= 4.0 + tol;
}

Canonical canonicalize(const Vec8& q) {
  Canonical out;
  Isometry& iso = out.iso;
  iso.translation = decode(q);

  Vec8 y{};
  for (int i = 0; i < kDim; ++i) y[i] = q[i] - iso.translation[i];

  // Insertion sort: descending magnitude, ascending index on ties.
  for (int i = 0; i < kDim; ++i) iso.perm[i] = static_cast<uint8_t>(i);
  for (int i = 1; i < kDim; ++i) {
    uint8_t cur = iso.perm[i];
    int j = i - 1;
    while (j >= 0 && std::abs(y[iso.perm[j]]) < std::abs(y[cur])) {
      iso.perm[j + 1] = iso.perm[j];
      --j;
    }
    iso.perm[j + 1] = cur;
  }

  int parity = 1;
  for (int i = 0; i < kDim - 1; ++i) {
    iso.signs[i] = y[iso.perm[i]] < 0.0 ? int8_t{-1} : int8_t{1};
    parity *= iso.signs[i];
  }
  iso.signs[kDim - 1] = static_cast<int8_t>(parity);

  for (int i = 0; i < kDim; ++i) out.point[i] = iso.signs[i] * y[iso.perm[i]];
  return out;
}

std::vector<LatticePoint> min_vectors() {
  // Shape (+-2,+-2,0^6): 28 position pairs x 4 signs = 112.
  // Shape (+-1^8) with an even number of minus signs: 128.
  std::vector<LatticePoint> out;
  out.reserve(240);
  for (int i = 0; i < kDim; ++i) {
    for (int j = i + 1; j < kDim; ++j) {
      for (int si : {-2, 2}) {
        for (int sj : {-2, 2}) {
          LatticePoint k;
          k[i] = si;
          k[j] = sj;
          out.push_back(k);
        }
      }
    }
  }
  for (unsigned mask = 0; mask < 256; ++mask) {
    if (std::popcount(mask) % 2 != 0) continue;
    LatticePoint k;
    for (int i = 0; i < kDim; ++i) k[i] = (mask >> i) & 1u ? -1 : 1;
    out.push_back(k);
  }
  std::sort(out.begin(), out.end());
  return out;
}

double expected_support_count(int dimension, double covering_radius) {
  if (dimension < 1) throw std::invalid_argument("expected_support_count: dimension must be >= 1");
  if (!(covering_radius > 0.0)) {
    throw std::invalid_argument("expected_support_count: covering radius must be positive");
  }
  const double n = dimension;
  const double r = std::numbers::sqrt2 * covering_radius;
  // V_n(r) = pi^(n/2) r^n / Gamma(n/2 + 1), evaluated in log space.
  return std::exp(0.5 * n * std::log(std::numbers::pi) + n * std::log(r) - std::lgamma(0.5 * n + 1.0));
}

}  // namespace lram
