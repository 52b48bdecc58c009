#include "lram/e8.hpp"
#include "oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

using namespace lram;

TEST_CASE("membership") {
  CHECK(is_lattice_point(LatticePoint{{2, 2, 0, 0, 0, 0, 0, 0}}));
  CHECK(is_lattice_point(LatticePoint{{1, 1, 1, 1, 1, 1, 1, 1}}));
  CHECK(is_lattice_point(LatticePoint{{-1, 1, 1, 1, 1, 1, 1, -1}}));
  CHECK_FALSE(is_lattice_point(LatticePoint{{2, 0, 0, 0, 0, 0, 0, 0}}));   // sum 2
  CHECK_FALSE(is_lattice_point(LatticePoint{{1, 1, 0, 0, 0, 0, 0, 0}}));   // mixed parity
  CHECK_FALSE(is_lattice_point(LatticePoint{{1, 1, 1, 1, 1, 1, 1, -1}}));  // sum 6
  CHECK(is_lattice_point(LatticePoint{{4, 0, 0, 0, 0, 0, 0, 0}}));
}

TEST_CASE("minimal vectors match a brute-force enumeration") {
  std::vector<LatticePoint> brute;
  std::array<int32_t, kDim> c;
  c.fill(-3);
  for (;;) {
    int n2 = 0;
    for (int v : c) n2 += v * v;
    if (n2 == 8 && is_lattice_point(c)) brute.push_back(LatticePoint{c});
    int i = kDim - 1;
    while (i >= 0 && c[i] == 3) c[i--] = -3;
    if (i < 0) break;
    ++c[i];
  }
  const auto mv = min_vectors();
  CHECK(brute.size() == 240);
  CHECK(mv == brute);
  CHECK(std::find(mv.begin(), mv.end(), LatticePoint{{2, 2, 0, 0, 0, 0, 0, 0}}) != mv.end());
  CHECK(std::find(mv.begin(), mv.end(), LatticePoint{{1, 1, 1, 1, 1, 1, 1, 1}}) != mv.end());
}

TEST_CASE("packing radius is sqrt 2") {
  double min_half = std::numeric_limits<double>::infinity();
  for (const auto& v : min_vectors()) min_half = std::min(min_half, std::sqrt(static_cast<double>(v.norm2())) / 2);
  CHECK(min_half == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("decode agrees with brute force in a [-6,6] box") {
  std::mt19937_64 rng(101);
  for (int i = 0; i < 300; ++i) {
    const Vec8 q = oracle::uniform_point(rng, -4.0, 4.0);
    const LatticePoint got = decode(q);
    const LatticePoint want = oracle::nearest(q);
    REQUIRE(squared_distance(q, got) == doctest::Approx(squared_distance(q, want)).epsilon(1e-14));
    CHECK(got == want);
  }
}

TEST_CASE("decode is optimal against translated table points and idempotent on lattice points") {
  std::mt19937_64 rng(102);
  for (int i = 0; i < 20000; ++i) {
    const Vec8 q = oracle::uniform_point(rng, -8.0, 8.0);
    const LatticePoint k = decode(q);
    const double d = squared_distance(q, k);
    for (const auto& v : min_vectors()) {
      LatticePoint other = k;
      for (int j = 0; j < kDim; ++j) other[j] += v[j];
      REQUIRE(d <= squared_distance(q, other) + 1e-12);
    }
  }
  for (const auto& v : min_vectors()) CHECK(decode(v.as_vec()) == v);
  for (int i = 0; i < 10000; ++i) {
    const LatticePoint k = oracle::random_lattice_point(rng, 40);
    REQUIRE(decode(k.as_vec()) == k);
  }
}

TEST_CASE("decode breaks exact ties toward the lexicographically smaller point") {
  // The deep hole is at squared distance 4 from 16 lattice points.
  const Vec8 hole{2, 0, 0, 0, 0, 0, 0, 0};
  const auto cands = oracle::points_within(hole, 4.0 + 1e-9);
  CHECK(cands.size() == 16);
  CHECK(decode(hole) == cands.front());
  // Midpoint of 0 and a minimal vector.
  const Vec8 mid{1, 1, 0, 0, 0, 0, 0, 0};
  CHECK(decode(mid) == oracle::nearest(mid));
}

TEST_CASE("decode rejects non-finite and out-of-range input") {
  Vec8 q{};
  q[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(decode(q), std::domain_error);
  q[3] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(decode(q), std::domain_error);
  q[3] = 1e12;
  CHECK_THROWS_AS(decode(q), std::domain_error);
}

TEST_CASE("covering radius is 2") {
  std::mt19937_64 rng(103);
  double worst = 0.0;
  for (int i = 0; i < 200000; ++i) {
    const Vec8 q = oracle::uniform_point(rng, -8.0, 8.0);
    worst = std::max(worst, squared_distance(q, decode(q)));
  }
  CHECK(worst <= 4.0);
  CHECK(worst > 3.0);
  CHECK(squared_distance(Vec8{2, 0, 0, 0, 0, 0, 0, 0}, decode(Vec8{2, 0, 0, 0, 0, 0, 0, 0})) == 4.0);
}

TEST_CASE("canonicalize lands in the fundamental region and preserves distances") {
  std::mt19937_64 rng(104);
  for (int i = 0; i < 20000; ++i) {
    const Vec8 q = oracle::uniform_point(rng, -20.0, 20.0);
    const Canonical c = canonicalize(q);
    REQUIRE(c.iso.is_valid());
    REQUIRE(in_fundamental_region(c.point, 1e-12));
    const Vec8 mapped = c.iso.apply(q);
    for (int j = 0; j < kDim; ++j) REQUIRE(mapped[j] == doctest::Approx(c.point[j]).epsilon(1e-12));
    const LatticePoint k = oracle::random_lattice_point(rng, 20);
    const LatticePoint image = c.iso.apply(k);
    REQUIRE(is_lattice_point(image));
    REQUIRE(c.iso.apply_inverse(image) == k);
    REQUIRE(squared_distance(c.point, image) == doctest::Approx(squared_distance(q, k)).epsilon(1e-12));
  }
}

TEST_CASE("canonicalize is invariant under the lattice symmetry group") {
  std::mt19937_64 rng(105);
  for (int i = 0; i < 2000; ++i) {
    const Vec8 q = oracle::uniform_point(rng, -6.0, 6.0);
    // Translate by a lattice vector, permute coordinates, flip an even number of signs.
    const LatticePoint t = oracle::random_lattice_point(rng, 12);
    std::array<int, kDim> perm{0, 1, 2, 3, 4, 5, 6, 7};
    std::shuffle(perm.begin(), perm.end(), rng);
    std::array<int, kDim> sign;
    int negatives = 0;
    for (int j = 0; j < kDim - 1; ++j) {
      sign[j] = (rng() & 1) ? -1 : 1;
      negatives += sign[j] < 0;
    }
    sign[kDim - 1] = negatives % 2 ? -1 : 1;
    Vec8 g;
    for (int j = 0; j < kDim; ++j) g[j] = sign[j] * q[perm[j]] + t[j];
    const Vec8 a = canonicalize(q).point;
    const Vec8 b = canonicalize(g).point;
    for (int j = 0; j < kDim; ++j) REQUIRE(a[j] == doctest::Approx(b[j]).epsilon(1e-9));
  }
}

TEST_CASE("fundamental region membership") {
  CHECK(in_fundamental_region(Vec8{}));
  CHECK(in_fundamental_region(Vec8{2, 0, 0, 0, 0, 0, 0, 0}));
  CHECK(in_fundamental_region(Vec8{1, 1, 0, 0, 0, 0, 0, 0}));
  CHECK(in_fundamental_region(Vec8{0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, -0.5}));
  CHECK_FALSE(in_fundamental_region(Vec8{0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, -0.6}));
  CHECK_FALSE(in_fundamental_region(Vec8{1.5, 1, 0, 0, 0, 0, 0, 0}));  // z1 + z2 > 2
  CHECK_FALSE(in_fundamental_region(Vec8{0, 1, 0, 0, 0, 0, 0, 0}));    // unsorted
}

TEST_CASE("expected support count") {
  // Volume of the 8-ball of radius sqrt 2 * rho is pi^4 / 24 * (2 rho^2)^4.
  const double pi4 = std::pow(std::acos(-1.0), 4);
  CHECK(expected_support_count(8, 1.0) == doctest::Approx(pi4 / 24 * 16).epsilon(1e-12));
  CHECK(expected_support_count(8, 1.0) == doctest::Approx(64.94).epsilon(0.01 / 64.94));
  CHECK(std::abs(expected_support_count(8, std::sqrt(2.0)) - 1039) <= 1.0);
  CHECK(std::abs(expected_support_count(24, std::sqrt(2.0)) - 32373) <= 5.0);
  // n = 2: area of a disc of radius sqrt 2.
  CHECK(expected_support_count(2, 1.0) == doctest::Approx(2 * std::acos(-1.0)));
  CHECK_THROWS_AS(expected_support_count(0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(expected_support_count(8, 0.0), std::invalid_argument);
}
