#include "lram/neighbor_table.hpp"
#include "lram/qp.hpp"
#include "oracle.hpp"

#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

using namespace lram;
namespace fs = std::filesystem;

namespace {

Eigen::VectorXd to_eigen(const LatticePoint& k) {
  Eigen::VectorXd v(kDim);
  for (int i = 0; i < kDim; ++i) v[i] = k[i];
  return v;
}

// Vertices of the fundamental region: every 8 of the 10 constraints taken
// as equalities, kept when the solution is unique and feasible.
std::vector<Vec8> region_vertices() {
  const Halfspaces h = fundamental_region_constraints();
  std::vector<Vec8> out;
  const int m = static_cast<int>(h.A.rows());
  for (int skip1 = 0; skip1 < m; ++skip1) {
    for (int skip2 = skip1 + 1; skip2 < m; ++skip2) {
      Eigen::MatrixXd A(kDim, kDim);
      Eigen::VectorXd b(kDim);
      int r = 0;
      for (int i = 0; i < m; ++i) {
        if (i == skip1 || i == skip2) continue;
        A.row(r) = h.A.row(i);
        b[r] = h.b[i];
        ++r;
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
      if (lu.rank() < kDim) continue;
      const Eigen::VectorXd x = lu.solve(b);
      Vec8 v;
      for (int i = 0; i < kDim; ++i) v[i] = x[i];
      if (in_fundamental_region(v, 1e-9)) out.push_back(v);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("embedded table: 232 distinct lattice points in lexicographic order") {
  const auto& t = neighbor_table();
  CHECK(t.count() == 232);
  CHECK(std::is_sorted(t.points.begin(), t.points.end()));
  CHECK(std::adjacent_find(t.points.begin(), t.points.end()) == t.points.end());
  for (const auto& k : t.points) CHECK(is_lattice_point(k));
  CHECK(t.contains(LatticePoint{}));
  CHECK(t.contains(LatticePoint{{4, 0, 0, 0, 0, 0, 0, 0}}));
  CHECK(checksum_hex(t.checksum()) == "626eb581");
}

TEST_CASE("regeneration reproduces the embedded table") {
  const auto t0 = std::chrono::steady_clock::now();
  const NeighborTable fresh = generate_neighbor_table();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(fresh.count() == 232);
  CHECK(fresh.points == neighbor_table().points);
  CHECK(secs < 60.0);
  CHECK(generate_neighbor_table().checksum() == fresh.checksum());
}

TEST_CASE("every table point has a feasible witness within the support radius") {
  const Halfspaces h = fundamental_region_constraints();
  for (const auto& k : neighbor_table().points) {
    const auto p = project_onto_polyhedron(h.A, h.b, to_eigen(k), Eigen::VectorXd::Zero(kDim));
    Vec8 x;
    for (int i = 0; i < kDim; ++i) x[i] = p.x[i];
    REQUIRE(in_fundamental_region(x, 1e-9));
    REQUIRE(squared_distance(x, k) < 8.0);
  }
}

TEST_CASE("table covers every lattice point near the fundamental region (sampling oracle)") {
  const auto& t = neighbor_table();
  std::set<LatticePoint> table(t.points.begin(), t.points.end());
  std::set<LatticePoint> seen;

  const auto vertices = region_vertices();
  CHECK(vertices.size() >= 9);
  std::vector<Vec8> probes = vertices;
  // Closest region point of every table entry.
  const Halfspaces h = fundamental_region_constraints();
  for (const auto& k : t.points) {
    const auto p = project_onto_polyhedron(h.A, h.b, to_eigen(k), Eigen::VectorXd::Zero(kDim));
    Vec8 x;
    for (int i = 0; i < kDim; ++i) x[i] = p.x[i];
    probes.push_back(x);
  }
  std::mt19937_64 rng(201);
  // Uniform points of the region (images of uniform points), plus random
  // convex combinations of vertices to reach its corners.
  for (int i = 0; i < 30000; ++i) probes.push_back(canonicalize(oracle::uniform_point(rng, -8, 8)).point);
  std::gamma_distribution<double> gamma(0.3, 1.0);
  for (int i = 0; i < 30000; ++i) {
    std::vector<double> w(vertices.size());
    double s = 0;
    for (auto& x : w) s += (x = gamma(rng));
    Vec8 p{};
    for (std::size_t v = 0; v < vertices.size(); ++v) {
      for (int j = 0; j < kDim; ++j) p[j] += w[v] / s * vertices[v][j];
    }
    probes.push_back(p);
  }
  for (const auto& z : probes) {
    for (const auto& k : oracle::points_within(z, 8.0)) {
      // Vertices come from an LU solve; d2 == 8 can round just below.
      if (squared_distance(z, k) > 8.0 - 1e-9) continue;
      REQUIRE(table.contains(k));
      seen.insert(k);
    }
  }
  // Sampling reaches (nearly) all of the table.
  CHECK(seen == table);
}

TEST_CASE("inverse-mapped table contains the whole kernel support of any query") {
  std::mt19937_64 rng(202);
  const auto& pts = neighbor_table().points;
  for (int i = 0; i < 5000; ++i) {
    const Vec8 q = oracle::uniform_point(rng, -10, 10);
    const Canonical c = canonicalize(q);
    std::set<LatticePoint> mapped;
    for (const auto& k : pts) mapped.insert(c.iso.apply_inverse(k));
    for (const auto& k : oracle::points_within(q, 8.0 - 1e-9)) REQUIRE(mapped.contains(k));
  }
}

TEST_CASE("neighbor_squared_distances matches direct evaluation") {
  std::mt19937_64 rng(203);
  const auto& pts = neighbor_table().points;
  std::array<double, kNeighborCount> d2;
  for (int i = 0; i < 100; ++i) {
    const Vec8 z = canonicalize(oracle::uniform_point(rng, -4, 4)).point;
    neighbor_squared_distances(z, d2);
    for (std::size_t j = 0; j < kNeighborCount; ++j) REQUIRE(d2[j] == doctest::Approx(squared_distance(z, pts[j])));
  }
}

TEST_CASE("distance to the fundamental region") {
  CHECK(squared_distance_to_fundamental_region(LatticePoint{}) == doctest::Approx(0.0));
  // (4,0,...) projects onto the deep hole (2,0,...).
  CHECK(squared_distance_to_fundamental_region(LatticePoint{{4, 0, 0, 0, 0, 0, 0, 0}}) == doctest::Approx(4.0));
}

TEST_CASE("artifact round trip and corruption detection") {
  const fs::path dir = fs::temp_directory_path() / "lram_table_test";
  fs::create_directories(dir);
  const fs::path bin = dir / "t.bin", meta = dir / "t.json";
  write_neighbor_table(neighbor_table(), bin, meta);
  CHECK(read_neighbor_table(bin, meta).points == neighbor_table().points);

  {
    std::fstream f(bin, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(40);
    f.put('\x7f');
  }
  CHECK_THROWS_AS(read_neighbor_table(bin, meta), std::runtime_error);

  write_neighbor_table(neighbor_table(), bin, meta);
  fs::resize_file(bin, fs::file_size(bin) - 4);
  CHECK_THROWS_AS(read_neighbor_table(bin, meta), std::runtime_error);
  CHECK_THROWS_AS(read_neighbor_table(dir / "missing.bin", meta), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("generated source embeds every point") {
  const std::string src = neighbor_table_source(neighbor_table());
  CHECK(std::count(src.begin(), src.end(), '\n') >= 232);
  CHECK(src.find("{4, 0, 0, 0, 0, 0, 0, 0},") != std::string::npos);
  CHECK(src.find(checksum_hex(neighbor_table().checksum())) != std::string::npos);
}
