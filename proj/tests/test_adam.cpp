#include "lram/adam.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace lram;

namespace {

// Textbook Adam, one parameter at a time.
struct RefAdam {
  AdamConfig c;
  std::vector<double> m, v;
  void step(std::vector<double>& p, const std::vector<double>& g, int t) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1 - c.beta2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(c.beta1, t));
      const double vh = v[i] / (1 - std::pow(c.beta2, t));
      p[i] -= c.lr * mh / (std::sqrt(vh) + c.eps);
    }
  }
};

SparseRowGrad all_rows(std::size_t rows, std::size_t dim, const std::vector<double>& g) {
  SparseRowGrad s;
  s.dim = dim;
  for (std::size_t r = 0; r < rows; ++r) s.slots.push_back(r);
  s.rows = g;
  return s;
}

}  // namespace

TEST_CASE("zero gradients leave parameters unchanged") {
  DenseAdam adam(4, {});
  std::vector<double> p{1, 2, 3, 4};
  const auto before = p;
  for (uint64_t t = 1; t <= 5; ++t) adam.update(p, std::vector<double>(4, 0.0), t);
  CHECK(p == before);
}

TEST_CASE("dense Adam matches the reference") {
  std::mt19937_64 rng(701);
  std::normal_distribution<double> n(0, 1);
  const AdamConfig cfg{1e-2};
  DenseAdam adam(10, cfg);
  RefAdam ref{cfg, std::vector<double>(10, 0), std::vector<double>(10, 0)};
  std::vector<double> p(10), q;
  for (auto& x : p) x = n(rng);
  q = p;
  for (int t = 1; t <= 50; ++t) {
    std::vector<double> g(10);
    for (auto& x : g) x = n(rng);
    adam.update(p, g, t);
    ref.step(q, g, t);
  }
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-12));
}

TEST_CASE("lazy row Adam equals dense Adam when every row is touched") {
  std::mt19937_64 rng(702);
  std::normal_distribution<double> n(0, 1);
  const std::size_t rows = 20, dim = 5;
  const AdamConfig cfg{1e-3};
  ValueTable table(rows, dim);
  table.init_gaussian(1);
  std::vector<double> flat(table.data().begin(), table.data().end());
  LazyRowAdam lazy(rows, dim, cfg);
  DenseAdam dense(rows * dim, cfg);
  for (int t = 1; t <= 100; ++t) {
    std::vector<double> g(rows * dim);
    for (auto& x : g) x = n(rng);
    lazy.update(table, all_rows(rows, dim, g), t);
    dense.update(flat, g, t);
  }
  for (std::size_t i = 0; i < flat.size(); ++i) REQUIRE(std::abs(table.data()[i] - flat[i]) <= 1e-12);
}

TEST_CASE("untouched rows stay bitwise identical; moments fast-forward") {
  const AdamConfig cfg{1e-3};
  ValueTable table(4, 2);
  table.init_gaussian(2);
  const ValueTable before = table;
  LazyRowAdam lazy(4, 2, cfg);

  SparseRowGrad g;
  g.dim = 2;
  g.slots = {1};
  g.rows = {1.0, -2.0};
  lazy.update(table, g, 1);
  CHECK(lazy.last_step(1) == 1);
  CHECK(lazy.last_step(0) == 0);
  for (uint64_t r : {0, 2, 3}) {
    CHECK(std::equal(table.row(r).begin(), table.row(r).end(), before.row(r).begin()));
  }
  const double m_after_1 = lazy.first_moment(1)[0];
  CHECK(m_after_1 == doctest::Approx(0.1));

  // Row 1 sits out steps 2..4 and is touched again at step 5 with a zero
  // gradient: the first moment decays by beta1^3 then once more by the update.
  g.rows = {0.0, 0.0};
  lazy.update(table, g, 5);
  CHECK(lazy.first_moment(1)[0] == doctest::Approx(m_after_1 * std::pow(0.9, 4)).epsilon(1e-14));
}

TEST_CASE("sparse step rejects non-finite gradients without side effects") {
  OptimizerState state(3, 4, 2);
  CHECK(state.dense.config().lr == kDenseLearningRate);
  CHECK(state.memory.config().lr == kMemoryLearningRate);
  std::vector<double> p{1, 2, 3};
  ValueTable table(4, 2);
  table.init_gaussian(3);
  const ValueTable before = table;
  SparseRowGrad g;
  g.dim = 2;
  g.slots = {0};
  g.rows = {std::numeric_limits<double>::quiet_NaN(), 0.0};
  CHECK_THROWS_AS(sparse_adam_step(state, p, std::vector<double>{0.1, 0.1, 0.1}, table, g), NonFiniteGradient);
  CHECK(state.step == 0);
  CHECK(table == before);
  CHECK(p == std::vector<double>{1, 2, 3});

  g.rows = {0.5, 0.5};
  CHECK_THROWS_AS(sparse_adam_step(state, p, std::vector<double>{0.1, INFINITY, 0.1}, table, g), NonFiniteGradient);
  CHECK(p == std::vector<double>{1, 2, 3});

  sparse_adam_step(state, p, std::vector<double>{0.1, 0.1, 0.1}, table, g);
  CHECK(state.step == 1);
  CHECK(p[0] == doctest::Approx(1 - 1e-4).epsilon(1e-9));
  CHECK(table.row(0)[0] == doctest::Approx(before.row(0)[0] - 1e-3).epsilon(1e-9));
  CHECK(std::equal(table.row(1).begin(), table.row(1).end(), before.row(1).begin()));

  CHECK_THROWS_AS(sparse_adam_step(state, p, std::vector<double>{0.1}, table, g), std::invalid_argument);
}
