#include "lram/report.hpp"
#include "lram/training.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace lram;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d(0, 1);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

ToyConfig small_config() {
  ToyConfig c;
  c.keys = 256;
  c.steps = 40;
  c.batch = 16;
  c.model.input_dim = 8;
  c.model.output_dim = 8;
  c.model.shape = {1, 8};
  return c;
}

}  // namespace

TEST_CASE("utilisation of closed-form access patterns") {
  AccessStats uniform(1 << 16);
  for (uint64_t s = 0; s < uniform.accumulated_weight.size(); ++s) uniform.record(s, 0.5);
  UtilisationReport r = utilisation(uniform);
  CHECK(r.usage_fraction == 1.0);
  CHECK(r.kl_divergence == doctest::Approx(0.0).epsilon(1e-12).scale(1));
  CHECK(r.histogram[5] == (1u << 16));  // p * N == 1 lands in [1, 2)

  AccessStats single(1 << 16);
  single.record(123, 2.0);
  r = utilisation(single);
  CHECK(r.used_slots == 1);
  CHECK(r.kl_divergence == doctest::Approx(std::log(65536.0)));
  CHECK(r.kl_divergence == doctest::Approx(11.09).epsilon(1e-3));
  CHECK(r.histogram[0] == 65535);

  AccessStats half(4);
  half.record(0, 1.0);
  half.record(1, 1.0);
  r = utilisation(half);
  CHECK(r.usage_fraction == 0.5);
  CHECK(r.kl_divergence == doctest::Approx(std::log(2.0)));

  CHECK_THROWS_AS(utilisation(AccessStats(8)), std::invalid_argument);
}

TEST_CASE("parameter counts") {
  CHECK(param_count(512, 4, 64, 0, LayerKind::dense) == 2097152);
  CHECK(param_count(512, 4, 64, 1 << 18, LayerKind::lram) == 18087936);
  CHECK(param_count(512, 4, 512, 1 << 16, LayerKind::pkm) == 512ull * 65536 + 2 * 512 * 256 + 512 * 512);
  CHECK(param_count(256, 4, 64, 1 << 22, LayerKind::lram) - 5ull * 256 * 256 == (1ull << 28));
}

TEST_CASE("mse loss and gradient") {
  std::vector<double> g(2);
  CHECK(mse_loss(std::vector<double>{1, 3}, std::vector<double>{0, 1}, g) == doctest::Approx(2.5));
  CHECK(g[0] == doctest::Approx(1.0));
  CHECK(g[1] == doctest::Approx(2.0));
  CHECK_THROWS_AS(mse_loss(std::vector<double>{1}, std::vector<double>{0, 1}, g), std::invalid_argument);
}

TEST_CASE("affine backward matches finite differences") {
  std::mt19937_64 rng(801);
  AffineView a{3, 2, 1};
  auto params = random_vector(rng, 1 + a.size());
  const auto x = random_vector(rng, 6);  // batch 2
  const auto u = random_vector(rng, 4);
  std::vector<double> y(4), grads(params.size(), 0.0), dx(6);
  a.backward(params, x, u, 2, grads, dx);
  auto loss = [&](const std::vector<double>& p, const std::vector<double>& xx) {
    a.forward(p, xx, 2, y);
    return dot(u, y);
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto pp = params, pm = params;
    pp[i] += 1e-6;
    pm[i] -= 1e-6;
    CHECK(grads[i] == doctest::Approx((loss(pp, x) - loss(pm, x)) / 2e-6).epsilon(1e-6).scale(1));
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto xp = x, xm = x;
    xp[i] += 1e-6;
    xm[i] -= 1e-6;
    CHECK(dx[i] == doctest::Approx((loss(params, xp) - loss(params, xm)) / 2e-6).epsilon(1e-6).scale(1));
  }
}

TEST_CASE("query norm standardises and backpropagates") {
  std::mt19937_64 rng(802);
  const std::size_t batch = 6, f = 4;
  auto x = random_vector(rng, batch * f);
  for (auto& v : x) v = 3 * v + 1;
  const auto u = random_vector(rng, batch * f);
  QueryNorm norm(f);
  std::vector<double> y(x.size()), dx(x.size());
  norm.forward(x, batch, y, true);
  for (std::size_t j = 0; j < f; ++j) {
    double mean = 0, var = 0;
    for (std::size_t b = 0; b < batch; ++b) mean += y[b * f + j] / batch;
    for (std::size_t b = 0; b < batch; ++b) var += (y[b * f + j] - mean) * (y[b * f + j] - mean) / batch;
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-12).scale(1));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
  norm.backward(u, batch, dx);
  auto loss = [&](const std::vector<double>& xx) {
    QueryNorm fresh(f);
    std::vector<double> yy(xx.size());
    fresh.forward(xx, batch, yy, true);
    return dot(u, yy);
  };
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto xp = x, xm = x;
    xp[i] += 1e-6;
    xm[i] -= 1e-6;
    CHECK(dx[i] == doctest::Approx((loss(xp) - loss(xm)) / 2e-6).epsilon(1e-5).scale(1));
  }
}

TEST_CASE("memory model backward matches finite differences") {
  for (bool with_norm : {false, true}) {
    MemoryModelConfig cfg;
    cfg.input_dim = 6;
    cfg.output_dim = 3;
    cfg.shape = {1, 4};
    cfg.query_norm = with_norm;
    cfg.query_init_scale = 4.0;
    MemoryModel model(cfg, 3);
    std::mt19937_64 rng(803);
    const std::size_t batch = 4;
    const auto x = random_vector(rng, batch * 6);
    const auto u = random_vector(rng, batch * 3);
    model.forward(x, batch, true);
    const auto g = model.backward(u);
    auto loss = [&] { return dot(u, model.forward(x, batch, true)); };
    int agree = 0, total = 0;
    auto params = model.dense_params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double saved = params[i];
      params[i] = saved + 1e-6;
      const double lp = loss();
      params[i] = saved - 1e-6;
      const double lm = loss();
      params[i] = saved;
      const double fd = (lp - lm) / 2e-6;
      ++total;
      if (std::abs(fd - g.dense[i]) <= 1e-5 * std::max(1.0, std::abs(fd))) ++agree;
    }
    // A few perturbations may cross a top-32 rank swap.
    CHECK(agree >= total - 2);
  }
}

TEST_CASE("dense control backward matches finite differences") {
  DenseModel model(5, 7, 3, 4);
  std::mt19937_64 rng(804);
  const auto x = random_vector(rng, 10);
  const auto u = random_vector(rng, 6);
  model.forward(x, 2);
  const auto g = model.backward(u);
  auto params = model.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + 1e-6;
    const double lp = dot(u, model.forward(x, 2));
    params[i] = saved - 1e-6;
    const double lm = dot(u, model.forward(x, 2));
    params[i] = saved;
    CHECK(g[i] == doctest::Approx((lp - lm) / 2e-6).epsilon(1e-6).scale(1));
  }
}

TEST_CASE("training is deterministic and logs every step") {
  const ToyConfig c = small_config();
  std::size_t seen = 0;
  const ToyResult a = run_toy_training(c, [&](const StepRecord&) { ++seen; });
  const ToyResult b = run_toy_training(c);
  CHECK(seen == c.steps);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].step == i + 1);
    CHECK(a.log[i].loss == b.log[i].loss);
    CHECK(a.log[i].touched_slots == b.log[i].touched_slots);
  }
  CHECK(a.final_loss == b.final_loss);
  CHECK(a.final_loss < a.initial_loss);
  CHECK(run_dense_control(c).final_loss == run_dense_control(c).final_loss);
}

TEST_CASE("toy task uses more than half of 2^16 slots") {
  ToyConfig c;
  c.steps = 200;
  const ToyResult r = run_toy_training(c);
  CHECK(r.utilisation.slots == 65536);
  CHECK(r.utilisation.usage_fraction > 0.5);
  CHECK(r.final_loss < r.initial_loss);
}

TEST_CASE("dense control is matched to the memory model's dense parameters") {
  const ToyConfig c;
  const MemoryModel m(c.model, 1);
  const ControlResult ctl = run_dense_control([&] {
    ToyConfig s = c;
    s.steps = 1;
    return s;
  }());
  CHECK(ctl.params >= m.dense_param_count());
  CHECK(ctl.params - m.dense_param_count() < c.model.input_dim + 1 + c.model.output_dim);
}

TEST_CASE("config file parsing") {
  using nlohmann::json;
  const ToyConfig c = toy_config_from_json(json{{"seed", 9}, {"steps", 10}, {"locations", "small"}, {"query_norm", true}});
  CHECK(c.seed == 9);
  CHECK(c.steps == 10);
  CHECK(TorusConfig(c.model.periods).slot_count() == (1u << 18));
  CHECK(c.model.query_norm);
  CHECK(toy_config_from_json(to_json(c)).model.periods == c.model.periods);
  CHECK_THROWS_AS(toy_config_from_json(json{{"stepz", 10}}), ConfigError);
  CHECK_THROWS_AS(toy_config_from_json(json{{"steps", "ten"}}), ConfigError);
  CHECK_THROWS_AS(toy_config_from_json(json{{"steps", 0}}), ConfigError);
  CHECK_THROWS_AS(toy_config_from_json(json{{"periods", {8, 8, 8}}}), ConfigError);
  CHECK_THROWS_AS(toy_config_from_json(json{{"periods", {6, 8, 8, 8, 8, 8, 8, 8}}}), ConfigError);
  CHECK_THROWS_AS(toy_config_from_json(json::array()), ConfigError);
  const json line = to_json(StepRecord{3, 0.5, 17}, c);
  CHECK(line["step"] == 3);
  CHECK(line["lr"]["memory"] == kMemoryLearningRate);
  CHECK(line["touched_slots"] == 17);
}
