#include "lram/verify.hpp"

#include "lram/bench.hpp"
#include "lram/kernel.hpp"
#include "lram/layer.hpp"
#include "lram/neighbor_table.hpp"
#include "lram/torus.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

namespace lram {

using nlohmann::json;

namespace {

constexpr uint64_t kBlockSize = 1 << 16;

std::mt19937_64 block_rng(uint64_t seed, uint64_t block) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), static_cast<uint32_t>(block),
                    static_cast<uint32_t>(block >> 32)};
  return std::mt19937_64(seq);
}

struct BlockAccumulator {
  uint64_t n = 0;
  double sum_support = 0.0, sum_support2 = 0.0;
  double sum_weight = 0.0;
  double sum_cov = 0.0, sum_cov2 = 0.0;
  int min_support = std::numeric_limits<int>::max();
  int max_support = 0;
  double min_weight = std::numeric_limits<double>::infinity();
  double max_weight = -std::numeric_limits<double>::infinity();
  double min_cov = std::numeric_limits<double>::infinity();
  Vec8 min_support_point{}, max_support_point{}, min_weight_point{};
};

BlockAccumulator sample_block(uint64_t seed, uint64_t block, uint64_t count) {
  auto rng = block_rng(seed, block);
  std::uniform_real_distribution<double> coord(0.0, 4.0);
  BlockAccumulator a;
  for (uint64_t i = 0; i < count; ++i) {
    Vec8 q;
    for (auto& x : q) x = coord(rng);
    const NeighborhoodStats s = neighborhood_stats(q, kTopK);
    const double cov = s.top_k_weight / s.total_weight;
    ++a.n;
    a.sum_support += s.support_count;
    a.sum_support2 += static_cast<double>(s.support_count) * s.support_count;
    a.sum_weight += s.total_weight;
    a.sum_cov += cov;
    a.sum_cov2 += cov * cov;
    if (s.support_count < a.min_support) {
      a.min_support = s.support_count;
      a.min_support_point = q;
    }
    if (s.support_count > a.max_support) {
      a.max_support = s.support_count;
      a.max_support_point = q;
    }
    if (s.total_weight < a.min_weight) {
      a.min_weight = s.total_weight;
      a.min_weight_point = q;
    }
    a.max_weight = std::max(a.max_weight, s.total_weight);
    a.min_cov = std::min(a.min_cov, cov);
  }
  return a;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json vec_json(const Vec8& v) { return json(std::vector<double>(v.begin(), v.end())); }

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Shared across criteria within one run.
struct Context {
  const VerifyOptions& opt;
  std::optional<SupportSampleStats> support;

  const SupportSampleStats& support_stats() {
    if (!support) support = sample_support_statistics(opt.support_samples, opt.seed, opt.threads);
    return *support;
  }
};

// ---------------------------------------------------------------------------

CriterionResult neighbor_table_count(Context& ctx) {
  CriterionResult r;
  const auto t0 = std::chrono::steady_clock::now();
  NeighborTable table;
  try {
    table = generate_neighbor_table();
  } catch (const std::exception& e) {
    r.summary = std::string("generation failed: ") + e.what();
    return r;
  }
  const double secs = seconds_since(t0);
  const auto& embedded = neighbor_table();
  const bool matches = table.points == embedded.points;
  r.details = {{"count", table.count()},
               {"expected", kNeighborCount},
               {"checksum", checksum_hex(table.checksum())},
               {"embedded_checksum", checksum_hex(embedded.checksum())},
               {"matches_embedded", matches},
               {"generation_seconds", secs}};
  bool artifact_ok = true;
  if (ctx.opt.table_artifact) {
    auto json_path = *ctx.opt.table_artifact;
    json_path.replace_extension(".json");
    try {
      const NeighborTable stored = read_neighbor_table(*ctx.opt.table_artifact, json_path);
      artifact_ok = stored.points == embedded.points;
      r.details["artifact"] = {{"path", ctx.opt.table_artifact->string()},
                               {"checksum", checksum_hex(stored.checksum())},
                               {"matches_embedded", artifact_ok}};
    } catch (const std::exception& e) {
      artifact_ok = false;
      r.details["artifact"] = {{"path", ctx.opt.table_artifact->string()}, {"error", e.what()}};
    }
  }
  r.passed = table.count() == kNeighborCount && matches && artifact_ok && secs < 60.0;
  r.summary = fmt("count=%zu checksum=%s generated in %.3fs", table.count(), checksum_hex(table.checksum()).c_str(), secs);
  return r;
}

CriterionResult minimal_vectors(Context&) {
  CriterionResult r;
  std::vector<LatticePoint> found;
  std::array<int32_t, kDim> c;
  c.fill(-3);
  for (;;) {
    int n2 = 0;
    for (int v : c) n2 += v * v;
    if (n2 == 8 && is_lattice_point(c)) found.push_back(LatticePoint{c});
    int i = kDim - 1;
    while (i >= 0 && c[i] == 3) c[i--] = -3;
    if (i < 0) break;
    ++c[i];
  }
  const auto constructed = min_vectors();
  const bool same = found == constructed;
  r.passed = found.size() == 240 && same;
  r.details = {{"enumerated", found.size()}, {"expected", 240}, {"box", "[-3,3]^8"}, {"matches_min_vectors", same}};
  r.summary = fmt("%zu vectors of squared norm 8 in [-3,3]^8", found.size());
  return r;
}

CriterionResult support_statistics(Context& ctx) {
  CriterionResult r;
  const auto& s = ctx.support_stats();
  const int probe = support_count_near_lattice_point();
  const bool min_ok = s.min_support == 45;
  const bool max_ok = s.max_support == 121;
  const bool mean_ok = std::abs(s.mean_support - 64.94) <= 0.05;
  const bool time_ok = ctx.opt.threads > 1 || s.seconds <= 600.0;
  r.passed = min_ok && max_ok && mean_ok && time_ok;
  r.details = to_json(s);
  r.details["expected"] = {{"min", 45}, {"max", 121}, {"mean", 64.94}, {"mean_tolerance", 0.05}};
  r.details["checks"] = {{"min", min_ok}, {"max", max_ok}, {"mean", mean_ok}, {"runtime", time_ok}};
  r.details["support_just_off_lattice_point"] = probe;
  r.summary = fmt("samples=%llu min=%d max=%d mean=%.4f (se %.4f) in %.1fs; just off a lattice point: %d",
                  static_cast<unsigned long long>(s.samples), s.min_support, s.max_support, s.mean_support,
                  s.support_stderr, s.seconds, probe);
  return r;
}

CriterionResult analytic_averages(Context&) {
  CriterionResult r;
  r.passed = true;
  r.details = json::array();
  std::ostringstream os;
  for (const auto& row : reference_lattices()) {
    const double got = expected_support_count(row.dimension, row.covering_radius);
    const double rel = std::abs(got - row.mean_support) / row.mean_support;
    const bool ok = rel <= 0.005;
    r.passed = r.passed && ok;
    r.details.push_back({{"lattice", row.name},
                         {"dimension", row.dimension},
                         {"covering_radius", row.covering_radius},
                         {"computed", got},
                         {"expected", row.mean_support},
                         {"relative_error", rel},
                         {"passed", ok}});
    os << row.name << '=' << fmt("%.2f", got) << ' ';
  }
  r.summary = os.str() + "(tolerance 0.5%)";
  return r;
}

CriterionResult weight_bounds(Context& ctx) {
  CriterionResult r;
  const auto& s = ctx.support_stats();
  const double lower = total_weight_lower_bound();
  const bool sample_ok = s.min_total_weight >= lower - 1e-9 && s.max_total_weight <= 1.0 + 1e-9;

  std::mt19937_64 rng(ctx.opt.seed ^ 0x5eedULL);
  std::uniform_real_distribution<double> coord(-64.0, 64.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < ctx.opt.lattice_points; ++i) {
    Vec8 q;
    for (auto& x : q) x = coord(rng);
    const LatticePoint k = decode(q);
    worst = std::max(worst, std::abs(total_weight(k.as_vec()) - 1.0));
  }
  const Vec8 deep_hole{2, 0, 0, 0, 0, 0, 0, 0};
  const double hole = total_weight(deep_hole);
  const bool lattice_ok = worst <= 1e-9;
  const bool hole_ok = std::abs(hole - 1.0) <= 1e-9;
  r.passed = sample_ok && lattice_ok && hole_ok;
  r.details = {{"samples", s.samples},
               {"lower_bound", lower},
               {"min_total_weight", s.min_total_weight},
               {"max_total_weight", s.max_total_weight},
               {"mean_total_weight", s.mean_total_weight},
               {"min_weight_point", vec_json(s.min_weight_point)},
               {"lattice_points", ctx.opt.lattice_points},
               {"lattice_max_deviation", worst},
               {"deep_hole_weight", hole}};
  r.summary = fmt("sampled weight in [%.6f, %.6f] (bound %.6f); lattice points |w-1|<=%.1e; deep hole %.12f",
                  s.min_total_weight, s.max_total_weight, lower, worst, hole);
  return r;
}

CriterionResult coverage(Context& ctx) {
  CriterionResult r;
  const auto s = sample_support_statistics(ctx.opt.coverage_samples, ctx.opt.seed + 1, ctx.opt.threads);
  r.passed = s.mean_coverage >= 0.99 && s.mean_coverage <= 1.0 && s.min_coverage >= 0.90;
  r.details = {{"samples", s.samples},
               {"mean_coverage", s.mean_coverage},
               {"coverage_stderr", s.coverage_stderr},
               {"min_coverage", s.min_coverage},
               {"top_k", kTopK}};
  r.summary = fmt("samples=%llu mean=%.5f (se %.5f) min=%.4f", static_cast<unsigned long long>(s.samples),
                  s.mean_coverage, s.coverage_stderr, s.min_coverage);
  return r;
}

// Why a point was skipped by the finite-difference comparison, or nullptr.
const char* gradient_exclusion(std::span<const double> z, const TorusConfig& cfg, double step) {
  const HeadQuery h = head_query(z, cfg);
  if (*std::min_element(h.modulus.begin(), h.modulus.end()) < 1e-3) return "small_modulus";
  const Canonical c = canonicalize(h.q);
  std::array<double, kNeighborCount> d2;
  neighbor_squared_distances(c.point, d2);
  const double edge = std::sqrt(kSupportRadius2);
  std::vector<double> w;
  for (double d : d2) {
    if (std::abs(std::sqrt(d) - edge) < 1e-3) return "support_shell";
    if (d < kSupportRadius2) w.push_back(kernel_eval(d));
  }
  if (w.size() > static_cast<std::size_t>(kTopK)) {
    // One step moves a single q_i by at most dq; each weight then moves by at
    // most |grad w| * dq <= sqrt(8) * dq.
    double dq = 0.0;
    for (int i = 0; i < kDim; ++i) dq = std::max(dq, cfg.period(i) / (2 * std::numbers::pi) * step / h.modulus[i]);
    std::sort(w.begin(), w.end(), std::greater<>());
    if (w[kTopK - 1] - w[kTopK] < 4 * std::sqrt(kSupportRadius2) * dq) return "top_k_cut";
  }
  return nullptr;
}

CriterionResult gradient_check(Context& ctx) {
  CriterionResult r;
  const TorusConfig cfg = TorusConfig::preset("base");
  const LayerShape shape{1, 8};
  ValueTable values(cfg.slot_count(), static_cast<std::size_t>(shape.value_dim));
  values.init_gaussian(ctx.opt.seed + 11);
  std::mt19937_64 rng(ctx.opt.seed + 12);
  std::normal_distribution<double> normal(0.0, 1.0);
  constexpr double h = 1e-6;

  auto loss = [&](std::span<const double> z, std::span<const double> u) {
    const auto y = theta_forward(z, 1, cfg, shape, values);
    double s = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) s += u[j] * y[j];
    return s;
  };

  std::map<std::string, std::size_t> excluded;
  double worst_input = 0.0, worst_value = 0.0;
  std::size_t accepted = 0, attempts = 0;
  std::vector<double> z(kHeadInputWidth), u(static_cast<std::size_t>(shape.value_dim));
  while (accepted < ctx.opt.gradient_points && attempts < 100 * ctx.opt.gradient_points) {
    ++attempts;
    for (auto& x : z) x = normal(rng);
    for (auto& x : u) x = normal(rng);
    if (const char* why = gradient_exclusion(z, cfg, h)) {
      ++excluded[why];
      continue;
    }
    const ThetaGrad g = theta_backward(z, 1, cfg, shape, values, u);
    std::vector<double> fd(kHeadInputWidth), diff(kHeadInputWidth);
    for (int i = 0; i < kHeadInputWidth; ++i) {
      auto zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      fd[i] = (loss(zp, u) - loss(zm, u)) / (2 * h);
      diff[i] = g.grad_input[i] - fd[i];
    }
    const double scale = std::max(norm(fd), norm(g.grad_input));
    if (scale > 0) worst_input = std::max(worst_input, norm(diff) / scale);

    // The loss is linear in each value row; probe the heaviest one.
    if (g.grad_values.size() > 0) {
      std::size_t heaviest = 0;
      for (std::size_t k = 1; k < g.grad_values.size(); ++k) {
        if (norm(g.grad_values.row(k)) > norm(g.grad_values.row(heaviest))) heaviest = k;
      }
      auto row = values.row(g.grad_values.slots[heaviest]);
      std::vector<double> vd(row.size());
      for (std::size_t j = 0; j < row.size(); ++j) {
        const double saved = row[j];
        row[j] = saved + h;
        const double lp = loss(z, u);
        row[j] = saved - h;
        const double lm = loss(z, u);
        row[j] = saved;
        vd[j] = g.grad_values.row(heaviest)[j] - (lp - lm) / (2 * h);
      }
      const double vs = norm(g.grad_values.row(heaviest));
      if (vs > 0) worst_value = std::max(worst_value, norm(vd) / vs);
    }
    ++accepted;
  }
  r.passed = accepted == ctx.opt.gradient_points && worst_input < 1e-4 && worst_value < 1e-4;
  r.details = {{"points", accepted},
               {"attempts", attempts},
               {"excluded", excluded},
               {"step", h},
               {"max_relative_error_input", worst_input},
               {"max_relative_error_values", worst_value},
               {"tolerance", 1e-4}};
  r.summary = fmt("points=%zu max rel err input=%.2e values=%.2e (excluded %zu)", accepted, worst_input, worst_value,
                  attempts - accepted);
  return r;
}

CriterionResult homogeneity(Context& ctx) {
  CriterionResult r;
  const TorusConfig cfg = TorusConfig::preset("base");
  const LayerShape shape{1, 16};
  ValueTable values(cfg.slot_count(), static_cast<std::size_t>(shape.value_dim));
  values.init_gaussian(ctx.opt.seed + 21);
  std::mt19937_64 rng(ctx.opt.seed + 22);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> lambda_dist(0.0, 10.0);
  double worst = 0.0;
  std::vector<double> z(kHeadInputWidth), zl(kHeadInputWidth);
  for (std::size_t i = 0; i < ctx.opt.homogeneity_points; ++i) {
    for (auto& x : z) x = normal(rng);
    const double lambda = i == 0 ? 0.0 : lambda_dist(rng);
    for (std::size_t j = 0; j < z.size(); ++j) zl[j] = lambda * z[j];
    const auto a = theta_forward(zl, 1, cfg, shape, values);
    auto b = theta_forward(z, 1, cfg, shape, values);
    std::vector<double> d(b.size());
    for (std::size_t j = 0; j < b.size(); ++j) {
      b[j] *= lambda;
      d[j] = a[j] - b[j];
    }
    const double nb = norm(b);
    const double err = nb > 0 ? norm(d) / nb : norm(a);
    worst = std::max(worst, err);
  }
  r.passed = worst < 1e-9;
  r.details = {{"points", ctx.opt.homogeneity_points}, {"max_relative_error", worst}, {"tolerance", 1e-9}};
  r.summary = fmt("points=%zu max rel err=%.2e", ctx.opt.homogeneity_points, worst);
  return r;
}

CriterionResult interpolation(Context& ctx) {
  CriterionResult r;
  const TorusConfig cfg = TorusConfig::preset("base");
  ValueTable values(cfg.slot_count(), 64);
  values.init_gaussian(ctx.opt.seed + 31);
  std::mt19937_64 rng(ctx.opt.seed + 32);
  std::uniform_int_distribution<uint64_t> slot_dist(0, cfg.slot_count() - 1);
  std::uniform_int_distribution<int> wind(-3, 3);
  double worst = 0.0;
  std::size_t max_neighbors = 0;
  std::vector<double> out(64);
  for (std::size_t i = 0; i < ctx.opt.lattice_points; ++i) {
    const uint64_t slot = slot_dist(rng);
    Vec8 q = slot_representative(slot, cfg).as_vec();
    for (int d = 0; d < kDim; ++d) q[d] += cfg.period(d) * wind(rng);
    const LookupResult lk = lookup(q, cfg);
    phi_forward(lk, values, std::span<double>(out));
    max_neighbors = std::max(max_neighbors, static_cast<std::size_t>(lk.count));
    const auto row = values.row(slot);
    double vmax = 0.0, diff = 0.0;
    for (std::size_t j = 0; j < out.size(); ++j) {
      vmax = std::max(vmax, std::abs(row[j]));
      diff = std::max(diff, std::abs(out[j] - row[j]));
    }
    worst = std::max(worst, vmax > 0 ? diff / vmax : diff);
  }
  const double tol = 4 * std::numeric_limits<double>::epsilon();
  r.passed = worst <= tol;
  r.details = {{"points", ctx.opt.lattice_points},
               {"max_relative_deviation", worst},
               {"tolerance", tol},
               {"max_retained_neighbors", max_neighbors}};
  r.summary = fmt("points=%zu max rel deviation=%.2e, retained neighbours per query <= %zu", ctx.opt.lattice_points,
                  worst, max_neighbors);
  return r;
}

CriterionResult scaling(Context& ctx) {
  CriterionResult r;
  BenchConfig bc;
  bc.widths = {ctx.opt.bench_width};
  bc.locations = {"base", "large"};
  bc.batch = ctx.opt.bench_batch;
  bc.dense = false;
  bc.seed = ctx.opt.seed;
  const auto entries = run_bench(bc);
  const double small = entries.at(0).median_us;
  const double large = entries.at(1).median_us;
  const double ratio = large / small;
  r.passed = ratio < 2.0;
  r.details = {{"width", ctx.opt.bench_width},
               {"batch", bc.batch},
               {"runs", bc.runs},
               {"slots_small", entries[0].slots},
               {"slots_large", entries[1].slots},
               {"median_us_small", small},
               {"median_us_large", large},
               {"ratio", ratio},
               {"limit", 2.0}};
  r.summary = fmt("w=%d: %.2f us/vector at 2^16 slots, %.2f us/vector at 2^22 slots, ratio %.3f",
                  ctx.opt.bench_width, small, large, ratio);
  return r;
}

CriterionResult toy_training(Context& ctx) {
  CriterionResult r;
  ToyConfig cfg = ctx.opt.toy;
  if (cfg.log_every == 1) cfg.log_every = 100;
  const ToyResult mem = run_toy_training(cfg);
  const ControlResult ctl = run_dense_control(cfg);
  const bool halves = mem.final_loss < 0.5 * mem.initial_loss;
  const bool beats = mem.final_loss < ctl.final_loss;
  const bool report = mem.utilisation.slots > 0;
  r.passed = halves && beats && report;
  r.details = {{"steps", cfg.steps},
               {"keys", cfg.keys},
               {"batch", cfg.batch},
               {"memory", {{"initial_loss", mem.initial_loss},
                           {"final_loss", mem.final_loss},
                           {"dense_params", mem.dense_params},
                           {"table_params", mem.table_params}}},
               {"control", {{"initial_loss", ctl.initial_loss},
                            {"final_loss", ctl.final_loss},
                            {"hidden", ctl.hidden},
                            {"params", ctl.params}}},
               {"utilisation", {{"slots", mem.utilisation.slots},
                                {"usage_fraction", mem.utilisation.usage_fraction},
                                {"kl_divergence", mem.utilisation.kl_divergence}}}};
  r.summary = fmt("loss %.4f -> %.4f (x%.3f); dense control %.4f -> %.4f; usage %.3f KL %.3f", mem.initial_loss,
                  mem.final_loss, mem.final_loss / mem.initial_loss, ctl.initial_loss, ctl.final_loss,
                  mem.utilisation.usage_fraction, mem.utilisation.kl_divergence);
  return r;
}

CriterionResult slot_bijection(Context&) {
  CriterionResult r;
  const TorusConfig cfg = TorusConfig::preset("base");
  std::vector<uint8_t> seen(cfg.slot_count(), 0);
  uint64_t points = 0, collisions = 0, out_of_range = 0, inverse_mismatch = 0;
  std::array<int32_t, kDim> c{};
  for (;;) {
    if (is_lattice_point(c)) {
      ++points;
      const LatticePoint k{c};
      const uint64_t s = slot_index(k, cfg);
      if (s >= seen.size()) {
        ++out_of_range;
      } else {
        if (seen[s]++) ++collisions;
        if (!(slot_representative(s, cfg) == k)) ++inverse_mismatch;
      }
    }
    int i = kDim - 1;
    while (i >= 0 && c[i] == 7) c[i--] = 0;
    if (i < 0) break;
    ++c[i];
  }
  const auto covered = static_cast<uint64_t>(std::count(seen.begin(), seen.end(), uint8_t{1}));
  r.passed = points == 65536 && covered == 65536 && collisions == 0 && out_of_range == 0 && inverse_mismatch == 0;
  r.details = {{"lattice_points_in_box", points},
               {"slots", cfg.slot_count()},
               {"covered", covered},
               {"collisions", collisions},
               {"out_of_range", out_of_range},
               {"inverse_mismatch", inverse_mismatch}};
  r.summary = fmt("%llu lattice points in [0,8)^8 -> %llu distinct slots, %llu collisions",
                  static_cast<unsigned long long>(points), static_cast<unsigned long long>(covered),
                  static_cast<unsigned long long>(collisions));
  return r;
}

using CriterionFn = CriterionResult (*)(Context&);

constexpr std::pair<const char*, CriterionFn> kCriteria[kCriterionCount] = {
    {"neighbor table count", neighbor_table_count},
    {"minimal vectors", minimal_vectors},
    {"kernel support statistics", support_statistics},
    {"analytic support averages", analytic_averages},
    {"total weight bounds", weight_bounds},
    {"top-32 coverage", coverage},
    {"gradient correctness", gradient_check},
    {"homogeneity", homogeneity},
    {"interpolation", interpolation},
    {"constant-cost scaling", scaling},
    {"toy training", toy_training},
    {"slot bijection", slot_bijection},
};

CriterionResult run_in(int id, Context& ctx) {
  if (id < 1 || id > kCriterionCount) throw std::out_of_range("unknown criterion " + std::to_string(id));
  const auto t0 = std::chrono::steady_clock::now();
  CriterionResult r;
  try {
    r = kCriteria[id - 1].second(ctx);
  } catch (const std::exception& e) {
    r.passed = false;
    r.summary = std::string("error: ") + e.what();
  }
  r.id = id;
  r.name = kCriteria[id - 1].first;
  r.seconds = seconds_since(t0);
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------

SupportSampleStats sample_support_statistics(uint64_t samples, uint64_t seed, int threads) {
  if (samples == 0) throw std::invalid_argument("sample_support_statistics: need at least one sample");
  const auto t0 = std::chrono::steady_clock::now();
  const uint64_t blocks = (samples + kBlockSize - 1) / kBlockSize;
  std::vector<BlockAccumulator> acc(blocks);
  std::atomic<uint64_t> next{0};
  auto worker = [&] {
    for (uint64_t b; (b = next.fetch_add(1)) < blocks;) {
      acc[b] = sample_block(seed, b, std::min(kBlockSize, samples - b * kBlockSize));
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  BlockAccumulator all;
  for (const auto& a : acc) {
    all.n += a.n;
    all.sum_support += a.sum_support;
    all.sum_support2 += a.sum_support2;
    all.sum_weight += a.sum_weight;
    all.sum_cov += a.sum_cov;
    all.sum_cov2 += a.sum_cov2;
    if (a.min_support < all.min_support) {
      all.min_support = a.min_support;
      all.min_support_point = a.min_support_point;
    }
    if (a.max_support > all.max_support) {
      all.max_support = a.max_support;
      all.max_support_point = a.max_support_point;
    }
    if (a.min_weight < all.min_weight) {
      all.min_weight = a.min_weight;
      all.min_weight_point = a.min_weight_point;
    }
    all.max_weight = std::max(all.max_weight, a.max_weight);
    all.min_cov = std::min(all.min_cov, a.min_cov);
  }

  const double n = static_cast<double>(all.n);
  auto stderr_of = [n](double sum, double sum2) {
    const double mean = sum / n;
    const double var = n > 1 ? std::max(0.0, (sum2 - n * mean * mean) / (n - 1)) : 0.0;
    return std::sqrt(var / n);
  };
  SupportSampleStats s;
  s.samples = all.n;
  s.min_support = all.min_support;
  s.max_support = all.max_support;
  s.mean_support = all.sum_support / n;
  s.support_stderr = stderr_of(all.sum_support, all.sum_support2);
  s.min_total_weight = all.min_weight;
  s.max_total_weight = all.max_weight;
  s.mean_total_weight = all.sum_weight / n;
  s.mean_coverage = all.sum_cov / n;
  s.coverage_stderr = stderr_of(all.sum_cov, all.sum_cov2);
  s.min_coverage = all.min_cov;
  s.min_support_point = all.min_support_point;
  s.max_support_point = all.max_support_point;
  s.min_weight_point = all.min_weight_point;
  s.seconds = seconds_since(t0);
  return s;
}

int support_count_near_lattice_point(double offset, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec8 u;
  for (auto& x : u) x = normal(rng);
  const double len = std::sqrt(squared_distance(u, Vec8{}));
  for (auto& x : u) x *= offset / len;
  return neighborhood_stats(u, 0).support_count;
}

std::span<const ReferenceLattice> reference_lattices() {
  // Covering radii of the determinant-1 scalings.
  static const ReferenceLattice rows[] = {
      {"Z8", 8, std::sqrt(2.0), 1039},
      {"E8", 8, 1.0, 64.94},
      {"K12", 12, std::sqrt(8.0 / 3.0) * std::pow(3.0, -0.25), 1138},
      {"Lambda16", 16, std::sqrt(3.0) * std::pow(2.0, -0.25), 24704},
      {"Lambda24", 24, std::sqrt(2.0), 32373},
  };
  return rows;
}

const char* criterion_name(int id) {
  if (id < 1 || id > kCriterionCount) throw std::out_of_range("unknown criterion " + std::to_string(id));
  return kCriteria[id - 1].first;
}

CriterionResult run_criterion(int id, const VerifyOptions& options) {
  Context ctx{options, std::nullopt};
  return run_in(id, ctx);
}

std::vector<CriterionResult> run_acceptance(const VerifyOptions& options,
                                            const std::function<void(const CriterionResult&)>& on_result) {
  Context ctx{options, std::nullopt};
  std::vector<CriterionResult> results;
  for (int id = 1; id <= kCriterionCount; ++id) {
    if (!options.only.empty() && std::find(options.only.begin(), options.only.end(), id) == options.only.end()) {
      continue;
    }
    results.push_back(run_in(id, ctx));
    if (on_result) on_result(results.back());
  }
  return results;
}

json to_json(const SupportSampleStats& s) {
  return {{"samples", s.samples},
          {"min_support", s.min_support},
          {"max_support", s.max_support},
          {"mean_support", s.mean_support},
          {"support_stderr", s.support_stderr},
          {"min_total_weight", s.min_total_weight},
          {"max_total_weight", s.max_total_weight},
          {"mean_total_weight", s.mean_total_weight},
          {"mean_coverage", s.mean_coverage},
          {"coverage_stderr", s.coverage_stderr},
          {"min_coverage", s.min_coverage},
          {"min_support_point", vec_json(s.min_support_point)},
          {"max_support_point", vec_json(s.max_support_point)},
          {"seconds", s.seconds}};
}

json to_json(const CriterionResult& r) {
  return {{"id", r.id},
          {"name", r.name},
          {"passed", r.passed},
          {"summary", r.summary},
          {"seconds", r.seconds},
          {"details", r.details}};
}

}  // namespace lram
