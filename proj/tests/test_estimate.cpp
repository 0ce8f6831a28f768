#include "fpp/estimate.hpp"
#include "fpp/maxflow.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace fpp;

namespace {

Vertex v2(int64_t a, int64_t b) {
  Vertex x;
  x[0] = a;
  x[1] = b;
  return x;
}

VectorMeasure cube_target(int d, double s) {
  std::vector<double> v(d, 0.0);
  v[0] = s;
  return density_measure(unit_cube_box(d), v);
}

}  // namespace

TEST_CASE("wilson interval: frozen values") {
  Interval none = wilson_interval(0, 10);
  CHECK(none.lo == 0.0);
  CHECK(none.hi == doctest::Approx(0.27753279986).epsilon(1e-9));
  Interval all = wilson_interval(10, 10);
  CHECK(all.hi == 1.0);
  CHECK(all.lo == doctest::Approx(0.72246720014).epsilon(1e-9));
  Interval half = wilson_interval(50, 100);
  CHECK(half.lo == doctest::Approx(0.40383153).epsilon(1e-7));
  CHECK(half.hi == doctest::Approx(0.59616847).epsilon(1e-7));
  CHECK_THROWS(wilson_interval(0, 0));
}

TEST_CASE("rate bound with bernoulli(0,1,1/2)") {
  auto dist = CapacityDistribution::parse("bernoulli(0,1,1/2)");
  CHECK(rate_upper_bound(dist, 2, {0.5, 0.0}) == doctest::Approx(2 * std::log(2.0)));
  CHECK(rate_upper_bound(dist, 2, {0.0, 0.0}) == doctest::Approx(0.0));
  CHECK(std::isinf(rate_upper_bound(dist, 2, {1.5, 0.0})));
}

TEST_CASE("divergence projector") {
  const int64_t n = 4;
  Region C = Region::unit_cube(2);
  std::vector<EdgeId> edges;
  std::vector<Vertex> interior;
  for (const Vertex& x : C.vertices(n)) {
    edges.push_back(EdgeId{x, 0});
    edges.push_back(EdgeId{x, 1});
    if (C.contains(shifted(x, 0, -1), n) && C.contains(shifted(x, 1, -1), n)) interior.push_back(x);
  }
  DivergenceProjector P(2, n, edges, interior);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<double> s(edges.size());
  for (double& x : s) x = g(rng);
  auto y = P.project(s);
  CHECK(P.residual(y) < 1e-9);
  auto z = P.project(y);
  for (size_t k = 0; k < y.size(); ++k) CHECK(z[k] == doctest::Approx(y[k]).epsilon(1e-9));
  // The projection is orthogonal: (s - y) . y = 0.
  double dot = 0;
  for (size_t k = 0; k < y.size(); ++k) dot += (s[k] - y[k]) * y[k];
  CHECK(std::fabs(dot) < 1e-8);
}

TEST_CASE("min_distance: a given feasible point certifies") {
  const int64_t n = 4;
  Region C = Region::unit_cube(2);
  auto g = constant_stream<double>({Rational(3, 10), Rational(0)}, C, n, Rational(1));
  VectorMeasure target = vector_measure(g);
  MinDistanceOptions o;
  o.warm_start = g;
  o.iterations = 0;
  auto r = min_distance(C, n, Capacities<double>::everywhere(1.0), target, 1e-3, o);
  CHECK(r.holds());
  CHECK(r.upper <= 1e-3);
  auto rep = admissibility_region_report(r.stream, Capacities<double>::everywhere(1.0), C);
  CHECK(rep.ok());
}

TEST_CASE("min_distance: zero capacities leave only the zero stream") {
  const int64_t n = 3;
  Region C = Region::unit_cube(2);
  VectorMeasure target = cube_target(2, 0.5);
  VectorMeasure zero;
  zero.d = 2;
  DistanceBracket b = distance(zero, target);
  auto r = min_distance(C, n, Capacities<double>::everywhere(0.0), target, 0.5 * b.lower);
  CHECK_FALSE(r.holds());
  CHECK(r.upper >= b.lower);
  CHECK(r.stream.values.empty());
}

TEST_CASE("min_distance: ample capacities reach a constant target") {
  const int64_t n = 4;
  Region C = Region::unit_cube(2);
  // The n = 4 discretization error alone is about 0.7 (lower) to 1.4 (upper at 2000 cells).
  MinDistanceOptions o;
  o.distance.max_cells = 2000;
  o.iterations = 2;
  auto r = min_distance(C, n, Capacities<double>::everywhere(1.0), cube_target(2, 0.5), 1.5, o);
  CHECK(r.holds());
  CHECK(admissibility_region_report(r.stream, Capacities<double>::everywhere(1.0), C).ok());
}

TEST_CASE("min_distance on a two-parameter polytope against grid search") {
  // Capacity on three edges meeting at the one interior vertex of the n = 2 cube: a = b + c.
  const int64_t n = 2;
  Region C = Region::unit_cube(2);
  EdgeId in{v2(-1, 0), 0}, right{v2(0, 0), 0}, up{v2(0, 0), 1};
  Capacities<double> t;
  t.values = {{in, 1.0}, {right, 1.0}, {up, 1.0}};
  t.fallback = 0.0;
  VectorMeasure target = cube_target(2, 0.5);
  DistanceOptions dopt;
  dopt.rel_gap = 0.01;
  dopt.max_cells = 500;
  double grid_best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 5; ++i) {
    for (int j = 0; j <= 5; ++j) {
      double b = -1 + 0.4 * i, c = -1 + 0.4 * j;
      if (std::fabs(b + c) > 1) continue;
      Stream<double> f(2, n);
      f.set(in, b + c);
      f.set(right, b);
      f.set(up, c);
      grid_best = std::min(grid_best, distance(vector_measure(f), target, dopt).upper);
    }
  }
  MinDistanceOptions o;
  o.distance = dopt;
  o.iterations = 10;
  auto r = min_distance(C, n, t, target, 0.0, o);
  MESSAGE("solver " << r.upper << ", grid " << grid_best);
  CHECK(r.upper <= grid_best + 0.02);
  CHECK(admissibility_region_report(r.stream, t, C).ok());
}

TEST_CASE("rate: s = 0 holds in every trial") {
  RateConfig cfg;
  cfg.n = 2;
  cfg.s = 0;
  cfg.trials = 20;
  cfg.dist = CapacityDistribution::parse("bernoulli(0,1,1/2)");
  auto r = estimate_rate(cfg);
  CHECK(r.successes == 20);
  CHECK(r.phat == 1.0);
  CHECK(r.I_hat == 0.0);
  CHECK(r.I_hat_lower == 0.0);
}

TEST_CASE("rate: success probability is monotone in eps") {
  RateConfig cfg;
  cfg.n = 2;
  cfg.s = 0.5;
  cfg.trials = 20;
  cfg.dist = CapacityDistribution::parse("bernoulli(0,1,1/2)");
  cfg.solver.iterations = 2;
  cfg.solver.distance.max_cells = 300;
  uint64_t prev = 0;
  for (double eps : {0.6, 0.9, 1.2}) {
    cfg.eps = eps;
    auto r = estimate_rate(cfg);
    CHECK(r.successes >= prev);
    prev = r.successes;
  }
}

TEST_CASE("rate estimates do not depend on the thread count") {
  RateConfig cfg;
  cfg.n = 2;
  cfg.s = 0.4;
  cfg.eps = 0.8;
  cfg.trials = 12;
  cfg.dist = CapacityDistribution::parse("uniform(0,1)");
  cfg.solver.iterations = 2;
  cfg.solver.distance.max_cells = 300;
  cfg.threads = 1;
  auto a = estimate_rate(cfg);
  cfg.threads = 8;
  auto b = estimate_rate(cfg);
  CHECK(a.successes == b.successes);
  CHECK(a.best_upper_mean == b.best_upper_mean);
  CHECK(a.I_hat == b.I_hat);
}

TEST_CASE("flow constant with unit capacities is exactly 1") {
  FlowConstantConfig cfg;
  cfg.n_list = {4, 8};
  cfg.trials = 3;
  cfg.dist = CapacityDistribution::constant(1);
  for (const auto& row : estimate_flow_constant(cfg)) {
    for (double x : row.samples) CHECK(x == 1.0);
    CHECK(row.mean == 1.0);
  }
}

TEST_CASE("flow constant with capacities in {1,2} lies in [1,2]") {
  FlowConstantConfig cfg;
  cfg.n_list = {4};
  cfg.trials = 8;
  cfg.dist = CapacityDistribution::parse("discrete(1:1/2,2:1/2)");
  for (const auto& row : estimate_flow_constant(cfg)) {
    for (double x : row.samples) {
      CHECK(x >= 1.0);
      CHECK(x <= 2.0);
    }
  }
}

TEST_CASE("flow constant half-width shrinks like 1/sqrt(trials)") {
  FlowConstantConfig cfg;
  cfg.n_list = {4};
  cfg.dist = CapacityDistribution::parse("uniform(0,2)");
  cfg.trials = 25;
  double a = estimate_flow_constant(cfg)[0].half_width;
  cfg.trials = 100;
  double b = estimate_flow_constant(cfg)[0].half_width;
  CHECK(b / a > 0.3);
  CHECK(b / a < 0.75);
}

TEST_CASE("tail probabilities: trivial ends and an interior value") {
  TailConfig cfg;
  cfg.n = 3;
  cfg.trials = 400;
  cfg.dist = CapacityDistribution::parse("bernoulli(0,1,1/2)");
  LatticeDomain L = discretize_domain(unit_square_spec(2), 3);
  // Any cut bounds phi; the source column has 4 horizontal edges of capacity at most 1.
  double ceiling = 4.0 / 3.0;
  cfg.lambdas = {0.0, 0.5, ceiling + 0.01};
  auto rows = tail_probability(cfg, L);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].phat == 1.0);
  CHECK(rows[1].phat > 0.0);
  CHECK(rows[1].phat < 1.0);
  CHECK(rows[2].phat == 0.0);
  // A second seed agrees within the combined intervals.
  cfg.seed = 99;
  auto again = tail_probability(cfg, L);
  CHECK(again[1].ci.lo <= rows[1].ci.hi);
  CHECK(rows[1].ci.lo <= again[1].ci.hi);
}

TEST_CASE("rate: no success gives an infinite estimate and a finite Wilson bound") {
  RateConfig cfg;
  cfg.n = 2;
  cfg.s = 0.5;
  cfg.eps = 0.01;
  cfg.trials = 10;
  cfg.dist = CapacityDistribution::parse("bernoulli(0,1,1/2)");
  cfg.solver.iterations = 1;
  cfg.solver.distance.max_cells = 200;
  auto r = estimate_rate(cfg);
  CHECK(r.successes == 0);
  CHECK(std::isinf(r.I_hat));
  CHECK(r.I_hat_lower == doctest::Approx(-std::log(0.27753279986) / 4).epsilon(1e-9));
}
