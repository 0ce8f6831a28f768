#include "fpp/maxflow.hpp"
#include "fpp/stream.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace fpp;

namespace {

Vertex v2(int64_t a, int64_t b) {
  Vertex x;
  x[0] = a;
  x[1] = b;
  return x;
}

}  // namespace

TEST_CASE("divergence sign convention") {
  Stream<Rational> f(2, 3);
  CHECK(divergence(f).empty());
  f.set(EdgeId{v2(1, 1), 0}, Rational(1));
  CHECK(divergence_at(f, v2(1, 1)) == -3);
  CHECK(divergence_at(f, v2(2, 1)) == 3);
  CHECK(divergence_at(f, v2(0, 0)) == 0);
  CHECK(divergence(f).size() == 2);
}

TEST_CASE("admissibility verdicts") {
  LatticeDomain L = discretize_domain(unit_square_spec(2), 3);
  auto t = sample_capacities<Rational>(L, CapacityDistribution::parse("uniform(1/2,3/2)"), 4);
  Stream<Rational> zero(2, 3);
  CHECK(admissibility_report(zero, t, L).ok());

  Stream<Rational> f(2, 3);
  EdgeId e{v2(1, 1), 1};
  f.set(e, t(e) + Rational(1, 10));
  auto rep = admissibility_report(f, t, L);
  CHECK_FALSE(rep.capacity_ok);
  REQUIRE(rep.capacity_violations.size() == 1);
  CHECK(rep.capacity_violations[0] == e);
  CHECK_FALSE(rep.node_law_ok);

  Stream<Rational> outside(2, 3);
  outside.set(EdgeId{v2(0, 0), 1}, Rational(1, 10));  // source-source edge
  CHECK_FALSE(admissibility_report(outside, t, L).support_ok);
}

TEST_CASE("vector measure of a single edge") {
  Stream<Rational> f(2, 2);
  f.set(EdgeId{v2(0, 0), 0}, Rational(1));
  VectorMeasure m = vector_measure(f);
  REQUIRE(m.atoms.size() == 1);
  CHECK(m.atoms[0].point == std::vector<Rational>{Rational(1, 4), Rational(0)});
  CHECK(m.atoms[0].weight[0] == doctest::Approx(0.25));
  CHECK(m.atoms[0].weight[1] == 0.0);
  CHECK(vector_measure(Stream<Rational>(2, 2)).empty());
}

TEST_CASE("total variation of the measure is the scaled l1 norm") {
  LatticeDomain L = discretize_domain(unit_square_spec(2), 4);
  auto t = sample_capacities<Rational>(L, CapacityDistribution::parse("uniform(0,2)"), 8);
  auto f = max_flow(L, t).stream;
  double l1 = 0;
  for (const auto& [e, v] : f.values) l1 += std::fabs(v.convert_to<double>());
  CHECK(vector_measure(f).total_variation() == doctest::Approx(l1 / 16).epsilon(1e-12));
}

TEST_CASE("flow value of a straight line") {
  LatticeDomain L = discretize_domain(unit_square_spec(2), 3);
  Stream<Rational> f(2, 3);
  CHECK(flow_value(f, L) == 0);
  for (int64_t a = 0; a < 3; ++a) f.set(EdgeId{v2(a, 1), 0}, Rational(1));
  CHECK(flow_value(f, L) == 1);
  auto t = Capacities<Rational>::everywhere(Rational(1));
  CHECK(admissibility_report(f, t, L).ok());
}

TEST_CASE("face flux of a constant stream") {
  const int64_t n = 8;
  Region C = Region::unit_cube(2);
  Rational s(3, 4), damping(7, 8);
  Stream<Rational> f = constant_stream<Rational>({s, Rational(0)}, C, n, damping);
  Face plus;
  plus.axis = 0;
  plus.coord = Rational(1, 2);
  plus.lo = {Rational(0), Rational(-1, 2)};
  plus.hi = {Rational(0), Rational(1, 2)};
  CHECK(face_flux(f, plus, 0, 1) == s * damping * n);
  Face minus = plus;
  minus.coord = Rational(-1, 2);
  CHECK(face_flux(f, minus, 0, -1) == s * damping * n);
  CHECK(face_flux(Stream<Rational>(2, n), plus, 0, 1) == 0);
}

TEST_CASE("discretized constant field equals v_i on interior edges") {
  ContinuousField sigma = constant_field(unit_cube_box(2), {Rational(1, 2), Rational(-1, 3)}, Rational(1));
  Region C = Region::unit_cube(2);
  auto f = discretize_field<Rational>(sigma, C, 4, Rational(1));
  auto g = constant_stream<Rational>({Rational(1, 2), Rational(-1, 3)}, C, 4, Rational(1));
  int interior = 0;
  for (const auto& [e, v] : f.values) {
    CHECK(v == g(e));
    ++interior;
  }
  CHECK(interior > 0);
  auto rep = admissibility_region_report(f, Capacities<Rational>::everywhere(Rational(1)), C);
  CHECK(rep.node_law_ok);
}

TEST_CASE("rescale_stream: identity and measure scaling") {
  LatticeDomain L = discretize_domain(unit_square_spec(2), 3);
  auto f = max_flow(L, sample_capacities<Rational>(L, CapacityDistribution::parse("uniform(0,1)"), 2)).stream;
  CHECK(rescale_stream(f, Vertex{}, 3) == f);
  auto g = rescale_stream(f, v2(5, 2), 9);
  double tv_f = vector_measure(f).total_variation(), tv_g = vector_measure(g).total_variation();
  CHECK(tv_g == doctest::Approx(tv_f * 9.0 / 81.0));
  CHECK(g.support_size() == f.support_size());
  for (const auto& [e, v] : g.values) CHECK(divergence_at(g, e.x) == divergence_at(f, shifted(shifted(e.x, 0, -5), 1, -2)) * 3);
}

TEST_CASE("stream text round trip, rational and double") {
  LatticeDomain L = discretize_domain(unit_square_spec(3), 2);
  auto t = sample_capacities<Rational>(L, CapacityDistribution::parse("bernoulli(1/3,2,1/2)"), 3);
  auto f = max_flow(L, t).stream;
  std::stringstream ss;
  write_stream(ss, f);
  auto back = read_stream<Rational>(ss);
  CHECK(back == f);
  auto fd = convert_stream<double>(f);
  std::stringstream sd;
  write_stream(sd, fd);
  CHECK(read_stream<double>(sd) == fd);
}
