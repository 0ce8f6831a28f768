#include "fpp/continuous.hpp"

#include <doctest.h>

#include <cmath>

using namespace fpp;

namespace {

RBox box2(Rational a, Rational b, Rational c, Rational e) { return make_box({a, c}, {b, e}); }

RBox unit_square() { return box2(Rational(0), Rational(1), Rational(0), Rational(1)); }

}  // namespace

TEST_CASE("flow through the source face") {
  DomainSpec spec = unit_square_spec(2);
  ContinuousField zero;
  zero.d = 2;
  CHECK(flow_cont(zero, spec) == 0);
  ContinuousField e1 = constant_field(unit_square(), {Rational(1), Rational(0)}, Rational(1));
  CHECK(flow_cont(e1, spec) == 1);
  ContinuousField half = constant_field(unit_square(), {Rational(1, 2), Rational(0)}, Rational(1));
  CHECK(flow_cont(half, spec) == Rational(1, 2));
}

TEST_CASE("flow equals the sum of inward fluxes over the source cells") {
  DomainSpec spec = unit_square_spec(2);
  ContinuousField f;
  f.d = 2;
  f.M = 2;
  // Horizontal strips with different speeds; divergence free.
  Rational total = 0;
  for (int j = 0; j < 4; ++j) {
    Rational v(j + 1, 4);
    f.cells.push_back(FieldCell{box2(Rational(0), Rational(1), Rational(j, 4), Rational(j + 1, 4)), {v, Rational(0)}});
    total += v * Rational(1, 4);
  }
  CHECK(flow_cont(f, spec) == total);
  CHECK(check_divergence_free(f, spec).ok());
}

TEST_CASE("divergence verdicts for constant fields") {
  DomainSpec spec = unit_square_spec(2);
  ContinuousField across = constant_field(unit_square(), {Rational(1), Rational(0)}, Rational(1));
  CHECK(check_divergence_free(across, spec).ok());
  ContinuousField up = constant_field(unit_square(), {Rational(0), Rational(1)}, Rational(1));
  auto rep = check_divergence_free(up, spec);
  CHECK_FALSE(rep.lateral_ok);
  CHECK(rep.interior_ok);
}

TEST_CASE("interior jump is detected") {
  DomainSpec spec = unit_square_spec(2);
  ContinuousField f;
  f.d = 2;
  f.cells.push_back(FieldCell{box2(Rational(0), Rational(1, 2), Rational(0), Rational(1)), {Rational(1), Rational(0)}});
  f.cells.push_back(FieldCell{box2(Rational(1, 2), Rational(1), Rational(0), Rational(1)), {Rational(1, 2), Rational(0)}});
  auto rep = check_divergence_free(f, spec);
  CHECK_FALSE(rep.interior_ok);
  REQUIRE(rep.interior_violations.size() >= 1);
  CHECK(rep.interior_violations[0].jump == Rational(-1, 2));
}

TEST_CASE("mollified constant field is constant in the interior") {
  ContinuousField sigma = constant_field(box2(Rational(-2), Rational(2), Rational(-2), Rational(2)),
                                         {Rational(1, 2), Rational(-1, 4)}, Rational(1));
  ContinuousField m = mollify(sigma, 4);
  int interior = 0;
  for (const FieldCell& c : m.cells) {
    bool inside = true;
    for (int j = 0; j < 2; ++j) inside = inside && c.box.lo[j] >= Rational(-7, 4) && c.box.hi[j] <= Rational(7, 4);
    if (!inside) continue;
    ++interior;
    CHECK(std::fabs(c.value[0].convert_to<double>() - 0.5) <= 1e-8);
    CHECK(std::fabs(c.value[1].convert_to<double>() + 0.25) <= 1e-8);
  }
  CHECK(interior > 0);
}

TEST_CASE("mollification support stays within 1/p of the original support") {
  ContinuousField sigma = constant_field(unit_square(), {Rational(1), Rational(0)}, Rational(1));
  for (int p : {2, 4}) {
    for (const FieldCell& c : mollify(sigma, p).cells) {
      bool nonzero = c.value[0] != 0 || c.value[1] != 0;
      if (!nonzero) continue;
      for (int j = 0; j < 2; ++j) {
        CHECK(c.box.hi[j] > Rational(-1, p));
        CHECK(c.box.lo[j] < Rational(1) + Rational(1, p));
      }
    }
  }
}

TEST_CASE("mollification error decreases in p") {
  ContinuousField sigma = constant_field(unit_square(), {Rational(1), Rational(0)}, Rational(1));
  double prev = std::numeric_limits<double>::infinity();
  for (int p : {2, 4, 8}) {
    double err = l1_distance(mollify(sigma, p), sigma);
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("rate integral") {
  ContinuousField sigma = constant_field(unit_square(), {Rational(1), Rational(0)}, Rational(1));
  CHECK(rate_integral(sigma, [](const std::vector<double>&) { return 0.0; }) == 0.0);
  // -d log G([|v|_inf, M]) with G = bernoulli(0,1,1/2), d = 2.
  auto bound = [](const std::vector<double>& v) {
    double s = std::max(std::fabs(v[0]), std::fabs(v[1]));
    return s > 0 ? 2 * std::log(2.0) : 0.0;
  };
  CHECK(rate_integral(sigma, bound) == doctest::Approx(2 * std::log(2.0)));
  // Refining the mesh does not change the integral.
  ContinuousField split;
  split.d = 2;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      split.cells.push_back(FieldCell{box2(Rational(i, 2), Rational(i + 1, 2), Rational(j, 2), Rational(j + 1, 2)),
                                      {Rational(1), Rational(0)}});
    }
  }
  auto quad = [](const std::vector<double>& v) { return v[0] * v[0] + v[1] * v[1]; };
  CHECK(rate_integral(split, quad) == doctest::Approx(rate_integral(sigma, quad)));
}

TEST_CASE("combine and l1 distance") {
  ContinuousField a = constant_field(unit_square(), {Rational(1), Rational(0)}, Rational(1));
  ContinuousField b = constant_field(box2(Rational(0), Rational(1, 2), Rational(0), Rational(1)), {Rational(1), Rational(0)},
                                     Rational(1));
  CHECK(l1_distance(a, b) == doctest::Approx(0.5));
  ContinuousField c = combine(a, Rational(1), b, Rational(-1));
  CHECK(c.measure().total_variation() == doctest::Approx(0.5));
  CHECK(a.value_at({Rational(1, 3), Rational(1, 3)}) == std::vector<Rational>{Rational(1), Rational(0)});
  CHECK(a.value_at({Rational(2), Rational(1, 3)}) == std::vector<Rational>{Rational(0), Rational(0)});
}
