#include "fpp/continuous.hpp"
#include "fpp/measure.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace fpp;

namespace {

RBox box2(Rational a, Rational b, Rational c, Rational e) { return make_box({a, c}, {b, e}); }

// Level sum by direct enumeration of the cubes of side lambda 2^-k around x.
double brute_level_sum(const VectorMeasure& mu, const VectorMeasure& nu, const double* x, double lambda, int k) {
  double s = std::ldexp(lambda, -k);
  double total = 0;
  for (int zx = -80; zx <= 80; ++zx) {
    for (int zy = -80; zy <= 80; ++zy) {
      RBox B = make_box({Rational(s * (zx - 0.5) + x[0]), Rational(s * (zy - 0.5) + x[1])},
                        {Rational(s * (zx + 0.5) + x[0]), Rational(s * (zy + 0.5) + x[1])});
      auto a = box_mass(mu, B);
      auto b = box_mass(nu, B);
      total += std::hypot(a[0] - b[0], a[1] - b[1]);
    }
  }
  return total;
}

// Two-by-two piecewise-constant densities on the unit cube.
VectorMeasure random_density(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(-4, 4);
  VectorMeasure m;
  m.d = 2;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      RBox b = box2(Rational(i - 1, 2), Rational(i, 2), Rational(j - 1, 2), Rational(j, 2));
      m.densities.push_back(DensityBox{b, {u(rng) / 4.0, u(rng) / 4.0}});
    }
  }
  return m;
}

}  // namespace

TEST_CASE("box mass: half-open rule for atoms") {
  VectorMeasure m;
  m.d = 2;
  m.atoms.push_back(Atom{{Rational(0), Rational(1, 4)}, {1.0, 0.0}});
  RBox lower_face = box2(Rational(0), Rational(1, 2), Rational(0), Rational(1, 2));
  RBox upper_face = box2(Rational(-1, 2), Rational(0), Rational(0), Rational(1, 2));
  CHECK(box_mass(m, lower_face)[0] == 1.0);
  CHECK(box_mass(m, upper_face)[0] == 0.0);
}

TEST_CASE("box mass of a density on its own box") {
  VectorMeasure m = density_measure(unit_cube_box(2), {0.5, -2.0});
  auto v = box_mass(m, unit_cube_box(2));
  CHECK(v[0] == doctest::Approx(0.5));
  CHECK(v[1] == doctest::Approx(-2.0));
  auto q = box_mass(m, box2(Rational(0), Rational(1), Rational(0), Rational(1)));
  CHECK(q[0] == doctest::Approx(0.125));
}

TEST_CASE("level sums match direct enumeration") {
  const int n = 4;
  VectorMeasure mu;
  mu.d = 2;
  for (int X = -n / 2; X < (n + 1) / 2; ++X) {
    for (int Y = -n / 2; Y < (n + 1) / 2; ++Y) {
      mu.atoms.push_back(Atom{{Rational(2 * X + 1, 2 * n), Rational(Y, n)}, {1.0 / (n * n), 0.0}});
    }
  }
  VectorMeasure nu = density_measure(unit_cube_box(2), {1.0, 0.0});
  nu.densities.push_back(DensityBox{box2(Rational(0), Rational(1, 2), Rational(-1, 3), Rational(1, 5)), {0.3, -0.7}});
  DistanceEngine e(mu - nu);
  double max_err = 0;
  for (int trial = 0; trial < 24; ++trial) {
    double x[2] = {std::ldexp(double((trial * 37) % 64) - 32, -5), std::ldexp(double((trial * 53) % 64) - 32, -5)};
    double lam = 1 + std::ldexp(double((trial * 29) % 32), -5);
    for (int k = 0; k <= 4; ++k) {
      double brute = brute_level_sum(mu, nu, x, lam, k);
      max_err = std::max(max_err, std::fabs(e.level_sum(x, lam, k) - brute));
      double x0[2] = {x[0] - 1.0 / 64, x[1]}, x1[2] = {x[0], x[1] + 1.0 / 64};
      CHECK(e.level_bound(x0, x1, lam, lam + 1.0 / 64, k) >= brute - 1e-12);
    }
  }
  CHECK(max_err < 1e-12);
}

TEST_CASE("distance of a measure to itself") {
  VectorMeasure m = density_measure(unit_cube_box(2), {1.0, 0.0});
  auto b = distance(m, m);
  CHECK(b.lower == 0.0);
  CHECK(b.upper <= 1e-12);
}

TEST_CASE("distance of a single atom to zero") {
  VectorMeasure m;
  m.d = 2;
  m.atoms.push_back(Atom{{Rational(0), Rational(0)}, {0.5, 0.0}});
  VectorMeasure zero;
  zero.d = 2;
  auto b = distance(m, zero);
  // Every level contributes the full mass: sum_k 2^-k * 0.5 = 1.
  CHECK(b.lower == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(b.upper <= 1.0 + 1e-12);
}

TEST_CASE("distance is bounded by twice the L1 distance") {
  std::mt19937_64 rng(6);
  DistanceOptions o;
  o.rel_gap = 0.05;
  for (int trial = 0; trial < 10; ++trial) {
    VectorMeasure f = random_density(rng), g = random_density(rng);
    auto b = distance(f, g, o);
    double l1 = (f - g).total_variation();
    CHECK(b.lower <= b.upper);
    CHECK(b.upper <= 2 * l1 + 1e-12);
    CHECK(b.gap() <= 0.05 * b.upper + 1e-12);
  }
}

TEST_CASE("distance is subadditive over a partition") {
  std::mt19937_64 rng(7);
  DistanceOptions o;
  o.rel_gap = 0.05;
  RBox left = box2(Rational(-1, 2), Rational(0), Rational(-1, 2), Rational(1, 2));
  RBox right = box2(Rational(0), Rational(1, 2), Rational(-1, 2), Rational(1, 2));
  for (int trial = 0; trial < 5; ++trial) {
    VectorMeasure f = random_density(rng), g = random_density(rng);
    double whole = distance(f, g, o).lower;
    double parts = distance(f.restricted(left), g.restricted(left), o).upper +
                   distance(f.restricted(right), g.restricted(right), o).upper;
    CHECK(whole <= parts + 1e-12);
  }
}

TEST_CASE("distance brackets shrink with more cells") {
  VectorMeasure f = density_measure(unit_cube_box(2), {1.0, 0.0});
  VectorMeasure g = density_measure(box2(Rational(-1, 2), Rational(0), Rational(-1, 2), Rational(1, 2)), {2.0, 0.0});
  DistanceOptions coarse, fine;
  coarse.max_cells = 200;
  coarse.rel_gap = 0;
  fine.max_cells = 4000;
  fine.rel_gap = 0;
  auto a = distance(f, g, coarse), b = distance(f, g, fine);
  CHECK(b.lower >= a.lower - 1e-15);
  CHECK(b.upper <= a.upper + 1e-15);
  CHECK(b.lower <= b.upper);
}

TEST_CASE("truncated sum at the reported argmax equals the lower bracket") {
  VectorMeasure f = density_measure(unit_cube_box(2), {1.0, 0.5});
  VectorMeasure zero;
  zero.d = 2;
  auto b = distance(f, zero);
  CHECK(truncated_sum_at(f, zero, b.argmax_x, b.argmax_lambda, b.K_max) == doctest::Approx(b.lower));
}

TEST_CASE("distance results do not depend on the thread count") {
  VectorMeasure f = density_measure(unit_cube_box(2), {1.0, 0.0});
  VectorMeasure g = density_measure(box2(Rational(-1, 3), Rational(1, 5), Rational(-1, 2), Rational(1, 7)), {1.5, -1.0});
  DistanceOptions one, many;
  many.threads = 4;
  auto a = distance(f, g, one), b = distance(f, g, many);
  CHECK(a.lower == b.lower);
  CHECK(a.upper == b.upper);
  CHECK(a.cells == b.cells);
}

TEST_CASE("vector measure arithmetic") {
  VectorMeasure a = density_measure(unit_cube_box(2), {1.0, 0.0});
  CHECK(a.total_variation() == doctest::Approx(1.0));
  CHECK(a.scaled(3).total_variation() == doctest::Approx(3.0));
  CHECK((a - a).total_variation() == doctest::Approx(0.0));
  CHECK_THROWS(density_measure(unit_cube_box(2), {1.0}).validate());
}
