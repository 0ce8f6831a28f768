#pragma once

#include <boost/multiprecision/gmp.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace fpp {

using Rational = boost::multiprecision::number<boost::multiprecision::gmp_rational,
                                               boost::multiprecision::et_off>;

// Accepts "3", "-1/2", "0.25", "1e-3". Decimal input is read exactly (0.1 == 1/10).
Rational parse_rational(const std::string& text);
std::string to_string(const Rational& q);

Rational floor_rational(const Rational& q);
Rational ceil_rational(const Rational& q);
long long floor_to_ll(const Rational& q);
long long ceil_to_ll(const Rational& q);

template <class S>
struct ScalarTraits;

template <>
struct ScalarTraits<double> {
  static constexpr bool exact = false;
  static constexpr const char* name = "double";
  static double to_double(double x) { return x; }
  static double from_rational(const Rational& q) { return q.convert_to<double>(); }
  static double from_double(double x) { return x; }
  static double abs(double x) { return std::fabs(x); }
  static constexpr double rel_tol = 1e-12;
};

template <>
struct ScalarTraits<Rational> {
  static constexpr bool exact = true;
  static constexpr const char* name = "rational";
  static double to_double(const Rational& x) { return x.convert_to<double>(); }
  static Rational from_rational(const Rational& q) { return q; }
  // Exact: every finite double is a dyadic rational.
  static Rational from_double(double x) { return Rational(x); }
  static Rational abs(const Rational& x) { return x < 0 ? Rational(-x) : x; }
  static constexpr double rel_tol = 0.0;
};

// Zero test relative to a magnitude scale; exact for Rational.
template <class S>
bool near_zero(const S& x, double scale = 1.0) {
  if constexpr (ScalarTraits<S>::exact) {
    return x == 0;
  } else {
    return std::fabs(x) <= 1e-9 * std::max(1.0, scale);
  }
}

template <class S>
bool near_equal(const S& a, const S& b, double scale = 1.0) {
  if constexpr (ScalarTraits<S>::exact) {
    return a == b;
  } else {
    return std::fabs(a - b) <= ScalarTraits<double>::rel_tol * std::max({1.0, scale, std::fabs(a), std::fabs(b)});
  }
}

// Shortest round-trip text for double, "p/q" for Rational.
std::string format_scalar(double x);
std::string format_scalar(const Rational& x);

template <class S>
S parse_scalar(const std::string& text);

}  // namespace fpp
