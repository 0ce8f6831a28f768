#include "fpp/scalar.hpp"

#include <charconv>
#include <stdexcept>

namespace fpp {

namespace {

Rational pow10(int e) {
  Rational r = 1;
  for (int i = 0; i < e; ++i) r *= 10;
  return r;
}

}  // namespace

Rational parse_rational(const std::string& raw) {
  std::string text;
  for (char c : raw) {
    if (c != ' ' && c != '\t') text.push_back(c);
  }
  if (text.empty()) throw std::invalid_argument("empty number");
  auto slash = text.find('/');
  if (slash != std::string::npos) {
    Rational num = parse_rational(text.substr(0, slash));
    Rational den = parse_rational(text.substr(slash + 1));
    if (den == 0) throw std::invalid_argument("zero denominator in '" + raw + "'");
    return num / den;
  }
  bool neg = false;
  size_t pos = 0;
  if (text[pos] == '+' || text[pos] == '-') {
    neg = text[pos] == '-';
    ++pos;
  }
  Rational mant = 0;
  int frac_digits = 0;
  bool seen_dot = false, seen_digit = false;
  for (; pos < text.size(); ++pos) {
    char c = text[pos];
    if (c >= '0' && c <= '9') {
      mant = mant * 10 + (c - '0');
      if (seen_dot) ++frac_digits;
      seen_digit = true;
    } else if (c == '.' && !seen_dot) {
      seen_dot = true;
    } else {
      break;
    }
  }
  if (!seen_digit) throw std::invalid_argument("not a number: '" + raw + "'");
  int exponent = 0;
  if (pos < text.size()) {
    if (text[pos] != 'e' && text[pos] != 'E') throw std::invalid_argument("not a number: '" + raw + "'");
    ++pos;
    size_t used = 0;
    try {
      exponent = std::stoi(text.substr(pos), &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad exponent in '" + raw + "'");
    }
    if (pos + used != text.size()) throw std::invalid_argument("not a number: '" + raw + "'");
  }
  exponent -= frac_digits;
  Rational value = exponent >= 0 ? Rational(mant * pow10(exponent)) : Rational(mant / pow10(-exponent));
  return neg ? Rational(-value) : value;
}

std::string to_string(const Rational& q) {
  return q.str();
}

Rational floor_rational(const Rational& q) {
  using boost::multiprecision::numerator;
  using boost::multiprecision::denominator;
  boost::multiprecision::mpz_int num = numerator(q), den = denominator(q);
  boost::multiprecision::mpz_int quot = num / den;  // truncates toward zero
  if (num < 0 && quot * den != num) quot -= 1;
  return Rational(quot);
}

Rational ceil_rational(const Rational& q) {
  return -floor_rational(-q);
}

long long floor_to_ll(const Rational& q) {
  return floor_rational(q).convert_to<long long>();
}

long long ceil_to_ll(const Rational& q) {
  return ceil_rational(q).convert_to<long long>();
}

std::string format_scalar(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::string format_scalar(const Rational& x) {
  return x.str();
}

template <>
double parse_scalar<double>(const std::string& text) {
  if (text.find('/') != std::string::npos) return parse_rational(text).convert_to<double>();
  double value = 0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (first != last && *first == '+') ++first;
  auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) throw std::invalid_argument("not a number: '" + text + "'");
  return value;
}

template <>
Rational parse_scalar<Rational>(const std::string& text) {
  return parse_rational(text);
}

}  // namespace fpp
