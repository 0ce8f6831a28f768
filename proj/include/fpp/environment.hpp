#pragma once

#include "fpp/lattice.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace fpp {

struct CapacityDistribution {
  enum class Kind { Constant, Bernoulli, Uniform, Discrete };

  Kind kind = Kind::Constant;
  // constant: {c}; bernoulli: {a, b} with P(b) = probs[0]; uniform: {a, b}; discrete: atoms.
  std::vector<Rational> values{Rational(1)};
  std::vector<Rational> probs;

  static CapacityDistribution constant(Rational c);
  static CapacityDistribution bernoulli(Rational a, Rational b, Rational p);
  static CapacityDistribution uniform(Rational a, Rational b);
  static CapacityDistribution discrete(std::vector<Rational> values, std::vector<Rational> probs);
  // "constant(1)", "bernoulli(0,1,1/2)", "uniform(0,2)", "discrete(1:1/2,2:1/2)".
  static CapacityDistribution parse(const std::string& text);

  void validate() const;
  Rational support_max() const;  // M
  // G([x, M]).
  double prob_at_least(double x) const;
  std::string describe() const;
};

uint64_t splitmix64(uint64_t z);
uint64_t trial_seed(uint64_t master, uint64_t trial);
uint64_t edge_hash(uint64_t seed, const EdgeId& e);
double hash_to_unit(uint64_t h);  // uniform on [0,1), 53 bits

template <class S>
S sample_value(const CapacityDistribution& dist, double u);

template <class S>
struct Capacities {
  CapacityDistribution dist;
  uint64_t seed = 0;
  S M{};
  std::unordered_map<EdgeId, S, EdgeHash> values;
  std::optional<S> fallback;  // used for edges absent from `values`

  S operator()(const EdgeId& e) const;
  static Capacities everywhere(S c);
};

template <class S>
Capacities<S> sample_capacities(const std::vector<EdgeId>& edges, const CapacityDistribution& dist, uint64_t seed);
template <class S>
Capacities<S> sample_capacities(const LatticeDomain& lattice, const CapacityDistribution& dist, uint64_t seed);

// Text form: one "x1 .. xd axis value" line per edge, sorted.
template <class S>
void write_capacities(std::ostream& os, const Capacities<S>& t, int d);
template <class S>
Capacities<S> read_capacities(std::istream& is, int d);

}  // namespace fpp
