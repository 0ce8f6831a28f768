#pragma once

#include "fpp/continuous.hpp"
#include "fpp/environment.hpp"
#include "fpp/lattice.hpp"
#include "fpp/measure.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace fpp {

// Edge -> signed magnitude s(e); the vector is s(e) e_axis. Zero values are not stored.
template <class S>
struct Stream {
  int d = 2;
  int64_t n = 1;
  std::map<EdgeId, S> values;

  Stream() = default;
  Stream(int dim, int64_t scale) : d(dim), n(scale) {}

  S operator()(const EdgeId& e) const {
    auto it = values.find(e);
    return it == values.end() ? S{0} : it->second;
  }
  void set(const EdgeId& e, const S& v);
  void add(const EdgeId& e, const S& v);
  size_t support_size() const { return values.size(); }
  double max_abs() const;

  Stream& operator+=(const Stream& o);
  Stream scaled(const S& c) const;
  bool operator==(const Stream& o) const { return d == o.d && n == o.n && values == o.values; }
};

template <class S>
Stream<S> operator+(Stream<S> a, const Stream<S>& b) {
  a += b;
  return a;
}

template <class S>
Stream<S> operator-(Stream<S> a, const Stream<S>& b) {
  a += b.scaled(S{-1});
  return a;
}

// d f(x) = n sum_y f(<x,y>) . yx: an edge carrying s adds -n s at its tail and +n s at its head.
template <class S>
S divergence_at(const Stream<S>& f, const Vertex& x);

// Nonzero divergences.
template <class S>
std::map<Vertex, S> divergence(const Stream<S>& f);

struct AdmissibilityReport {
  bool support_ok = true;   // f = 0 off the allowed edges
  bool capacity_ok = true;  // |f(e)| <= t(e)
  bool node_law_ok = true;  // zero divergence off the terminals
  std::vector<EdgeId> support_violations, capacity_violations;
  std::vector<Vertex> node_violations;

  bool ok() const { return support_ok && capacity_ok && node_law_ok; }
  std::string summary(int d) const;
};

template <class S>
AdmissibilityReport admissibility_report(const Stream<S>& f, const Capacities<S>& t, const LatticeDomain& L);

// Capacity on edges whose left endpoint is in C; node law at x in C with every x - e_i/n in C.
template <class S>
AdmissibilityReport admissibility_region_report(const Stream<S>& f, const Capacities<S>& t, const Region& C);

// Atoms f(e)/n^d at edge midpoints.
template <class S>
VectorMeasure vector_measure(const Stream<S>& f);

// Net outflow from the sources into the domain.
template <class S>
S flow_value(const Stream<S>& f, const LatticeDomain& L);

// Sum of f(e).e_axis over the boundary edge set of the face.
template <class S>
S face_flux(const Stream<S>& f, const Face& A, int axis, int sign);

// s(e) = damping * n^{d-1} * integral of sigma.e_i over the dual plaquette of e, for plaquettes inside one
// closed box of C; other edges get 0.
template <class S>
Stream<S> discretize_field(const ContinuousField& sigma, const Region& C, int64_t n, const Rational& damping);

// damping * v_i on every edge whose left endpoint is in C.
template <class S>
Stream<S> constant_stream(const std::vector<Rational>& v, const Region& C, int64_t n, const Rational& damping);

// Pushforward under y -> (n0/n) y + x/n: edge with left endpoint Y at scale n0 goes to Y + x at scale n.
template <class S>
Stream<S> rescale_stream(const Stream<S>& f, const Vertex& x, int64_t n);

template <class S>
void write_stream(std::ostream& os, const Stream<S>& f);
template <class S>
Stream<S> read_stream(std::istream& is);

template <class T, class S>
Stream<T> convert_stream(const Stream<S>& f);

}  // namespace fpp
