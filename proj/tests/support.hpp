#pragma once

#include "fpp/environment.hpp"
#include "fpp/lattice.hpp"
#include "fpp/reconnect.hpp"
#include "fpp/stream.hpp"

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace fpp::testing {

// Minimum cut by enumerating every vertex set S with sources in S and sinks outside; the cut of S is the set of
// allowed edges with exactly one endpoint in S. Independent of the solver; limited to 22 free vertices.
template <class S>
S brute_min_cut(const LatticeDomain& L, const Capacities<S>& t) {
  std::vector<int> free_idx;
  for (size_t i = 0; i < L.size(); ++i) {
    if (!L.is_terminal(static_cast<int>(i))) free_idx.push_back(static_cast<int>(i));
  }
  if (free_idx.size() > 22) throw std::invalid_argument("brute_min_cut: too many free vertices");
  std::vector<EdgeId> edges = L.edges();
  std::vector<std::pair<int, int>> ends;
  for (const EdgeId& e : edges) ends.emplace_back(L.index_of(e.x), L.index_of(e.head()));
  std::vector<int> pos(L.size(), -1);
  for (size_t k = 0; k < free_idx.size(); ++k) pos[free_idx[k]] = static_cast<int>(k);

  bool have = false;
  S best{0};
  const uint64_t count = uint64_t(1) << free_idx.size();
  for (uint64_t mask = 0; mask < count; ++mask) {
    auto in_s = [&](int v) { return L.is_source(v) || (pos[v] >= 0 && ((mask >> pos[v]) & 1)); };
    S cut{0};
    for (size_t k = 0; k < edges.size(); ++k) {
      if (in_s(ends[k].first) != in_s(ends[k].second)) cut += t(edges[k]);
    }
    if (!have || cut < best) {
      best = cut;
      have = true;
    }
  }
  return best;
}

inline Rational random_rational(std::mt19937_64& rng, int lo, int hi, int den) {
  std::uniform_int_distribution<int> u(lo, hi);
  return Rational(u(rng), den);
}

// Stream on the cube Q at scale N whose face fluxes are exactly damping * v . e_i per face cell: a constant
// stream, random plaquette loops that stay off the first layer along `entry_axis`, then face balancing with K.
inline Stream<Rational> well_behaved_stream(const RBox& Q, int64_t N, int m, int K, const std::vector<Rational>& v,
                                            const Rational& damping, int entry_axis, std::mt19937_64& rng,
                                            int loops = 20) {
  const int d = Q.dim();
  Stream<Rational> f = constant_stream<Rational>(v, Region({Q}), N, Rational(1));
  std::vector<int64_t> a(d), side(d);
  for (int i = 0; i < d; ++i) {
    a[i] = ceil_to_ll(Rational(N) * Q.lo[i]);
    side[i] = ceil_to_ll(Rational(N) * Q.hi[i]) - a[i];
  }
  std::uniform_int_distribution<int> w(-2, 2);
  for (int k = 0; k < loops; ++k) {
    int p = static_cast<int>(rng() % d);
    int q = static_cast<int>((p + 1 + rng() % (d - 1)) % d);
    Vertex x;
    for (int i = 0; i < d; ++i) {
      int64_t lo = a[i] + (i == entry_axis ? 1 : 0);
      int64_t span = a[i] + side[i] - 1 - lo;  // x_i + 1 must stay inside Q
      x[i] = lo + static_cast<int64_t>(rng() % static_cast<uint64_t>(std::max<int64_t>(span, 1)));
    }
    Rational c(w(rng), 8);
    f.add(EdgeId{x, p}, c);
    f.add(EdgeId{shifted(x, p, 1), q}, c);
    f.add(EdgeId{shifted(x, q, 1), p}, -c);
    f.add(EdgeId{x, q}, -c);
  }
  FaceFluxes<Rational> beta = well_behaved_targets(Q, m, N, v, Rational(1));
  f += balance_faces(f, beta, Q, K);
  return f.scaled(damping);
}

}  // namespace fpp::testing
