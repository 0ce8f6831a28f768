#pragma once

#include "fpp/environment.hpp"
#include "fpp/lattice.hpp"
#include "fpp/stream.hpp"

#include <vector>

namespace fpp {

template <class S>
struct MaxFlowResult {
  S value{0};
  Stream<S> stream;
  std::vector<EdgeId> cut;  // allowed edges leaving the residual-reachable set, sorted
  S cut_capacity{0};
  std::vector<Vertex> source_side;
};

// Dinic on the lattice network: each allowed edge is a pair of opposite arcs of capacity t(e), the sources
// hang off a super source and the sinks off a super sink by arcs of capacity sum t + 1.
template <class S>
MaxFlowResult<S> max_flow(const LatticeDomain& L, const Capacities<S>& t, bool acyclic = true);

// Removes directed cycles from the support; divergence and |f(e)| bounds are preserved.
template <class S>
void cancel_cycles(Stream<S>& f);

// True when no path of allowed edges outside E joins a source to a sink.
bool separates(const LatticeDomain& L, const std::vector<EdgeId>& E);

// Phi(A, h): max flow from T(A,h) to B(A,h) inside the cylinder.
template <class S>
S cylinder_flow_top_bottom(const CylinderSpec& cyl, int64_t n, const Capacities<S>& t);

// tau(A, h): max flow from T'(A,h) to B'(A,h).
template <class S>
S cylinder_flow_tau(const CylinderSpec& cyl, int64_t n, const Capacities<S>& t);

}  // namespace fpp
