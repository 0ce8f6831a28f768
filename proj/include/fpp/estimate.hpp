#pragma once

#include "fpp/environment.hpp"
#include "fpp/lattice.hpp"
#include "fpp/measure.hpp"
#include "fpp/stream.hpp"

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fpp {

// ---------------------------------------------------------------------------------------------------------------
// Convex feasibility: min over f in S_n(C) of the distance upper bracket to a target measure.

struct MinDistanceOptions {
  int iterations = 20;        // projected subgradient steps after the initial candidates
  double step = 0.5;          // first step, in units of max t(e); decays as 1/sqrt(k)
  int dykstra_sweeps = 60;
  DistanceOptions distance{.rel_gap = 0.05, .max_cells = 4000};  // stop_below / stop_above are overwritten with eps
  std::optional<Stream<double>> warm_start;  // extra candidate, made feasible before it is measured
};

enum class FeasibilityStatus { Holds, Unknown };

struct MinDistanceResult {
  double upper = std::numeric_limits<double>::infinity();  // best certified upper bracket
  double lower = 0;                                        // lower bracket of the same candidate
  Stream<double> stream;
  FeasibilityStatus status = FeasibilityStatus::Unknown;
  int evaluations = 0;

  bool holds() const { return status == FeasibilityStatus::Holds; }
};

// Variables are the edges with left endpoint in C and t(e) > 0; the node law is imposed at x in C with every
// x - e_i/n in C. Candidates: the zero stream, the projection of the target density sampled at edge midpoints,
// then subgradient steps at the maximizing (x, lambda) of each bracket. Every candidate is made exactly
// admissible (affine projection, then a uniform shrink onto the capacity box) before it is measured.
MinDistanceResult min_distance(const Region& C, int64_t n, const Capacities<double>& t, const VectorMeasure& target,
                               double eps, const MinDistanceOptions& opts = {});

// Euclidean projection onto {div = 0 at interior vertices} by a sparse LDLT solve of the graph Laplacian.
class DivergenceProjector {
 public:
  DivergenceProjector(int d, int64_t n, std::vector<EdgeId> edges, const std::vector<Vertex>& interior);
  const std::vector<EdgeId>& edges() const { return edges_; }
  std::vector<double> project(const std::vector<double>& s) const;
  double residual(const std::vector<double>& s) const;  // max |div| over interior vertices

 private:
  struct Impl;
  std::vector<EdgeId> edges_;
  std::vector<std::vector<std::pair<int, double>>> rows_;  // interior vertex -> (edge index, +-1)
  std::shared_ptr<Impl> impl_;
};

// ---------------------------------------------------------------------------------------------------------------
// Monte Carlo estimates

struct Interval {
  double lo = 0, hi = 1;
};

// Wilson score interval at 95%.
Interval wilson_interval(uint64_t successes, uint64_t trials, double z = 1.959963984540054);

struct RateConfig {
  int d = 2;
  int64_t n = 3;
  double s = 0;
  std::vector<double> v{1.0, 0.0};
  double eps = 0.3;
  uint64_t trials = 100;
  CapacityDistribution dist;
  uint64_t seed = 1;
  int threads = 1;
  MinDistanceOptions solver;
};

struct RateEstimate {
  int64_t n = 0;
  double eps = 0, s = 0;
  std::vector<double> v;
  uint64_t trials = 0, successes = 0, seed = 0;
  double phat = 0;
  Interval ci;
  double I_hat = 0;        // -log(phat)/n^d; +inf when there is no success
  double I_hat_lower = 0;  // -log(ci.hi)/n^d, finite even when phat = 0
  double best_upper_mean = 0;   // mean best bracket over trials, diagnostics only

  double half_width() const { return 0.5 * (ci.hi - ci.lo); }
};

// Per trial: capacities on the edges of the unit cube, then min_distance against s v 1_cube Lebesgue.
RateEstimate estimate_rate(const RateConfig& cfg);

// -d log G([||s v||_inf, M]); +inf when that probability is 0.
double rate_upper_bound(const CapacityDistribution& dist, int d, const std::vector<double>& sv);

struct FlowConstantRow {
  int64_t n = 0;
  int64_t h = 0;
  uint64_t trials = 0;
  double mean = 0, sd = 0, half_width = 0, min = 0, max = 0;
  std::vector<double> samples;  // tau / n^{d-1}
};

struct FlowConstantConfig {
  int d = 2;
  int axis = -1;  // normal axis, 0-based; -1 means the last one
  std::vector<int64_t> n_list{4, 8, 12};
  Rational h_factor = 1;  // h(n) = ceil(h_factor n)
  uint64_t trials = 10;
  CapacityDistribution dist;
  uint64_t seed = 1;
  int threads = 1;
};

// tau(nA, h(n)) / n^{d-1} with A = [0,1]^{d-1} x {0} (half-open transverse extents) and v = e_axis.
std::vector<FlowConstantRow> estimate_flow_constant(const FlowConstantConfig& cfg);

struct TailConfig {
  int d = 2;
  int64_t n = 3;
  std::vector<double> lambdas{0.0};
  uint64_t trials = 1000;
  CapacityDistribution dist;
  uint64_t seed = 1;
  int threads = 1;
};

struct TailRow {
  double lambda = 0;
  int64_t n = 0;
  uint64_t trials = 0, successes = 0;
  double phat = 0;
  Interval ci;
  double speed_surface = 0;  // -log phat / n^{d-1}
  double speed_volume = 0;   // -log phat / n^d
};

// P(phi_n >= lambda n^{d-1}) on the unit square domain with opposite faces as source and sink. The same
// capacity samples are used for every lambda.
std::vector<TailRow> tail_probability(const TailConfig& cfg, const LatticeDomain& L);

}  // namespace fpp
