#include "fpp/estimate.hpp"

#include "fpp/maxflow.hpp"
#include "fpp/parallel.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace fpp {

// ---------------------------------------------------------------------------------------------------------------
// Divergence projection

struct DivergenceProjector::Impl {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  Eigen::SparseMatrix<double> A;  // rows: interior vertices, columns: edges
};

DivergenceProjector::DivergenceProjector(int d, int64_t n, std::vector<EdgeId> edges, const std::vector<Vertex>& interior)
    : edges_(std::move(edges)), impl_(std::make_shared<Impl>()) {
  (void)n;
  std::map<EdgeId, int> index;
  for (size_t k = 0; k < edges_.size(); ++k) index.emplace(edges_[k], static_cast<int>(k));
  for (const Vertex& x : interior) {
    std::vector<std::pair<int, double>> row;
    for (int i = 0; i < d; ++i) {
      auto out = index.find(EdgeId{x, i});
      if (out != index.end()) row.push_back({out->second, -1.0});
      auto in = index.find(EdgeId{shifted(x, i, -1), i});
      if (in != index.end()) row.push_back({in->second, 1.0});
    }
    if (!row.empty()) rows_.push_back(std::move(row));
  }
  const int m = static_cast<int>(rows_.size());
  std::vector<Eigen::Triplet<double>> trip;
  for (int r = 0; r < m; ++r) {
    for (const auto& [c, v] : rows_[r]) trip.emplace_back(r, c, v);
  }
  impl_->A.resize(m, static_cast<int>(edges_.size()));
  impl_->A.setFromTriplets(trip.begin(), trip.end());
  if (m == 0) return;
  Eigen::SparseMatrix<double> L = impl_->A * impl_->A.transpose();
  // Components cut off by zero-capacity edges make L singular; the shift only moves the null directions.
  Eigen::SparseMatrix<double> I(m, m);
  I.setIdentity();
  L += 1e-12 * I;
  impl_->ldlt.compute(L);
  if (impl_->ldlt.info() != Eigen::Success) throw std::runtime_error("divergence projector: factorization failed");
}

std::vector<double> DivergenceProjector::project(const std::vector<double>& s) const {
  if (rows_.empty()) return s;
  Eigen::Map<const Eigen::VectorXd> x(s.data(), static_cast<long>(s.size()));
  Eigen::VectorXd y = x;
  for (int pass = 0; pass < 2; ++pass) {  // one refinement pass against the regularization
    Eigen::VectorXd r = impl_->A * y;
    y -= impl_->A.transpose() * impl_->ldlt.solve(r);
  }
  return std::vector<double>(y.data(), y.data() + y.size());
}

double DivergenceProjector::residual(const std::vector<double>& s) const {
  double worst = 0;
  for (const auto& row : rows_) {
    double div = 0;
    for (const auto& [c, v] : row) div += v * s[c];
    worst = std::max(worst, std::fabs(div));
  }
  return worst;
}

// ---------------------------------------------------------------------------------------------------------------
// min_distance

namespace {

struct Problem {
  int d = 2;
  int64_t n = 1;
  std::vector<EdgeId> edges;
  std::vector<double> cap;
  std::vector<std::vector<Rational>> mid;  // edge midpoints
};

VectorMeasure stream_measure(const Problem& P, const std::vector<double>& s, bool keep_zeros) {
  VectorMeasure mu;
  mu.d = P.d;
  const double vol = std::pow(static_cast<double>(P.n), P.d);
  for (size_t k = 0; k < s.size(); ++k) {
    if (s[k] == 0 && !keep_zeros) continue;
    Atom a;
    a.point = P.mid[k];
    a.weight.assign(P.d, 0.0);
    a.weight[P.edges[k].axis] = s[k] / vol;
    mu.atoms.push_back(std::move(a));
  }
  return mu;
}

// Dykstra between the divergence-free subspace and the capacity box, then an exact repair.
std::vector<double> make_feasible(const Problem& P, const DivergenceProjector& proj, std::vector<double> x, int sweeps) {
  const size_t E = x.size();
  std::vector<double> p(E, 0.0), q(E, 0.0), y(E);
  auto clip = [&](std::vector<double>& v) {
    for (size_t k = 0; k < E; ++k) v[k] = std::clamp(v[k], -P.cap[k], P.cap[k]);
  };
  for (int it = 0; it < sweeps; ++it) {
    std::vector<double> xp(E);
    for (size_t k = 0; k < E; ++k) xp[k] = x[k] + p[k];
    y = proj.project(xp);
    for (size_t k = 0; k < E; ++k) p[k] = xp[k] - y[k];
    std::vector<double> yq(E);
    for (size_t k = 0; k < E; ++k) yq[k] = y[k] + q[k];
    x = yq;
    clip(x);
    for (size_t k = 0; k < E; ++k) q[k] = yq[k] - x[k];
  }
  std::vector<double> z = proj.project(x);
  double theta = 1.0;
  for (size_t k = 0; k < E; ++k) {
    if (std::fabs(z[k]) > P.cap[k]) theta = std::min(theta, P.cap[k] / std::fabs(z[k]));
  }
  for (double& v : z) v *= theta;
  return z;
}

}  // namespace

MinDistanceResult min_distance(const Region& C, int64_t n, const Capacities<double>& t, const VectorMeasure& target,
                               double eps, const MinDistanceOptions& opts) {
  if (!(eps >= 0)) throw std::invalid_argument("min_distance: eps must be nonnegative");
  Problem P;
  P.d = C.d();
  P.n = n;
  std::vector<Vertex> verts = C.vertices(n);
  std::vector<Vertex> interior;
  for (const Vertex& x : verts) {
    bool in = true;
    for (int i = 0; i < P.d && in; ++i) in = C.contains(shifted(x, i, -1), n);
    if (in) interior.push_back(x);
    for (int i = 0; i < P.d; ++i) {
      EdgeId e{x, i};
      double c = t(e);
      if (c < 0) throw std::invalid_argument("min_distance: negative capacity");
      if (c == 0) continue;
      P.edges.push_back(e);
      P.cap.push_back(c);
      std::vector<Rational> m(P.d);
      for (int j = 0; j < P.d; ++j) m[j] = Rational(2 * x[j] + (j == i ? 1 : 0), 2 * n);
      P.mid.push_back(std::move(m));
    }
  }
  DivergenceProjector proj(P.d, n, P.edges, interior);
  const double cmax = P.cap.empty() ? 0.0 : *std::max_element(P.cap.begin(), P.cap.end());

  DistanceOptions dopt = opts.distance;
  dopt.stop_below = eps;
  dopt.stop_above = eps;

  MinDistanceResult best;
  best.stream = Stream<double>(P.d, n);
  auto to_stream = [&](const std::vector<double>& s) {
    Stream<double> f(P.d, n);
    for (size_t k = 0; k < s.size(); ++k) f.set(P.edges[k], s[k]);
    return f;
  };
  auto consider = [&](const std::vector<double>& s) {
    DistanceBracket b = distance(stream_measure(P, s, false), target, dopt);
    ++best.evaluations;
    if (b.upper < best.upper) {
      best.upper = b.upper;
      best.lower = b.lower;
      best.stream = to_stream(s);
      if (b.upper <= eps) best.status = FeasibilityStatus::Holds;
    }
    return b;
  };

  const std::vector<double> zero(P.edges.size(), 0.0);
  consider(zero);
  if (best.holds() || P.edges.empty()) return best;

  // Target density sampled at the edge midpoints.
  std::vector<double> s(P.edges.size(), 0.0);
  for (size_t k = 0; k < P.edges.size(); ++k) {
    for (const DensityBox& db : target.densities) {
      bool in = true;
      for (int j = 0; j < P.d && in; ++j) in = db.box.lo[j] <= P.mid[k][j] && P.mid[k][j] < db.box.hi[j];
      if (in) s[k] += db.value[P.edges[k].axis];
    }
  }
  s = make_feasible(P, proj, s, opts.dykstra_sweeps);
  DistanceBracket b = consider(s);
  if (opts.warm_start && !best.holds()) {
    std::vector<double> w(P.edges.size());
    for (size_t k = 0; k < P.edges.size(); ++k) w[k] = (*opts.warm_start)(P.edges[k]);
    w = make_feasible(P, proj, w, opts.dykstra_sweeps);
    DistanceBracket bw = consider(w);
    if (bw.upper < b.upper) {
      s = std::move(w);
      b = bw;
    }
  }

  const int K = dopt.K_max;
  for (int it = 1; it <= opts.iterations && !best.holds(); ++it) {
    // Subgradient of the truncated sum at the maximizing parameters of the last bracket.
    DistanceEngine engine(stream_measure(P, s, true) - target);
    std::vector<double> g(P.edges.size(), 0.0);
    const double vol = std::pow(static_cast<double>(n), P.d);
    for (int k = 0; k <= K; ++k) {
      const double side = b.argmax_lambda * std::ldexp(1.0, -k);
      std::map<std::vector<long long>, std::vector<double>> cache;
      for (size_t e = 0; e < P.edges.size(); ++e) {
        std::vector<long long> z(P.d);
        double lo[kMaxDim], hi[kMaxDim];
        for (int j = 0; j < P.d; ++j) {
          double p = ScalarTraits<Rational>::to_double(P.mid[e][j]);
          z[j] = static_cast<long long>(std::floor((p - b.argmax_x[j]) / side + 0.5));
          lo[j] = b.argmax_x[j] + side * (static_cast<double>(z[j]) - 0.5);
          hi[j] = lo[j] + side;
        }
        auto it2 = cache.find(z);
        if (it2 == cache.end()) it2 = cache.emplace(z, engine.mass(lo, hi)).first;
        const std::vector<double>& r = it2->second;
        double norm = 0;
        for (double c : r) norm += c * c;
        norm = std::sqrt(norm);
        if (norm > 0) g[e] += std::ldexp(r[P.edges[e].axis] / norm, -k) / vol;
      }
    }
    double gn = 0;
    for (double c : g) gn += c * c;
    gn = std::sqrt(gn);
    if (gn == 0) break;
    const double eta = opts.step * cmax / std::sqrt(static_cast<double>(it));
    for (size_t e = 0; e < s.size(); ++e) s[e] -= eta * g[e] / gn;
    s = make_feasible(P, proj, s, opts.dykstra_sweeps);
    b = consider(s);
  }
  return best;
}

// ---------------------------------------------------------------------------------------------------------------
// Monte Carlo

Interval wilson_interval(uint64_t successes, uint64_t trials, double z) {
  if (trials == 0) throw std::invalid_argument("wilson_interval: no trials");
  const double N = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / N;
  const double z2 = z * z;
  const double denom = 1 + z2 / N;
  const double centre = (p + z2 / (2 * N)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / N + z2 / (4 * N * N)) / denom;
  Interval out{std::max(0.0, centre - half), std::min(1.0, centre + half)};
  if (successes == 0) out.lo = 0;
  if (successes == trials) out.hi = 1;
  return out;
}

RateEstimate estimate_rate(const RateConfig& cfg) {
  if (cfg.trials == 0) throw std::invalid_argument("estimate_rate: trials must be positive");
  if (static_cast<int>(cfg.v.size()) != cfg.d) throw std::invalid_argument("estimate_rate: v must have d components");
  cfg.dist.validate();
  const std::vector<EdgeId> edges = cube_edges(cfg.d, cfg.n);
  const Region C = Region::unit_cube(cfg.d);
  std::vector<double> sv(cfg.d);
  for (int j = 0; j < cfg.d; ++j) sv[j] = cfg.s * cfg.v[j];
  const VectorMeasure target = density_measure(unit_cube_box(cfg.d), sv);

  std::vector<char> hit(cfg.trials, 0);
  std::vector<double> upper(cfg.trials, 0.0);
  MinDistanceOptions solver = cfg.solver;
  solver.distance.threads = 1;
  parallel_for(cfg.trials, cfg.threads, [&](size_t i) {
    Capacities<double> t = sample_capacities<double>(edges, cfg.dist, trial_seed(cfg.seed, i));
    MinDistanceResult r = min_distance(C, cfg.n, t, target, cfg.eps, solver);
    hit[i] = r.holds() ? 1 : 0;
    upper[i] = r.upper;
  });

  RateEstimate est;
  est.n = cfg.n;
  est.eps = cfg.eps;
  est.s = cfg.s;
  est.v = cfg.v;
  est.trials = cfg.trials;
  est.seed = cfg.seed;
  for (size_t i = 0; i < cfg.trials; ++i) {
    est.successes += static_cast<uint64_t>(hit[i]);
    est.best_upper_mean += upper[i];
  }
  est.best_upper_mean /= static_cast<double>(cfg.trials);
  est.phat = static_cast<double>(est.successes) / static_cast<double>(cfg.trials);
  est.ci = wilson_interval(est.successes, cfg.trials);
  const double vol = std::pow(static_cast<double>(cfg.n), cfg.d);
  est.I_hat = est.successes == cfg.trials ? 0.0 : -std::log(est.phat) / vol;
  est.I_hat_lower = est.ci.hi >= 1.0 ? 0.0 : -std::log(est.ci.hi) / vol;
  return est;
}

double rate_upper_bound(const CapacityDistribution& dist, int d, const std::vector<double>& sv) {
  double norm = 0;
  for (double c : sv) norm = std::max(norm, std::fabs(c));
  double p = dist.prob_at_least(norm);
  if (p <= 0) return std::numeric_limits<double>::infinity();
  return -d * std::log(p);
}

std::vector<FlowConstantRow> estimate_flow_constant(const FlowConstantConfig& cfg) {
  cfg.dist.validate();
  if (cfg.trials == 0) throw std::invalid_argument("flow constant: trials must be positive");
  const int axis = cfg.axis < 0 ? cfg.d - 1 : cfg.axis;
  if (axis >= cfg.d) throw std::invalid_argument("flow constant: axis out of range");
  std::vector<FlowConstantRow> rows;
  for (int64_t n : cfg.n_list) {
    if (n < 1) throw std::invalid_argument("flow constant: n must be >= 1");
    CylinderSpec cyl;
    std::vector<Rational> lo(cfg.d, Rational(0)), hi(cfg.d, Rational(n));
    hi[axis] = 0;
    cyl.A = make_box(lo, hi);
    FlowConstantRow row;
    row.n = n;
    row.h = ceil_to_ll(cfg.h_factor * n);
    cyl.h = row.h;
    cyl.v.assign(cfg.d, 0.0);
    cyl.v[axis] = 1.0;
    cyl.half_open_base = true;
    const CylinderSets sets = cylinder_sets(cyl, 1);
    const double area = std::pow(static_cast<double>(n), cfg.d - 1);
    row.trials = cfg.trials;
    row.samples.assign(cfg.trials, 0.0);
    const uint64_t base = trial_seed(cfg.seed, static_cast<uint64_t>(n));
    parallel_for(cfg.trials, cfg.threads, [&](size_t i) {
      Capacities<double> t = sample_capacities<double>(sets.halves, cfg.dist, trial_seed(base, i));
      row.samples[i] = max_flow(sets.halves, t, false).value / area;
    });
    double sum = 0;
    row.min = row.samples.front();
    row.max = row.samples.front();
    for (double x : row.samples) {
      sum += x;
      row.min = std::min(row.min, x);
      row.max = std::max(row.max, x);
    }
    row.mean = sum / static_cast<double>(cfg.trials);
    double ss = 0;
    for (double x : row.samples) ss += (x - row.mean) * (x - row.mean);
    row.sd = cfg.trials > 1 ? std::sqrt(ss / static_cast<double>(cfg.trials - 1)) : 0.0;
    row.half_width = 1.959963984540054 * row.sd / std::sqrt(static_cast<double>(cfg.trials));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<TailRow> tail_probability(const TailConfig& cfg, const LatticeDomain& L) {
  cfg.dist.validate();
  if (cfg.trials == 0) throw std::invalid_argument("tail: trials must be positive");
  std::vector<double> phi(cfg.trials, 0.0);
  parallel_for(cfg.trials, cfg.threads, [&](size_t i) {
    Capacities<double> t = sample_capacities<double>(L, cfg.dist, trial_seed(cfg.seed, i));
    phi[i] = max_flow(L, t, false).value;
  });
  const double surf = std::pow(static_cast<double>(L.n()), L.d() - 1);
  const double vol = surf * static_cast<double>(L.n());
  std::vector<TailRow> rows;
  for (double lambda : cfg.lambdas) {
    TailRow row;
    row.lambda = lambda;
    row.n = L.n();
    row.trials = cfg.trials;
    const double level = lambda * surf;
    for (double p : phi) {
      if (p >= level - 1e-9 * std::max(1.0, level)) ++row.successes;
    }
    row.phat = static_cast<double>(row.successes) / static_cast<double>(cfg.trials);
    row.ci = wilson_interval(row.successes, cfg.trials);
    const double lp = row.successes == 0 ? std::numeric_limits<double>::infinity()
                      : row.successes == cfg.trials ? 0.0 : -std::log(row.phat);
    row.speed_surface = lp / surf;
    row.speed_volume = lp / vol;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace fpp
