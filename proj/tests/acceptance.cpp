// Acceptance run: one PASS/FAIL line per criterion, tolerances and time limits pinned below.
//
//   fpp_acceptance <path-to-fpp-cli> [--expect-fail 5,7] [--only 1,3]
//
// Exit status is 0 when the set of failing criteria equals the --expect-fail list (empty by default).

#include "fpp/cli.hpp"
#include "fpp/estimate.hpp"
#include "fpp/maxflow.hpp"
#include "fpp/measure.hpp"
#include "fpp/reconnect.hpp"
#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

using namespace fpp;
using fpp::testing::brute_min_cut;
using fpp::testing::random_rational;
using fpp::testing::well_behaved_stream;
namespace fs = std::filesystem;

namespace {

// Time limits in seconds.
constexpr double kLimit1 = 60, kLimit2 = 30, kLimit3 = 120, kLimit4 = 120, kLimit5 = 60, kLimit6 = 60,
                 kLimit7 = 600, kLimit9 = 120;
constexpr double kGapTolerance = 0.05;      // criterion 4: upper - lower <= 5% of upper
constexpr double kL1Slack = 1e-12;          // criterion 4: absolute slack on the L1 bound
constexpr double kDiscTarget = 0.2;         // criterion 5: upper bracket at n = 16

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double x, int prec = 4) {
  std::ostringstream o;
  o.precision(prec);
  o << x;
  return o.str();
}

// ---------------------------------------------------------------------------------------------------------------

Outcome criterion1() {
  Outcome r;
  int mismatches = 0, duality = 0;
  for (int i = 0; i < 200; ++i) {
    int64_t n = 2 + i % 2;
    const char* dist = (i / 2) % 2 == 0 ? "bernoulli(0,1,1/2)" : "uniform(0,2)";
    LatticeDomain L = discretize_domain(unit_square_spec(2), n);
    auto t = sample_capacities<Rational>(L, CapacityDistribution::parse(dist), 1000 + i);
    auto res = max_flow(L, t);
    if (res.value != brute_min_cut(L, t)) ++mismatches;
    if (res.value != res.cut_capacity || flow_value(res.stream, L) != res.value) ++duality;
  }
  r.pass = mismatches == 0 && duality == 0;
  r.detail = "200 instances, " + std::to_string(mismatches) + " oracle mismatches, " + std::to_string(duality) +
             " flow/cut disagreements";
  return r;
}

Outcome criterion2() {
  Outcome r;
  int bad_sum = 0, bad_align = 0, bad_end = 0;
  size_t paths_total = 0;
  for (int i = 0; i < 50; ++i) {
    int64_t n = 2 + i % 3;
    const char* dist = i % 2 == 0 ? "uniform(0,2)" : "discrete(0:1/4,1/3:1/4,1:1/2)";
    LatticeDomain L = discretize_domain(unit_square_spec(2), n);
    auto t = sample_capacities<Rational>(L, CapacityDistribution::parse(dist), 2000 + i);
    auto f = max_flow(L, t).stream;
    auto paths = decompose(f, L);
    paths_total += paths.size();
    if (!(path_sum(paths, 2, n) == f)) ++bad_sum;
    for (const auto& p : paths) {
      if (p.vertices.size() < 2 || !L.is_terminal(p.vertices.front()) || !L.is_terminal(p.vertices.back())) ++bad_end;
      for (size_t k = 0; k + 1 < p.vertices.size(); ++k) {
        const Vertex &a = p.vertices[k], &b = p.vertices[k + 1];
        int axis = -1, dir = 0;
        for (int j = 0; j < 2; ++j) {
          if (b[j] - a[j] == 1) axis = j, dir = 1;
          if (b[j] - a[j] == -1) axis = j, dir = -1;
        }
        if (axis < 0 || !(f(EdgeId{dir > 0 ? a : b, axis}) * Rational(dir) > 0)) ++bad_align;
      }
    }
  }
  r.pass = bad_sum == 0 && bad_align == 0 && bad_end == 0;
  r.detail = "50 streams, " + std::to_string(paths_total) + " paths; reconstruction failures " + std::to_string(bad_sum) +
             ", misaligned edges " + std::to_string(bad_align) + ", bad endpoints " + std::to_string(bad_end);
  return r;
}

// ---------------------------------------------------------------------------------------------------------------

MixSpec<Rational> base_spec(int64_t length, int64_t n, const Family<Rational>& in, const Family<Rational>& out,
                            const Rational& M) {
  MixSpec<Rational> s;
  s.length = length;
  s.n = n;
  s.inputs = in;
  s.outputs = out;
  s.axis_lo = -M;
  s.axis_hi = M;
  s.transverse_bound = M;
  return s;
}

Family<Rational> uniform_of(const Family<Rational>& in) {
  Family<Rational> o(in.k, in.n);
  Rational mean = in.sum() / Rational(static_cast<long>(in.size()));
  for (auto& x : o.values) x = mean;
  return o;
}

Family<Rational> random_family(std::mt19937_64& rng, int k, int64_t n, const Rational& M) {
  Family<Rational> f(k, n);
  for (auto& x : f.values) x = M * random_rational(rng, -6, 6, 6);
  return f;
}

Family<Rational> matched_family(std::mt19937_64& rng, const Family<Rational>& in, const Rational& M) {
  Family<Rational> o = random_family(rng, in.k, in.n, M);
  Rational gap = in.sum() - o.sum();
  for (auto& x : o.values) {
    Rational room = gap > 0 ? Rational(M - x) : Rational(-M - x);
    Rational step = gap > 0 ? std::min(room, gap) : std::max(room, gap);
    x += step;
    gap -= step;
  }
  return o;
}

Outcome criterion3() {
  Outcome r;
  std::mt19937_64 rng(303);
  int fails[4] = {0, 0, 0, 0};
  double worst_support = 0;
  for (int trial = 0; trial < 500; ++trial) {
    int64_t n = 1 + trial % 8;
    Rational M(1 + trial % 3);
    Family<Rational> in = random_family(rng, 1, n, M);
    Mix2dTrace trace;
    auto f = mix2d(in.values, M, &trace);
    if (!trace.ok() || !verify_mix(f, base_spec(n, n, in, uniform_of(in), M)).ok()) ++fails[0];
  }
  for (int trial = 0; trial < 500; ++trial) {
    int d = 2 + trial % 2;
    int64_t n = 1 + (trial / 2) % (d == 2 ? 8 : 4);
    Rational M(1 + trial % 2);
    Family<Rational> in = random_family(rng, d - 1, n, M);
    Family<Rational> out = trial % 5 == 0 ? uniform_of(in) : matched_family(rng, in, M);
    int64_t m = 2 * (d - 1) * n + trial % 3;
    if (!verify_mix(mix(in, out, m, M), base_spec(m, n, in, out, M)).ok()) ++fails[1];
  }
  for (int trial = 0; trial < 500; ++trial) {
    int d = 2 + trial % 2;
    int K = 2 * (d - 1) + (d == 2 ? trial % 3 : 0);
    int64_t n = K + (trial / 3) % (9 - K);
    Rational M(1);
    Family<Rational> in = random_family(rng, d - 1, n / K, M);
    Family<Rational> out = matched_family(rng, in, M);
    auto f = mix_sparse(in, out, n, K, M);
    auto spec = base_spec(n, n, in, out, M);
    spec.K = K;
    spec.support_cap = 3.0 * d * std::pow(double(n), d) / std::pow(double(K), d - 2);
    auto rep = verify_mix(f, spec);
    worst_support = std::max(worst_support, double(rep.support) / spec.support_cap);
    if (!rep.ok()) ++fails[2];
  }
  int precise_run = 0;
  for (int trial = 0; precise_run < 500; ++trial) {
    int d = 2 + trial % 2;
    int64_t n = 1 + trial % (d == 2 ? 8 : 4);
    Rational M(1), eps(1, 4);
    Family<Rational> in(d - 1, n);
    for (auto& x : in.values) x = random_rational(rng, -8, 2, 8);
    if (precise_prefix_failure(in, eps) >= 0) continue;
    ++precise_run;
    auto spec = base_spec((d - 1) * n, n, in, uniform_of(in), M);
    spec.axis_hi = eps;
    spec.transverse_bound = eps;
    if (!verify_mix(mix_precise(in, M, eps), spec).ok()) ++fails[3];
  }
  r.pass = fails[0] + fails[1] + fails[2] + fails[3] == 0;
  r.detail = "failures mix2d " + std::to_string(fails[0]) + "/500, mix " + std::to_string(fails[1]) +
             "/500, mix_sparse " + std::to_string(fails[2]) + "/500, mix_precise " + std::to_string(fails[3]) +
             "/500; max support / cap " + fmt(worst_support, 3);
  return r;
}

// ---------------------------------------------------------------------------------------------------------------

VectorMeasure random_density(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(-4, 4);
  VectorMeasure m;
  m.d = 2;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      RBox b = make_box({Rational(i - 1, 2), Rational(j - 1, 2)}, {Rational(i, 2), Rational(j, 2)});
      m.densities.push_back(DensityBox{b, {u(rng) / 4.0, u(rng) / 4.0}});
    }
  }
  return m;
}

Outcome criterion4() {
  Outcome r;
  std::mt19937_64 rng(404);
  DistanceOptions o;
  o.K_max = 12;
  o.rel_gap = kGapTolerance;
  RBox left = make_box({Rational(-1, 2), Rational(-1, 2)}, {Rational(0), Rational(1, 2)});
  RBox right = make_box({Rational(0), Rational(-1, 2)}, {Rational(1, 2), Rational(1, 2)});
  int l1_bad = 0, sub_bad = 0, order_bad = 0, gap_bad = 0;
  double worst_gap = 0, worst_ratio = 0;
  for (int pair = 0; pair < 50; ++pair) {
    VectorMeasure f = random_density(rng), g = random_density(rng);
    DistanceBracket whole = distance(f, g, o);
    DistanceBracket a = distance(f.restricted(left), g.restricted(left), o);
    DistanceBracket b = distance(f.restricted(right), g.restricted(right), o);
    double l1 = (f - g).total_variation();
    for (const DistanceBracket* x : {&whole, &a, &b}) {
      if (!(0 <= x->lower && x->lower <= x->upper)) ++order_bad;
      double gap = x->upper > 0 ? x->gap() / x->upper : 0.0;
      worst_gap = std::max(worst_gap, gap);
      if (gap > kGapTolerance) ++gap_bad;
    }
    if (whole.upper > 2 * l1 + kL1Slack) ++l1_bad;
    if (l1 > 0) worst_ratio = std::max(worst_ratio, whole.upper / (2 * l1));
    if (whole.lower > a.upper + b.upper + kL1Slack) ++sub_bad;
  }
  r.pass = l1_bad + sub_bad + order_bad + gap_bad == 0;
  r.detail = "50 pairs; upper > 2 L1: " + std::to_string(l1_bad) + " (max upper/2L1 " + fmt(worst_ratio, 3) +
             "), subadditivity violations " + std::to_string(sub_bad) + ", bracket order " +
             std::to_string(order_bad) + ", gap > 5%: " + std::to_string(gap_bad) + " (max " + fmt(worst_gap, 3) + ")";
  return r;
}

Outcome criterion5() {
  Outcome r;
  ContinuousField sigma = constant_field(unit_cube_box(2), {Rational(1), Rational(0)}, Rational(1));
  VectorMeasure target = density_measure(unit_cube_box(2), {1.0, 0.0});
  Region C = Region::unit_cube(2);
  DistanceOptions o;
  o.K_max = 12;
  o.rel_gap = 0.01;
  o.max_cells = 6000;
  std::vector<DistanceBracket> b;
  std::string rows;
  for (int64_t n : {4, 8, 16}) {
    auto f = discretize_field<double>(sigma, C, n, Rational(1));
    b.push_back(distance(vector_measure(f), target, o));
    rows += " n=" + std::to_string(n) + " [" + fmt(b.back().lower) + ", " + fmt(b.back().upper) + "]";
  }
  bool decreasing = b[0].upper > b[1].upper && b[1].upper > b[2].upper;
  bool small = b[2].upper < kDiscTarget;
  r.pass = decreasing && small;
  r.detail = "brackets" + rows + "; strictly decreasing upper: " + (decreasing ? "yes" : "no") + "; upper(16) < " +
             fmt(kDiscTarget) + ": " + (small ? "yes" : "no");
  if (!small && b[2].lower >= kDiscTarget) r.detail += " (lower bracket already exceeds the target: unattainable)";
  return r;
}

Outcome criterion6() {
  Outcome r;
  FlowConstantConfig cfg;
  cfg.n_list = {4, 8, 12};
  cfg.trials = 5;
  cfg.dist = CapacityDistribution::constant(1);
  int off = 0;
  size_t samples = 0;
  for (const auto& row : estimate_flow_constant(cfg)) {
    for (double x : row.samples) {
      ++samples;
      if (x != 1.0) ++off;
    }
  }
  r.pass = off == 0 && samples == 15;
  r.detail = std::to_string(samples) + " samples over n = 4, 8, 12; ratios different from 1: " + std::to_string(off);
  return r;
}

Outcome criterion7() {
  Outcome r;
  RateConfig zero;
  zero.n = 3;
  zero.s = 0;
  zero.trials = 50;
  zero.dist = CapacityDistribution::parse("bernoulli(0,1,1/2)");
  RateEstimate z = estimate_rate(zero);
  bool anchor0 = z.phat == 1.0 && z.I_hat == 0.0;

  RateConfig cfg;
  cfg.n = 3;
  cfg.s = 0.5;
  cfg.eps = 0.3;
  cfg.v = {1.0, 0.0};
  cfg.trials = 2000;
  cfg.dist = CapacityDistribution::parse("bernoulli(0,1,1/2)");
  RateEstimate e = estimate_rate(cfg);
  const double bound = rate_upper_bound(cfg.dist, 2, {0.5, 0.0});
  const double vol = 9.0;
  // Half-width of I_hat = -log(p)/n^d from the Wilson interval, mapped through the logarithm.
  double hw = std::numeric_limits<double>::infinity();
  double point = std::numeric_limits<double>::infinity();
  if (e.successes > 0) {
    point = -std::log(e.phat) / vol;
    hw = 0.5 * (std::log(e.ci.hi) - std::log(e.ci.lo > 0 ? e.ci.lo : e.ci.hi * 1e-300)) / vol;
  }
  bool anchor1 = e.successes > 0 && point <= bound + 3 * hw;
  r.pass = anchor0 && anchor1;
  r.detail = "I_hat(0) = " + fmt(z.I_hat) + " with phat " + fmt(z.phat) + (anchor0 ? " ok" : " WRONG") +
             "; s = 0.5: successes " + std::to_string(e.successes) + "/" + std::to_string(e.trials) + ", Wilson [" +
             fmt(e.ci.lo, 3) + ", " + fmt(e.ci.hi, 3) + "], bound 2 log 2 = " + fmt(bound);
  if (e.successes > 0) {
    r.detail += ", I_hat " + fmt(point) + " +- " + fmt(hw);
  } else {
    // The natural candidate, s v discretized, is admissible when every capacity is 1 (the largest value of G).
    ContinuousField sigma = constant_field(unit_cube_box(2), {Rational(1, 2), Rational(0)}, Rational(1));
    auto disc = discretize_field<double>(sigma, Region::unit_cube(2), cfg.n, Rational(1));
    DistanceBracket floor = distance(vector_measure(disc), density_measure(unit_cube_box(2), {0.5, 0.0}));
    r.detail += ", I_hat = +inf (no success; -log(hi)/n^d = " + fmt(e.I_hat_lower) + " is only a lower bound)" +
                "; discretized s v at n = 3 has distance in [" + fmt(floor.lower) + ", " + fmt(floor.upper) +
                "] vs eps " + fmt(cfg.eps);
  }
  return r;
}

// ---------------------------------------------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion8(const std::string& cli) {
  Outcome r;
  fs::path root = fs::temp_directory_path() / "fpp_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  struct Job {
    std::string command, config;
  };
  const std::vector<Job> jobs = {
      {"rate", "n = 2\ns = 0.3\neps = 1.2\ntrials = 40\ndistribution = uniform(0,1)\niterations = 2\nmax_cells = 300\n"
               "seed = 7\n"},
      {"flow-constant", "n = 4, 8\ntrials = 6\ndistribution = uniform(0,2)\nseed = 7\n"},
      {"tail", "n = 3\nlambda = 0.2, 0.4, 0.6\ntrials = 200\ndistribution = bernoulli(0,1,1/2)\nseed = 7\n"},
  };
  int diffs = 0, errors = 0;
  std::string bad;
  for (const Job& job : jobs) {
    fs::path dir = root / job.command;
    fs::create_directories(dir);
    {
      std::ofstream(dir / "run.cfg") << job.config;
    }
    auto run = [&](const std::string& out, int threads) {
      std::string cmd = "\"" + cli + "\" " + job.command + " -c \"" + (dir / "run.cfg").string() + "\" -o \"" +
                        (dir / out).string() + "\" -t " + std::to_string(threads) + " > /dev/null 2>&1";
      return std::system(cmd.c_str());
    };
    if (run("a", 1) != 0 || run("b", 1) != 0 || run("c", 8) != 0) {
      ++errors;
      bad += " " + job.command + "(exit)";
      continue;
    }
    size_t files = 0;
    for (const auto& entry : fs::directory_iterator(dir / "a")) {
      const std::string name = entry.path().filename().string();
      ++files;
      std::string a = slurp(entry.path());
      if (a != slurp(dir / "b" / name)) {
        ++diffs;
        bad += " " + job.command + "/" + name + "(rerun)";
      }
      // The manifest records the thread count; every other file must match across thread settings.
      if (name != "manifest.json" && a != slurp(dir / "c" / name)) {
        ++diffs;
        bad += " " + job.command + "/" + name + "(threads)";
      }
    }
    if (files < 2) {
      ++errors;
      bad += " " + job.command + "(no outputs)";
    }
  }
  r.pass = diffs == 0 && errors == 0;
  r.detail = "rate, flow-constant, tail: two runs at -t 1 and one at -t 8; differing files " + std::to_string(diffs) +
             ", failed runs " + std::to_string(errors) + bad;
  return r;
}

Outcome criterion9() {
  Outcome r;
  std::mt19937_64 rng(909);
  const int64_t N = 16;
  const int m = 2, K = 2;
  RBox QA = make_box({Rational(0), Rational(0)}, {Rational(1), Rational(1)});
  RBox QB = make_box({Rational(2), Rational(0)}, {Rational(3), Rational(1)});
  Rational damping(7, 8), M(4);
  int glue_bad = 0;
  for (int trial = 0; trial < 50; ++trial) {
    // Direction along the glue axis; a transverse part moves flux between face cells on B's entry layer.
    std::vector<Rational> v{random_rational(rng, 1, 8, 8), Rational(0)};
    auto fA = well_behaved_stream(QA, N, m, K, v, damping, 0, rng);
    auto fB = well_behaved_stream(QB, N, m, K, v, damping, 0, rng);
    if (!is_well_behaved(fA, QA, m, v, damping) || !is_well_behaved(fB, QB, m, v, damping)) {
      ++glue_bad;
      continue;
    }
    auto h = glue_adjacent(fA, fB, QA, QB, m, M);
    auto rep = admissibility_region_report(h, Capacities<Rational>::everywhere(M), Region({glue_region(QA, QB)}));
    if (!rep.ok()) ++glue_bad;
  }
  int balance_bad = 0;
  RBox Q = unit_cube_box(2);
  for (int trial = 0; trial < 50; ++trial) {
    FaceFluxes<Rational> lam(2, m), beta(2, m);
    for (size_t s = 0; s < lam.v.size(); ++s) {
      for (size_t c = 0; c < lam.v[s].size(); ++c) {
        lam.v[s][c] = random_rational(rng, -8, 8, 4);
        beta.v[s][c] = lam.v[s][c] + random_rational(rng, -4, 4, 4);
      }
    }
    Rational diff = (beta.total(1) - lam.total(1)) - (beta.total(-1) - lam.total(-1));
    beta.face(0, 1)[0] -= diff;
    auto f = balance_faces(lam, beta, Q, N, K);
    auto got = measure_face_fluxes(f, Q, m);
    bool exact = true;
    for (size_t s = 0; s < got.v.size(); ++s) {
      for (size_t c = 0; c < got.v[s].size(); ++c) exact = exact && got.v[s][c] == beta.v[s][c] - lam.v[s][c];
    }
    if (!exact) ++balance_bad;
  }
  r.pass = glue_bad == 0 && balance_bad == 0;
  r.detail = "50 glue trials, inadmissible " + std::to_string(glue_bad) + "; 50 balance trials, inexact " +
             std::to_string(balance_bad);
  return r;
}

std::set<int> parse_list(const std::string& s) {
  std::set<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.insert(std::stoi(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  std::set<int> expect_fail, only;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--expect-fail" && i + 1 < argc) {
      expect_fail = parse_list(argv[++i]);
    } else if (a == "--only" && i + 1 < argc) {
      only = parse_list(argv[++i]);
    } else {
      cli = a;
    }
  }
  if (cli.empty()) {
    std::cerr << "usage: fpp_acceptance <fpp-cli> [--expect-fail 5,7] [--only 1,2]\n";
    return 2;
  }

  struct Criterion {
    int id;
    const char* name;
    double limit;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all = {
      {1, "max-flow/min-cut exactness", kLimit1, criterion1},
      {2, "decomposition fidelity", kLimit2, criterion2},
      {3, "mixing suites", kLimit3, criterion3},
      {4, "distance brackets", kLimit4, criterion4},
      {5, "discretization convergence", kLimit5, criterion5},
      {6, "flow-constant anchor", kLimit6, criterion6},
      {7, "rate-function anchors", kLimit7, criterion7},
      {8, "determinism", 0, [&] { return criterion8(cli); }},
      {9, "glue and balance", kLimit9, criterion9},
  };

  std::set<int> failed;
  for (const Criterion& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    double secs = seconds_since(t0);
    bool in_time = c.limit <= 0 || secs < c.limit;
    bool pass = o.pass && in_time;
    if (!pass) failed.insert(c.id);
    std::printf("criterion %d: %s  %s (%.1f s%s) %s\n", c.id, pass ? "PASS" : "FAIL", c.name, secs,
                c.limit > 0 ? (" of " + fmt(c.limit, 3) + " s").c_str() : "", o.detail.c_str());
    std::fflush(stdout);
  }
  std::set<int> expected;
  for (int id : expect_fail) {
    if (only.empty() || only.count(id)) expected.insert(id);
  }
  if (failed != expected) {
    std::printf("failing criteria differ from the expected list\n");
    return 1;
  }
  return 0;
}
