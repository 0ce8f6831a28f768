#include "fpp/cli.hpp"

#include "fpp/estimate.hpp"
#include "fpp/io.hpp"
#include "fpp/maxflow.hpp"
#include "fpp/parallel.hpp"
#include "fpp/reconnect.hpp"
#include "fpp/stream.hpp"

#include <cmath>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>

#ifndef FPP_VERSION
#define FPP_VERSION "0.0.0"
#endif
#ifndef FPP_GIT_REVISION
#define FPP_GIT_REVISION "unknown"
#endif

namespace fpp {

namespace fs = std::filesystem;
using nlohmann::json;

ConfigError::ConfigError(const std::string& key, int line, const std::string& message)
    : std::runtime_error(message), key_(key), line_(line) {}

std::string version_string() { return FPP_VERSION; }
std::string git_revision() { return FPP_GIT_REVISION; }

// ---------------------------------------------------------------------------------------------------------------
// Config

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool valid_key(const std::string& k) {
  if (k.empty() || !(std::isalpha(static_cast<unsigned char>(k[0])) || k[0] == '_')) return false;
  return std::all_of(k.begin(), k.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

}  // namespace

std::vector<std::string> split_top_level(const std::string& text, char sep) {
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  for (char c : text) {
    if (c == '[' || c == '{' || c == '(') ++depth;
    if (c == ']' || c == '}' || c == ')') --depth;
    if (c == sep && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  if (out.size() == 1 && out[0].empty()) out.clear();
  return out;
}

Config Config::parse(std::istream& is) {
  Config cfg;
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    size_t hash = raw.find('#');
    std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    size_t eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError("", line, "expected 'key = value'");
    std::string key = trim(text.substr(0, eq));
    if (!valid_key(key)) throw ConfigError(key, line, "invalid key '" + key + "'");
    std::string value = trim(text.substr(eq + 1));
    if (value.empty()) throw ConfigError(key, line, "empty value");
    cfg.entries_[key] = Entry{value, line};
  }
  return cfg;
}

Config Config::parse_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", 0, "cannot open config file " + path.string());
  Config cfg = parse(in);
  cfg.base_dir_ = path.has_parent_path() ? path.parent_path() : fs::path(".");
  return cfg;
}

void Config::set(const std::string& assignment) {
  size_t eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError(assignment, 0, "override must be key=value");
  std::string key = trim(assignment.substr(0, eq));
  if (!valid_key(key)) throw ConfigError(key, 0, "invalid key '" + key + "'");
  set(key, trim(assignment.substr(eq + 1)), 0);
}

void Config::set(const std::string& key, const std::string& value, int line) { entries_[key] = Entry{value, line}; }

void Config::fail(const std::string& key, const std::string& message) const {
  auto it = entries_.find(key);
  throw ConfigError(key, it == entries_.end() ? 0 : it->second.line, message);
}

std::string Config::str(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError(key, 0, "missing required key");
  return it->second.value;
}

std::string Config::str(const std::string& key, const std::string& fallback) const {
  return has(key) ? str(key) : fallback;
}

int64_t Config::integer(const std::string& key) const {
  const std::string v = str(key);
  try {
    size_t pos = 0;
    long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    fail(key, "expected an integer, got '" + v + "'");
  }
}

int64_t Config::integer(const std::string& key, int64_t fallback) const { return has(key) ? integer(key) : fallback; }

uint64_t Config::seed(const std::string& key, uint64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string v = str(key);
  try {
    size_t pos = 0;
    unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size() || v[0] == '-') throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    fail(key, "expected a non-negative integer, got '" + v + "'");
  }
}

double Config::real(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  try {
    return parse_scalar<double>(str(key));
  } catch (const std::exception&) {
    fail(key, "expected a number, got '" + str(key) + "'");
  }
}

Rational Config::rational(const std::string& key) const {
  try {
    return parse_rational(str(key));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    fail(key, "expected a rational, got '" + str(key) + "'");
  }
}

Rational Config::rational(const std::string& key, const Rational& fallback) const {
  return has(key) ? rational(key) : fallback;
}

bool Config::flag(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  std::string v = str(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(key, "expected true or false, got '" + v + "'");
}

std::vector<std::string> Config::list(const std::string& key) const {
  auto items = split_top_level(str(key), ',');
  for (const auto& s : items) {
    if (s.empty()) fail(key, "empty list item");
  }
  return items;
}

std::vector<int64_t> Config::integers(const std::string& key) const {
  std::vector<int64_t> out;
  for (const auto& s : list(key)) {
    try {
      size_t pos = 0;
      long long x = std::stoll(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("trailing");
      out.push_back(x);
    } catch (const std::exception&) {
      fail(key, "expected integers, got '" + s + "'");
    }
  }
  return out;
}

std::vector<double> Config::reals(const std::string& key) const {
  std::vector<double> out;
  for (const auto& s : list(key)) {
    try {
      out.push_back(parse_scalar<double>(s));
    } catch (const std::exception&) {
      fail(key, "expected numbers, got '" + s + "'");
    }
  }
  return out;
}

std::vector<Rational> Config::rationals(const std::string& key) const {
  std::vector<Rational> out;
  for (const auto& s : list(key)) {
    try {
      out.push_back(parse_rational(s));
    } catch (const std::exception&) {
      fail(key, "expected rationals, got '" + s + "'");
    }
  }
  return out;
}

std::vector<RBox> Config::boxes(const std::string& key) const {
  try {
    auto b = parse_boxes(str(key));
    if (b.empty()) fail(key, "expected at least one box");
    return b;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail(key, e.what());
  }
}

CapacityDistribution Config::distribution(const std::string& key) const {
  try {
    return CapacityDistribution::parse(str(key));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail(key, e.what());
  }
}

fs::path Config::path(const std::string& key) const {
  fs::path p = str(key);
  return p.is_absolute() ? p : base_dir_ / p;
}

void Config::require_known(const std::set<std::string>& allowed, const std::string& command) const {
  for (const auto& [key, entry] : entries_) {
    if (!allowed.count(key)) throw ConfigError(key, entry.line, "unknown key for '" + command + "'");
  }
}

// ---------------------------------------------------------------------------------------------------------------
// Schema

namespace {

const std::set<std::string> kCommon{"command", "seed", "threads"};

const std::map<std::string, std::set<std::string>>& schemas() {
  static const std::map<std::string, std::set<std::string>> s{
      {"maxflow", {"d", "n", "region", "gamma1", "gamma2", "distribution", "capacities", "scalar"}},
      {"tau", {"d", "n", "A", "h", "v", "half_open_base", "distribution", "capacities", "scalar"}},
      {"decompose", {"d", "n", "region", "gamma1", "gamma2", "distribution", "capacities", "stream", "scalar"}},
      {"mix-demo", {"routine", "d", "n", "m", "K", "M", "eps", "inputs", "outputs", "scalar"}},
      {"distance", {"mu", "nu", "K_max", "rel_gap", "max_cells"}},
      {"rate",
       {"d", "n", "s", "v", "eps", "trials", "distribution", "iterations", "step", "dykstra_sweeps", "K_max", "rel_gap",
        "max_cells"}},
      {"flow-constant", {"d", "n", "axis", "h_factor", "trials", "distribution"}},
      {"tail", {"d", "n", "lambda", "trials", "distribution", "region", "gamma1", "gamma2"}},
  };
  return s;
}

template <class T>
void require_positive(const Config& c, const std::string& key, T value) {
  if (value <= 0) c.fail(key, "must be positive");
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"maxflow", "tau",  "decompose",     "mix-demo",
                                              "distance", "rate", "flow-constant", "tail"};
  return names;
}

ExperimentConfig make_experiment(const std::string& command, const Config& raw, const fs::path& out_dir,
                                 int threads_flag) {
  auto schema = schemas().find(command);
  if (schema == schemas().end()) throw ConfigError("command", 0, "unknown subcommand '" + command + "'");
  if (raw.has("command") && raw.str("command") != command) {
    raw.fail("command", "config is for '" + raw.str("command") + "', not '" + command + "'");
  }
  std::set<std::string> allowed = kCommon;
  allowed.insert(schema->second.begin(), schema->second.end());
  raw.require_known(allowed, command);

  ExperimentConfig cfg;
  cfg.command = command;
  cfg.raw = raw;
  cfg.out_dir = out_dir;
  cfg.seed = raw.seed("seed", 1);
  if (threads_flag > 0) {
    cfg.threads = threads_flag;
  } else if (raw.has("threads")) {
    int64_t t = raw.integer("threads");
    require_positive(raw, "threads", t);
    cfg.threads = static_cast<int>(t);
  } else {
    cfg.threads = resolve_threads(0);
  }

  const int d = static_cast<int>(raw.integer("d", 2));
  if (d < 2 || d > kMaxDim) raw.fail("d", "must be in [2, " + std::to_string(kMaxDim) + "]");
  cfg.domain = unit_square_spec(d);
  if (raw.has("region") || raw.has("gamma1") || raw.has("gamma2")) {
    for (const char* k : {"region", "gamma1", "gamma2"}) {
      if (!raw.has(k)) raw.fail(k, "region, gamma1 and gamma2 must be given together");
    }
    cfg.domain.region = raw.boxes("region");
    cfg.domain.gamma1 = raw.boxes("gamma1");
    cfg.domain.gamma2 = raw.boxes("gamma2");
    try {
      cfg.domain.validate();
    } catch (const std::exception& e) {
      raw.fail("region", e.what());
    }
  }
  if (schema->second.count("distribution")) {
    cfg.dist = raw.has("distribution") ? raw.distribution("distribution") : CapacityDistribution::constant(1);
  }
  if (schema->second.count("n")) {
    cfg.n_list = raw.has("n") ? raw.integers("n") : std::vector<int64_t>{command == "flow-constant" ? 4 : 3};
    for (int64_t n : cfg.n_list) require_positive(raw, "n", n);
  }
  if (schema->second.count("eps")) {
    cfg.eps = raw.has("eps") ? raw.reals("eps") : std::vector<double>{0.3};
    for (double e : cfg.eps) require_positive(raw, "eps", e);
  }
  if (schema->second.count("trials")) {
    uint64_t fallback = command == "rate" ? 100 : command == "tail" ? 1000 : 10;
    cfg.trials = raw.seed("trials", fallback);
    if (cfg.trials == 0) raw.fail("trials", "must be positive");
  }
  if (schema->second.count("scalar")) {
    std::string s = raw.str("scalar", "rational");
    if (s != "rational" && s != "double") raw.fail("scalar", "expected rational or double");
  }
  return cfg;
}

// ---------------------------------------------------------------------------------------------------------------
// Subcommands

namespace {

struct Artifacts {
  fs::path dir;
  std::vector<std::string> written;

  void text(const std::string& name, const std::string& body) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out << body;
    written.push_back(name);
  }
  void json_file(const std::string& name, const json& j) { text(name, j.dump(2) + "\n"); }
};

template <class S>
json scalar_json(const S& x) {
  if constexpr (ScalarTraits<S>::exact) {
    return format_scalar(x);
  } else {
    return x;
  }
}

std::string coords(const Vertex& x, int d) {
  std::string s;
  for (int i = 0; i < d; ++i) {
    if (i) s += ",";
    s += std::to_string(x[i]);
  }
  return s;
}

int dim(const ExperimentConfig& c) { return c.domain.d; }
bool rational_mode(const ExperimentConfig& c) { return c.raw.str("scalar", "rational") == "rational"; }

int64_t single_n(const ExperimentConfig& c) {
  if (c.n_list.size() != 1) c.raw.fail("n", "this command takes a single n");
  return c.n_list.front();
}

template <class S>
Capacities<S> load_or_sample(const ExperimentConfig& c, const std::vector<EdgeId>& edges, int d) {
  if (c.raw.has("capacities")) {
    std::ifstream in(c.raw.path("capacities"));
    if (!in) c.raw.fail("capacities", "cannot open " + c.raw.path("capacities").string());
    try {
      return read_capacities<S>(in, d);
    } catch (const std::exception& e) {
      c.raw.fail("capacities", e.what());
    }
  }
  return sample_capacities<S>(edges, c.dist, c.seed);
}

template <class S>
void run_maxflow(const ExperimentConfig& c, Artifacts& out, std::ostream& log) {
  const int d = dim(c);
  const int64_t n = single_n(c);
  LatticeDomain L = discretize_domain(c.domain, n);
  Capacities<S> t = load_or_sample<S>(c, L.edges(), d);
  MaxFlowResult<S> r = max_flow(L, t);

  AdmissibilityReport adm = admissibility_report(r.stream, t, L);
  S fv = flow_value(r.stream, L);
  double scale = ScalarTraits<S>::to_double(r.value);
  bool duality = near_equal(r.value, r.cut_capacity, scale) && near_equal(fv, r.value, scale);
  bool separating = separates(L, r.cut);

  std::ostringstream s, cut, caps;
  write_stream(s, r.stream);
  write_edges(cut, r.cut, d);
  write_capacities(caps, t, d);
  out.text("stream.txt", s.str());
  out.text("cut.txt", cut.str());
  out.text("capacities.txt", caps.str());
  json j{{"d", d},
         {"n", n},
         {"scalar", ScalarTraits<S>::name},
         {"vertices", L.size()},
         {"sources", L.sources().size()},
         {"sinks", L.sinks().size()},
         {"value", scalar_json(r.value)},
         {"value_double", ScalarTraits<S>::to_double(r.value)},
         {"cut_capacity", scalar_json(r.cut_capacity)},
         {"cut_edges", r.cut.size()},
         {"stream_support", r.stream.support_size()},
         {"duality_ok", duality},
         {"cut_separates", separating},
         {"admissible", adm.ok()}};
  out.json_file("maxflow.json", j);
  log << "max flow " << format_scalar(r.value) << " (cut " << r.cut.size() << " edges)\n";
  if (!duality) throw InvariantViolation("flow value and cut capacity differ");
  if (!separating) throw InvariantViolation("returned cut does not separate the terminals");
  if (!adm.ok()) throw InvariantViolation("max-flow stream not admissible: " + adm.summary(d));
}

template <class S>
void run_tau(const ExperimentConfig& c, Artifacts& out, std::ostream& log) {
  const int d = dim(c);
  const int64_t n = single_n(c);
  CylinderSpec cyl;
  std::vector<Rational> lo(d, Rational(0)), hi(d, Rational(1));
  hi[d - 1] = 0;
  cyl.A = c.raw.has("A") ? c.raw.boxes("A").front() : make_box(lo, hi);
  if (cyl.A.dim() != d) c.raw.fail("A", "dimension differs from d");
  cyl.h = c.raw.rational("h", Rational(1));
  cyl.half_open_base = c.raw.flag("half_open_base", true);
  try {
    int axis = -1;
    for (int i = 0; i < d; ++i) {
      if (cyl.A.lo[i] == cyl.A.hi[i]) axis = i;
    }
    std::vector<double> v(d, 0.0);
    if (axis >= 0) v[axis] = 1.0;
    cyl.v = c.raw.has("v") ? c.raw.reals("v") : v;
    cyl.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    c.raw.fail("A", e.what());
  }
  CylinderSets sets = cylinder_sets(cyl, n);
  std::vector<EdgeId> edges = sets.halves.edges();
  for (const EdgeId& e : sets.top_bottom.edges()) edges.push_back(e);
  Capacities<S> t = load_or_sample<S>(c, edges, d);
  S tau = max_flow(sets.halves, t, false).value;
  S phi = max_flow(sets.top_bottom, t, false).value;
  Rational area = cyl.A.volume();
  for (int i = 0; i < d; ++i) {
    if (cyl.A.lo[i] == cyl.A.hi[i]) {
      area = 1;
      for (int k = 0; k < d; ++k) {
        if (k != i) area *= cyl.A.hi[k] - cyl.A.lo[k];
      }
    }
  }
  double per_area = ScalarTraits<S>::to_double(tau) / (area.convert_to<double>() * std::pow(double(n), d - 1));
  std::ostringstream caps;
  write_capacities(caps, t, d);
  out.text("capacities.txt", caps.str());
  out.json_file("tau.json", json{{"d", d},
                                 {"n", n},
                                 {"scalar", ScalarTraits<S>::name},
                                 {"A", format_box(cyl.A)},
                                 {"h", format_scalar(cyl.h)},
                                 {"exact", sets.exact},
                                 {"vertices", sets.vertices.size()},
                                 {"tau", scalar_json(tau)},
                                 {"tau_per_area", per_area},
                                 {"phi_top_bottom", scalar_json(phi)}});
  log << "tau " << format_scalar(tau) << ", per area " << per_area << "\n";
  if (phi > tau && !near_equal(phi, tau, ScalarTraits<S>::to_double(tau))) {
    throw InvariantViolation("top/bottom flow exceeds tau");
  }
}

template <class S>
void run_decompose(const ExperimentConfig& c, Artifacts& out, std::ostream& log) {
  const int d = dim(c);
  const int64_t n = single_n(c);
  LatticeDomain L = discretize_domain(c.domain, n);
  Stream<S> f(d, n);
  if (c.raw.has("stream")) {
    std::ifstream in(c.raw.path("stream"));
    if (!in) c.raw.fail("stream", "cannot open " + c.raw.path("stream").string());
    try {
      f = read_stream<S>(in);
    } catch (const std::exception& e) {
      c.raw.fail("stream", e.what());
    }
    if (f.d != d || f.n != n) c.raw.fail("stream", "stream header does not match d and n");
  } else {
    f = max_flow(L, load_or_sample<S>(c, L.edges(), d)).stream;
  }
  std::vector<OrientedPath<S>> paths;
  try {
    paths = decompose(f, L);
  } catch (const std::invalid_argument& e) {
    throw InvariantViolation(e.what());
  } catch (const std::runtime_error& e) {
    throw InvariantViolation(e.what());
  }
  Stream<S> back = path_sum(paths, d, n);
  bool exact = back == f;
  bool close = exact;
  if (!exact) {
    Stream<S> diff = back - f;
    close = true;
    for (const auto& [e, v] : diff.values) close = close && near_zero(v, f.max_abs());
  }
  std::ostringstream p;
  S total{0};
  size_t longest = 0;
  for (const auto& path : paths) {
    p << format_scalar(path.weight);
    for (const Vertex& x : path.vertices) p << ' ' << coords(x, d);
    p << '\n';
    total += path.weight;
    longest = std::max(longest, path.vertices.size() - 1);
  }
  out.text("paths.txt", p.str());
  if (!c.raw.has("stream")) {
    std::ostringstream s;
    write_stream(s, f);
    out.text("stream.txt", s.str());
  }
  out.json_file("decompose.json", json{{"d", d},
                                       {"n", n},
                                       {"scalar", ScalarTraits<S>::name},
                                       {"paths", paths.size()},
                                       {"longest_path", longest},
                                       {"total_weight", scalar_json(total)},
                                       {"flow_value", scalar_json(flow_value(f, L))},
                                       {"reconstruction_exact", exact},
                                       {"reconstruction_ok", close}});
  log << paths.size() << " paths, total weight " << format_scalar(total) << "\n";
  if (!close) throw InvariantViolation("paths do not reconstruct the stream");
}

template <class S>
std::vector<S> random_values(std::mt19937_64& rng, size_t count, const S& lo, const S& hi) {
  std::uniform_int_distribution<int> u(0, 16);
  std::vector<S> out(count);
  for (auto& x : out) x = lo + (hi - lo) * S(u(rng)) / S(16);
  return out;
}

template <class S>
Family<S> family_from(const ExperimentConfig& c, const std::string& key, int k, int64_t side, std::vector<S> fallback) {
  Family<S> f(k, side);
  if (c.raw.has(key)) {
    std::vector<Rational> v = c.raw.rationals(key);
    if (v.size() != f.size()) c.raw.fail(key, "expected " + std::to_string(f.size()) + " values");
    for (size_t i = 0; i < v.size(); ++i) f[i] = ScalarTraits<S>::from_rational(v[i]);
  } else {
    f.values = std::move(fallback);
  }
  return f;
}

template <class S>
void run_mix_demo(const ExperimentConfig& c, Artifacts& out, std::ostream& log) {
  const int d = dim(c);
  const int64_t n = single_n(c);
  const std::string routine = c.raw.str("routine", "mix");
  const S M = ScalarTraits<S>::from_rational(c.raw.rational("M", Rational(1)));
  if (M <= S{0}) c.raw.fail("M", "must be positive");
  std::mt19937_64 rng(c.seed);
  MixSpec<S> spec;
  spec.n = n;
  spec.axis_lo = -M;
  spec.axis_hi = M;
  spec.transverse_bound = M;
  Stream<S> f;
  json extra = json::object();
  const size_t cells = static_cast<size_t>(std::pow(double(n), d - 1));

  auto mean_family = [](const Family<S>& in) {
    Family<S> o(in.k, in.n);
    S mean = in.sum() / S(static_cast<long>(in.size()));
    for (auto& x : o.values) x = mean;
    return o;
  };
  auto balance_outputs = [&](const Family<S>& in, Family<S>& o, const std::string& key) {
    if (c.raw.has(key)) {
      if (!near_equal(in.sum(), o.sum(), ScalarTraits<S>::to_double(M))) c.raw.fail(key, "outputs must sum to the inputs' sum");
      return;
    }
    // Spread the mismatch over the cells while staying inside [-M, M].
    S gap = in.sum() - o.sum();
    for (auto& x : o.values) {
      S room = gap > S{0} ? S(M - x) : S(-M - x);
      S step = gap > S{0} ? std::min(room, gap) : std::max(room, gap);
      x += step;
      gap -= step;
    }
  };

  try {
    if (routine == "mix2d") {
      if (d != 2) c.raw.fail("d", "mix2d needs d = 2");
      Family<S> in = family_from<S>(c, "inputs", 1, n, random_values<S>(rng, cells, -M, M));
      Mix2dTrace trace;
      f = mix2d(in.values, M, &trace);
      spec.length = n;
      spec.inputs = in;
      spec.outputs = mean_family(in);
      extra = json{{"trace_steps", trace.steps}, {"trace_checks", trace.checks}, {"trace_failures", trace.failures}};
      if (!trace.ok()) throw InvariantViolation("mix2d trace: " + trace.failures.front());
    } else if (routine == "mix") {
      Family<S> in = family_from<S>(c, "inputs", d - 1, n, random_values<S>(rng, cells, -M, M));
      Family<S> o = family_from<S>(c, "outputs", d - 1, n, random_values<S>(rng, cells, -M, M));
      balance_outputs(in, o, "outputs");
      spec.length = c.raw.integer("m", 2 * (d - 1) * n);
      f = mix(in, o, spec.length, M);
      spec.inputs = in;
      spec.outputs = o;
    } else if (routine == "mix_sparse") {
      int K = static_cast<int>(c.raw.integer("K", 2 * (d - 1)));
      if (K < 2 * (d - 1)) c.raw.fail("K", "must be at least 2(d-1)");
      int64_t n0 = n / K;
      if (n0 < 1) c.raw.fail("K", "K exceeds n");
      size_t coarse = static_cast<size_t>(std::pow(double(n0), d - 1));
      Family<S> in = family_from<S>(c, "inputs", d - 1, n0, random_values<S>(rng, coarse, -M, M));
      Family<S> o = family_from<S>(c, "outputs", d - 1, n0, random_values<S>(rng, coarse, -M, M));
      balance_outputs(in, o, "outputs");
      f = mix_sparse(in, o, n, K, M);
      spec.length = n;
      spec.K = K;
      spec.inputs = in;
      spec.outputs = o;
      spec.support_cap = 3.0 * d * std::pow(double(n), d) / std::pow(double(K), d - 2);
      extra = json{{"K", K}, {"support_cap", spec.support_cap}};
    } else if (routine == "mix_precise") {
      const S eps = ScalarTraits<S>::from_rational(c.raw.rational("eps", Rational(1, 4)));
      if (eps <= S{0}) c.raw.fail("eps", "must be positive");
      Family<S> in(d - 1, n);
      if (c.raw.has("inputs")) {
        in = family_from<S>(c, "inputs", d - 1, n, {});
      } else {
        // Draw in [-M, eps] until the prefix condition holds; fall back to [0, eps].
        bool found = false;
        for (int attempt = 0; attempt < 64 && !found; ++attempt) {
          in.values = random_values<S>(rng, cells, -M, eps);
          found = precise_prefix_failure(in, eps) < 0;
        }
        if (!found) in.values = random_values<S>(rng, cells, S{0}, eps);
      }
      f = mix_precise(in, M, eps);
      spec.length = (d - 1) * n;
      spec.inputs = in;
      spec.outputs = mean_family(in);
      spec.axis_hi = eps;
      spec.transverse_bound = eps;
      extra = json{{"eps", scalar_json(eps)}};
    } else {
      c.raw.fail("routine", "expected mix2d, mix, mix_sparse or mix_precise");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError("inputs", 0, e.what());
  }

  MixReport rep = verify_mix(f, spec);
  std::ostringstream s;
  write_stream(s, f);
  out.text("stream.txt", s.str());
  json inputs = json::array(), outputs = json::array();
  for (const S& x : spec.inputs.values) inputs.push_back(scalar_json(x));
  for (const S& x : spec.outputs.values) outputs.push_back(scalar_json(x));
  json j{{"routine", routine}, {"d", d},           {"n", n},          {"length", spec.length}, {"M", scalar_json(M)},
         {"inputs", inputs},   {"outputs", outputs}, {"support", rep.support}, {"ok", rep.ok()},
         {"failures", rep.failures}};
  j.update(extra);
  out.json_file("mix.json", j);
  log << routine << ": support " << rep.support << (rep.ok() ? ", all checks pass\n" : ", checks FAILED\n");
  if (!rep.ok()) throw InvariantViolation(routine + ": " + rep.failures.front());
}

VectorMeasure load_measure(const ExperimentConfig& c, const std::string& key) {
  std::ifstream in(c.raw.path(key));
  if (!in) c.raw.fail(key, "cannot open " + c.raw.path(key).string());
  try {
    return measure_from_json(json::parse(in));
  } catch (const std::exception& e) {
    c.raw.fail(key, e.what());
  }
}

DistanceOptions distance_options(const ExperimentConfig& c, DistanceOptions o) {
  o.K_max = static_cast<int>(c.raw.integer("K_max", o.K_max));
  o.rel_gap = c.raw.real("rel_gap", o.rel_gap);
  o.max_cells = static_cast<size_t>(c.raw.integer("max_cells", static_cast<int64_t>(o.max_cells)));
  if (o.K_max < 0) c.raw.fail("K_max", "must be non-negative");
  if (o.rel_gap < 0) c.raw.fail("rel_gap", "must be non-negative");
  return o;
}

void run_distance(const ExperimentConfig& c, Artifacts& out, std::ostream& log) {
  VectorMeasure mu = load_measure(c, "mu"), nu = load_measure(c, "nu");
  if (mu.d != nu.d) c.raw.fail("nu", "dimension differs from mu");
  DistanceOptions o = distance_options(c, {});
  o.threads = c.threads;
  DistanceBracket b = distance(mu, nu, o);
  out.json_file("distance.json", json{{"d", mu.d},
                                      {"lower", b.lower},
                                      {"upper", b.upper},
                                      {"gap", b.gap()},
                                      {"K_max", b.K_max},
                                      {"grid", b.grid},
                                      {"cells", b.cells},
                                      {"converged", b.converged},
                                      {"tv", b.tv},
                                      {"argmax_x", b.argmax_x},
                                      {"argmax_lambda", b.argmax_lambda}});
  log << "distance in [" << b.lower << ", " << b.upper << "]\n";
  if (b.lower > b.upper * (1 + 1e-12) + 1e-15) throw InvariantViolation("lower bracket exceeds upper bracket");
  if (b.upper > 2 * b.tv * (1 + 1e-12) + 1e-15) throw InvariantViolation("upper bracket exceeds 2 TV");
}

const char* kAxisNames[] = {"vx", "vy", "vz", "vw"};

void run_rate(const ExperimentConfig& c, Artifacts& out, std::ostream& log) {
  const int d = dim(c);
  std::vector<double> s_list = c.raw.has("s") ? c.raw.reals("s") : std::vector<double>{0.0};
  std::vector<double> v(d, 0.0);
  v[0] = 1.0;
  if (c.raw.has("v")) {
    v = c.raw.reals("v");
    if (static_cast<int>(v.size()) != d) c.raw.fail("v", "needs d components");
  }
  RateConfig rc;
  rc.d = d;
  rc.v = v;
  rc.trials = c.trials;
  rc.dist = c.dist;
  rc.seed = c.seed;
  rc.threads = c.threads;
  rc.solver.iterations = static_cast<int>(c.raw.integer("iterations", rc.solver.iterations));
  rc.solver.step = c.raw.real("step", rc.solver.step);
  rc.solver.dykstra_sweeps = static_cast<int>(c.raw.integer("dykstra_sweeps", rc.solver.dykstra_sweeps));
  rc.solver.distance = distance_options(c, rc.solver.distance);
  if (rc.solver.iterations < 0) c.raw.fail("iterations", "must be non-negative");

  std::ostringstream csv;
  csv << "s";
  for (int i = 0; i < d; ++i) csv << ',' << kAxisNames[i];
  csv << ",eps,n,trials,successes,phat,lo,hi,Ihat\n";
  json rows = json::array();
  for (double s : s_list) {
    std::vector<double> sv(d);
    for (int i = 0; i < d; ++i) sv[i] = s * v[i];
    for (double eps : c.eps) {
      for (int64_t n : c.n_list) {
        rc.s = s;
        rc.eps = eps;
        rc.n = n;
        RateEstimate r = estimate_rate(rc);
        csv << format_scalar(s);
        for (int i = 0; i < d; ++i) csv << ',' << format_scalar(v[i]);
        csv << ',' << format_scalar(eps) << ',' << n << ',' << r.trials << ',' << r.successes << ','
            << format_scalar(r.phat) << ',' << format_scalar(r.ci.lo) << ',' << format_scalar(r.ci.hi) << ','
            << format_scalar(r.I_hat) << '\n';
        rows.push_back(json{{"s", s},
                            {"eps", eps},
                            {"n", n},
                            {"phat", r.phat},
                            {"I_hat", std::isfinite(r.I_hat) ? json(r.I_hat) : json("inf")},
                            {"I_hat_lower", r.I_hat_lower},
                            {"half_width", r.half_width()},
                            {"best_upper_mean", r.best_upper_mean},
                            {"rate_upper_bound", rate_upper_bound(c.dist, d, sv)}});
        log << "s=" << s << " eps=" << eps << " n=" << n << ": " << r.successes << "/" << r.trials << ", I_hat "
            << r.I_hat << " (Wilson lower " << r.I_hat_lower << ")\n";
      }
    }
  }
  out.text("rate.csv", csv.str());
  out.json_file("rate.json", json{{"distribution", c.dist.describe()}, {"rows", rows}});
}

void run_flow_constant(const ExperimentConfig& c, Artifacts& out, std::ostream& log) {
  const int d = dim(c);
  FlowConstantConfig fc;
  fc.d = d;
  int64_t axis = c.raw.integer("axis", d);
  if (axis < 1 || axis > d) c.raw.fail("axis", "must be in [1, d]");
  fc.axis = static_cast<int>(axis - 1);
  fc.n_list = c.n_list;
  fc.h_factor = c.raw.rational("h_factor", Rational(1));
  if (fc.h_factor <= 0) c.raw.fail("h_factor", "must be positive");
  fc.trials = c.trials;
  fc.dist = c.dist;
  fc.seed = c.seed;
  fc.threads = c.threads;
  std::ostringstream csv;
  csv << "n,h,trials,mean,sd,half_width,min,max\n";
  for (const FlowConstantRow& r : estimate_flow_constant(fc)) {
    csv << r.n << ',' << r.h << ',' << r.trials << ',' << format_scalar(r.mean) << ',' << format_scalar(r.sd) << ','
        << format_scalar(r.half_width) << ',' << format_scalar(r.min) << ',' << format_scalar(r.max) << '\n';
    log << "n=" << r.n << ": nu ~ " << r.mean << " +- " << r.half_width << "\n";
  }
  out.text("nu.csv", csv.str());
}

void run_tail(const ExperimentConfig& c, Artifacts& out, std::ostream& log) {
  TailConfig tc;
  tc.d = dim(c);
  tc.lambdas = c.raw.has("lambda") ? c.raw.reals("lambda") : std::vector<double>{0.0};
  tc.trials = c.trials;
  tc.dist = c.dist;
  tc.seed = c.seed;
  tc.threads = c.threads;
  std::ostringstream csv;
  csv << "lambda,n,trials,successes,phat,lo,hi,speed_surface,speed_volume\n";
  for (int64_t n : c.n_list) {
    tc.n = n;
    for (const TailRow& r : tail_probability(tc, discretize_domain(c.domain, n))) {
      csv << format_scalar(r.lambda) << ',' << r.n << ',' << r.trials << ',' << r.successes << ','
          << format_scalar(r.phat) << ',' << format_scalar(r.ci.lo) << ',' << format_scalar(r.ci.hi) << ','
          << format_scalar(r.speed_surface) << ',' << format_scalar(r.speed_volume) << '\n';
      log << "lambda=" << r.lambda << " n=" << n << ": " << r.successes << "/" << r.trials << "\n";
    }
  }
  out.text("tail.csv", csv.str());
}

template <class S>
void dispatch_exact(const ExperimentConfig& c, Artifacts& out, std::ostream& log) {
  if (c.command == "maxflow") run_maxflow<S>(c, out, log);
  if (c.command == "tau") run_tau<S>(c, out, log);
  if (c.command == "decompose") run_decompose<S>(c, out, log);
  if (c.command == "mix-demo") run_mix_demo<S>(c, out, log);
}

json manifest(const ExperimentConfig& c, const std::vector<std::string>& outputs, int status,
              const std::string& message) {
  json cfg = json::object();
  for (const auto& [k, e] : c.raw.entries()) cfg[k] = e.value;
  return json{{"command", c.command}, {"config", cfg},    {"version", version_string()}, {"git", git_revision()},
              {"seed", c.seed},       {"threads", c.threads}, {"outputs", outputs},      {"exit_status", status},
              {"message", message}};
}

}  // namespace

int run(const ExperimentConfig& c, std::ostream& log) {
  std::error_code ec;
  fs::create_directories(c.out_dir, ec);
  if (ec) {
    log << "error: cannot create " << c.out_dir.string() << ": " << ec.message() << "\n";
    return kExitConfig;
  }
  Artifacts out{c.out_dir, {}};
  int status = kExitOk;
  std::string message;
  try {
    if (c.command == "distance") {
      run_distance(c, out, log);
    } else if (c.command == "rate") {
      run_rate(c, out, log);
    } else if (c.command == "flow-constant") {
      run_flow_constant(c, out, log);
    } else if (c.command == "tail") {
      run_tail(c, out, log);
    } else if (rational_mode(c)) {
      dispatch_exact<Rational>(c, out, log);
    } else {
      dispatch_exact<double>(c, out, log);
    }
  } catch (const ConfigError& e) {
    status = kExitConfig;
    message = "config error: " + (e.key().empty() ? std::string() : "'" + e.key() + "'") +
              (e.line() > 0 ? " (line " + std::to_string(e.line()) + ")" : std::string()) + ": " + e.what();
  } catch (const InvariantViolation& e) {
    status = kExitInvariant;
    message = std::string("invariant violation: ") + e.what();
  } catch (const std::invalid_argument& e) {
    status = kExitConfig;
    message = std::string("invalid input: ") + e.what();
  } catch (const std::exception& e) {
    status = kExitInvariant;
    message = std::string("error: ") + e.what();
  }
  if (!message.empty()) log << message << "\n";
  std::vector<std::string> written = out.written;
  out.json_file("manifest.json", manifest(c, written, status, message));
  return status;
}

int run_command(const std::string& command, const fs::path& config_path, const std::vector<std::string>& overrides,
                const fs::path& out_dir, int threads_flag, std::ostream& log) {
  try {
    Config raw = config_path.empty() ? Config{} : Config::parse_file(config_path);
    for (const auto& o : overrides) raw.set(o);
    ExperimentConfig cfg = make_experiment(command, raw, out_dir, threads_flag);
    return run(cfg, log);
  } catch (const ConfigError& e) {
    log << "config error";
    if (!e.key().empty()) log << " at '" << e.key() << "'";
    if (e.line() > 0) log << " (line " << e.line() << ")";
    log << ": " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace fpp
