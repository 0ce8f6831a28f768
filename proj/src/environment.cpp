#include "fpp/environment.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace fpp {

namespace {

std::vector<std::string> split_args(const std::string& inner, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : inner) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != ' ' && c != '\t') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

CapacityDistribution CapacityDistribution::constant(Rational c) {
  CapacityDistribution g;
  g.kind = Kind::Constant;
  g.values = {c};
  g.validate();
  return g;
}

CapacityDistribution CapacityDistribution::bernoulli(Rational a, Rational b, Rational p) {
  CapacityDistribution g;
  g.kind = Kind::Bernoulli;
  g.values = {a, b};
  g.probs = {p};
  g.validate();
  return g;
}

CapacityDistribution CapacityDistribution::uniform(Rational a, Rational b) {
  CapacityDistribution g;
  g.kind = Kind::Uniform;
  g.values = {a, b};
  g.validate();
  return g;
}

CapacityDistribution CapacityDistribution::discrete(std::vector<Rational> values, std::vector<Rational> probs) {
  CapacityDistribution g;
  g.kind = Kind::Discrete;
  g.values = std::move(values);
  g.probs = std::move(probs);
  g.validate();
  return g;
}

CapacityDistribution CapacityDistribution::parse(const std::string& text) {
  auto open = text.find('(');
  auto close = text.rfind(')');
  if (open == std::string::npos || close == std::string::npos || close < open)
    throw std::invalid_argument("dist: expected kind(args), got '" + text + "'");
  std::string kind;
  for (char c : text.substr(0, open)) {
    if (c != ' ') kind.push_back(c);
  }
  std::string inner = text.substr(open + 1, close - open - 1);
  auto args = split_args(inner, ',');
  auto need = [&](size_t k) {
    if (args.size() != k) throw std::invalid_argument("dist: " + kind + " takes " + std::to_string(k) + " arguments");
  };
  if (kind == "constant") {
    need(1);
    return constant(parse_rational(args[0]));
  }
  if (kind == "bernoulli") {
    need(3);
    return bernoulli(parse_rational(args[0]), parse_rational(args[1]), parse_rational(args[2]));
  }
  if (kind == "uniform") {
    need(2);
    return uniform(parse_rational(args[0]), parse_rational(args[1]));
  }
  if (kind == "discrete") {
    std::vector<Rational> vals, probs;
    for (const std::string& a : args) {
      auto colon = a.find(':');
      if (colon == std::string::npos) throw std::invalid_argument("dist: discrete atoms are value:prob");
      vals.push_back(parse_rational(a.substr(0, colon)));
      probs.push_back(parse_rational(a.substr(colon + 1)));
    }
    return discrete(vals, probs);
  }
  throw std::invalid_argument("dist: unknown kind '" + kind + "'");
}

void CapacityDistribution::validate() const {
  for (const Rational& v : values) {
    if (v < 0) throw std::invalid_argument("dist: capacities must be nonnegative");
  }
  switch (kind) {
    case Kind::Constant:
      if (values.size() != 1) throw std::invalid_argument("dist: constant needs one value");
      break;
    case Kind::Bernoulli:
      if (values.size() != 2 || probs.size() != 1) throw std::invalid_argument("dist: bernoulli(a,b,p)");
      if (probs[0] < 0 || probs[0] > 1) throw std::invalid_argument("dist: bernoulli p must be in [0,1]");
      break;
    case Kind::Uniform:
      if (values.size() != 2 || !(values[0] <= values[1])) throw std::invalid_argument("dist: uniform(a,b) needs a <= b");
      break;
    case Kind::Discrete: {
      if (values.empty() || values.size() != probs.size()) throw std::invalid_argument("dist: discrete needs matching values/probs");
      Rational total = 0;
      for (const Rational& p : probs) {
        if (p < 0) throw std::invalid_argument("dist: negative probability");
        total += p;
      }
      if (total != 1) throw std::invalid_argument("dist: discrete probabilities must sum to 1");
      break;
    }
  }
}

Rational CapacityDistribution::support_max() const {
  switch (kind) {
    case Kind::Bernoulli:
      if (probs[0] == 0) return values[0];
      if (probs[0] == 1) return values[1];
      return std::max(values[0], values[1]);
    case Kind::Discrete: {
      Rational m = 0;
      for (size_t i = 0; i < values.size(); ++i) {
        if (probs[i] > 0) m = std::max(m, values[i]);
      }
      return m;
    }
    default:
      return *std::max_element(values.begin(), values.end());
  }
}

double CapacityDistribution::prob_at_least(double x) const {
  auto dv = [](const Rational& q) { return q.convert_to<double>(); };
  switch (kind) {
    case Kind::Constant:
      return dv(values[0]) >= x ? 1.0 : 0.0;
    case Kind::Bernoulli: {
      double p = dv(probs[0]);
      return (dv(values[0]) >= x ? 1.0 - p : 0.0) + (dv(values[1]) >= x ? p : 0.0);
    }
    case Kind::Uniform: {
      double a = dv(values[0]), b = dv(values[1]);
      if (x <= a) return 1.0;
      if (x > b) return 0.0;
      return b > a ? (b - x) / (b - a) : 1.0;
    }
    case Kind::Discrete: {
      double s = 0;
      for (size_t i = 0; i < values.size(); ++i) {
        if (dv(values[i]) >= x) s += dv(probs[i]);
      }
      return s;
    }
  }
  return 0.0;
}

std::string CapacityDistribution::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::Constant:
      os << "constant(" << values[0] << ")";
      break;
    case Kind::Bernoulli:
      os << "bernoulli(" << values[0] << "," << values[1] << "," << probs[0] << ")";
      break;
    case Kind::Uniform:
      os << "uniform(" << values[0] << "," << values[1] << ")";
      break;
    case Kind::Discrete:
      os << "discrete(";
      for (size_t i = 0; i < values.size(); ++i) os << (i ? "," : "") << values[i] << ":" << probs[i];
      os << ")";
      break;
  }
  return os.str();
}

uint64_t splitmix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t trial_seed(uint64_t master, uint64_t trial) {
  return splitmix64(splitmix64(master) ^ splitmix64(trial + 0x632be59bd9b4e019ULL));
}

uint64_t edge_hash(uint64_t seed, const EdgeId& e) {
  uint64_t h = splitmix64(seed);
  for (int j = 0; j < kMaxDim; ++j) h = splitmix64(h ^ static_cast<uint64_t>(e.x[j]));
  return splitmix64(h ^ static_cast<uint64_t>(e.axis + 1));
}

double hash_to_unit(uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

template <class S>
S sample_value(const CapacityDistribution& g, double u) {
  using T = ScalarTraits<S>;
  switch (g.kind) {
    case CapacityDistribution::Kind::Constant:
      return T::from_rational(g.values[0]);
    case CapacityDistribution::Kind::Bernoulli:
      return T::from_rational(u < g.probs[0].convert_to<double>() ? g.values[1] : g.values[0]);
    case CapacityDistribution::Kind::Uniform: {
      if constexpr (T::exact) {
        return g.values[0] + (g.values[1] - g.values[0]) * Rational(u);
      } else {
        double a = g.values[0].convert_to<double>(), b = g.values[1].convert_to<double>();
        return a + (b - a) * u;
      }
    }
    case CapacityDistribution::Kind::Discrete: {
      double acc = 0;
      for (size_t i = 0; i < g.values.size(); ++i) {
        acc += g.probs[i].convert_to<double>();
        if (u < acc) return T::from_rational(g.values[i]);
      }
      for (size_t i = g.values.size(); i-- > 0;) {
        if (g.probs[i] > 0) return T::from_rational(g.values[i]);
      }
      return T::from_rational(g.values.back());
    }
  }
  return S{};
}

template <class S>
S Capacities<S>::operator()(const EdgeId& e) const {
  auto it = values.find(e);
  if (it != values.end()) return it->second;
  if (fallback) return *fallback;
  return S{0};
}

template <class S>
Capacities<S> Capacities<S>::everywhere(S c) {
  Capacities<S> t;
  t.dist = CapacityDistribution::constant(Rational(c));
  t.M = c;
  t.fallback = c;
  return t;
}

template <class S>
Capacities<S> sample_capacities(const std::vector<EdgeId>& edges, const CapacityDistribution& dist, uint64_t seed) {
  dist.validate();
  Capacities<S> t;
  t.dist = dist;
  t.seed = seed;
  t.M = ScalarTraits<S>::from_rational(dist.support_max());
  t.values.reserve(edges.size() * 2);
  for (const EdgeId& e : edges) t.values[e] = sample_value<S>(dist, hash_to_unit(edge_hash(seed, e)));
  return t;
}

template <class S>
Capacities<S> sample_capacities(const LatticeDomain& lattice, const CapacityDistribution& dist, uint64_t seed) {
  return sample_capacities<S>(lattice.edges(), dist, seed);
}

template <class S>
void write_capacities(std::ostream& os, const Capacities<S>& t, int d) {
  std::vector<std::pair<EdgeId, S>> rows(t.values.begin(), t.values.end());
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [e, v] : rows) os << format_vertex(e.x, d) << ' ' << e.axis + 1 << ' ' << format_scalar(v) << '\n';
}

template <class S>
Capacities<S> read_capacities(std::istream& is, int d) {
  Capacities<S> t;
  std::string line;
  int lineno = 0;
  S M{0};
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    EdgeId e;
    for (int j = 0; j < d; ++j) {
      if (!(ls >> e.x[j])) throw std::invalid_argument("capacities line " + std::to_string(lineno) + ": bad coordinate");
    }
    int axis = 0;
    std::string value;
    if (!(ls >> axis >> value) || axis < 1 || axis > d)
      throw std::invalid_argument("capacities line " + std::to_string(lineno) + ": bad axis/value");
    e.axis = axis - 1;
    S v = parse_scalar<S>(value);
    if (v < 0) throw std::invalid_argument("capacities line " + std::to_string(lineno) + ": negative capacity");
    t.values[e] = v;
    if (v > M) M = v;
  }
  t.M = M;
  return t;
}

template double sample_value<double>(const CapacityDistribution&, double);
template Rational sample_value<Rational>(const CapacityDistribution&, double);
template struct Capacities<double>;
template struct Capacities<Rational>;
template Capacities<double> sample_capacities<double>(const std::vector<EdgeId>&, const CapacityDistribution&, uint64_t);
template Capacities<Rational> sample_capacities<Rational>(const std::vector<EdgeId>&, const CapacityDistribution&, uint64_t);
template Capacities<double> sample_capacities<double>(const LatticeDomain&, const CapacityDistribution&, uint64_t);
template Capacities<Rational> sample_capacities<Rational>(const LatticeDomain&, const CapacityDistribution&, uint64_t);
template void write_capacities<double>(std::ostream&, const Capacities<double>&, int);
template void write_capacities<Rational>(std::ostream&, const Capacities<Rational>&, int);
template Capacities<double> read_capacities<double>(std::istream&, int);
template Capacities<Rational> read_capacities<Rational>(std::istream&, int);

}  // namespace fpp
