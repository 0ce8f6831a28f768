#include "fpp/stream.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fpp {

namespace {

template <class S>
double magnitude_scale(const Capacities<S>& t) {
  return std::max(1.0, ScalarTraits<S>::to_double(t.M));
}

template <class S>
bool exceeds(const S& value, const S& cap, double scale) {
  S a = ScalarTraits<S>::abs(value);
  if constexpr (ScalarTraits<S>::exact) {
    return a > cap;
  } else {
    return a > cap + 1e-9 * scale;
  }
}

}  // namespace

template <class S>
void Stream<S>::set(const EdgeId& e, const S& v) {
  if (v == S{0}) {
    values.erase(e);
  } else {
    values[e] = v;
  }
}

template <class S>
void Stream<S>::add(const EdgeId& e, const S& v) {
  if (v == S{0}) return;
  auto [it, inserted] = values.emplace(e, v);
  if (!inserted) {
    it->second += v;
    if (it->second == S{0}) values.erase(it);
  }
}

template <class S>
double Stream<S>::max_abs() const {
  double m = 0;
  for (const auto& [e, v] : values) m = std::max(m, std::fabs(ScalarTraits<S>::to_double(v)));
  return m;
}

template <class S>
Stream<S>& Stream<S>::operator+=(const Stream& o) {
  if (d != o.d || n != o.n) throw std::invalid_argument("stream sum: lattice mismatch");
  for (const auto& [e, v] : o.values) add(e, v);
  return *this;
}

template <class S>
Stream<S> Stream<S>::scaled(const S& c) const {
  Stream out(d, n);
  if (c == S{0}) return out;
  for (const auto& [e, v] : values) out.values.emplace(e, v * c);
  return out;
}

template <class S>
S divergence_at(const Stream<S>& f, const Vertex& x) {
  S total{0};
  for (int i = 0; i < f.d; ++i) {
    total -= f(EdgeId{x, i});
    total += f(EdgeId{shifted(x, i, -1), i});
  }
  return total * S(f.n);
}

template <class S>
std::map<Vertex, S> divergence(const Stream<S>& f) {
  std::map<Vertex, S> div;
  for (const auto& [e, v] : f.values) {
    div[e.x] -= v;
    div[e.head()] += v;
  }
  for (auto& [x, v] : div) v *= S(f.n);
  for (auto it = div.begin(); it != div.end();) {
    if (it->second == S{0}) {
      it = div.erase(it);
    } else {
      ++it;
    }
  }
  return div;
}

std::string AdmissibilityReport::summary(int d) const {
  std::ostringstream os;
  os << "support " << (support_ok ? "ok" : "violated") << ", capacity " << (capacity_ok ? "ok" : "violated")
     << ", node law " << (node_law_ok ? "ok" : "violated");
  if (!support_violations.empty()) os << "; first support edge " << format_vertex(support_violations[0].x, d) << " axis " << support_violations[0].axis + 1;
  if (!capacity_violations.empty()) os << "; first capacity edge " << format_vertex(capacity_violations[0].x, d) << " axis " << capacity_violations[0].axis + 1;
  if (!node_violations.empty()) os << "; first node " << format_vertex(node_violations[0], d);
  return os.str();
}

template <class S>
AdmissibilityReport admissibility_report(const Stream<S>& f, const Capacities<S>& t, const LatticeDomain& L) {
  AdmissibilityReport rep;
  const double scale = magnitude_scale(t);
  for (const auto& [e, v] : f.values) {
    if (near_zero(v, scale)) continue;
    if (!L.edge_allowed(e)) {
      rep.support_ok = false;
      rep.support_violations.push_back(e);
    }
    if (exceeds(v, t(e), scale)) {
      rep.capacity_ok = false;
      rep.capacity_violations.push_back(e);
    }
  }
  for (const auto& [x, div] : divergence(f)) {
    if (near_zero(div, scale * static_cast<double>(f.n))) continue;
    int idx = L.index_of(x);
    if (idx >= 0 && L.is_terminal(idx)) continue;
    rep.node_law_ok = false;
    rep.node_violations.push_back(x);
  }
  return rep;
}

template <class S>
AdmissibilityReport admissibility_region_report(const Stream<S>& f, const Capacities<S>& t, const Region& C) {
  AdmissibilityReport rep;
  const double scale = magnitude_scale(t);
  for (const auto& [e, v] : f.values) {
    if (!C.contains(e.x, f.n)) continue;
    if (exceeds(v, t(e), scale)) {
      rep.capacity_ok = false;
      rep.capacity_violations.push_back(e);
    }
  }
  for (const auto& [x, div] : divergence(f)) {
    if (near_zero(div, scale * static_cast<double>(f.n))) continue;
    if (!C.contains(x, f.n)) continue;
    bool interior = true;
    for (int i = 0; i < f.d && interior; ++i) interior = C.contains(shifted(x, i, -1), f.n);
    if (!interior) continue;
    rep.node_law_ok = false;
    rep.node_violations.push_back(x);
  }
  return rep;
}

template <class S>
VectorMeasure vector_measure(const Stream<S>& f) {
  VectorMeasure m;
  m.d = f.d;
  double inv = 1.0;
  for (int j = 0; j < f.d; ++j) inv /= static_cast<double>(f.n);
  for (const auto& [e, v] : f.values) {
    Atom a;
    a.point.resize(f.d);
    a.weight.assign(f.d, 0.0);
    for (int j = 0; j < f.d; ++j) {
      int64_t num = 2 * e.x[j] + (j == e.axis ? 1 : 0);
      a.point[j] = Rational(num, 2 * f.n);
    }
    a.weight[e.axis] = ScalarTraits<S>::to_double(v) * inv;
    m.atoms.push_back(std::move(a));
  }
  return m;
}

template <class S>
S flow_value(const Stream<S>& f, const LatticeDomain& L) {
  S total{0};
  for (const Vertex& x : L.sources()) {
    for (int i = 0; i < f.d; ++i) {
      Vertex up = shifted(x, i, 1), down = shifted(x, i, -1);
      if (L.contains(up)) total += f(EdgeId{x, i});
      if (L.contains(down)) total -= f(EdgeId{down, i});
    }
  }
  return total;
}

template <class S>
S face_flux(const Stream<S>& f, const Face& A, int axis, int sign) {
  S total{0};
  for (const EdgeId& e : boundary_edge_set(axis, sign, A, f.n)) total += f(e);
  return total;
}

template <class S>
Stream<S> discretize_field(const ContinuousField& sigma, const Region& C, int64_t n, const Rational& damping) {
  if (n < 1) throw std::invalid_argument("discretize_field: n must be >= 1");
  const int d = sigma.d;
  Stream<S> out(d, n);
  std::set<EdgeId> edges;
  const Rational two_n(2 * n);
  for (const RBox& b : C.boxes()) {
    for (int i = 0; i < d; ++i) {
      // Closed containment of the plaquette of <X/n, X/n + e_i/n> in b.
      std::vector<int64_t> lo(d), hi(d);
      for (int k = 0; k < d; ++k) {
        if (k == i) {
          lo[k] = ceil_to_ll((two_n * b.lo[k] - 1) / 2);
          hi[k] = floor_to_ll((two_n * b.hi[k] - 1) / 2);
        } else {
          lo[k] = ceil_to_ll((two_n * b.lo[k] + 1) / 2);
          hi[k] = floor_to_ll((two_n * b.hi[k] - 1) / 2);
        }
      }
      bool empty = false;
      for (int k = 0; k < d; ++k) empty = empty || lo[k] > hi[k];
      if (empty) continue;
      Vertex x;
      for (int k = 0; k < d; ++k) x[k] = lo[k];
      while (true) {
        edges.insert(EdgeId{x, i});
        int k = d - 1;
        while (k >= 0 && ++x[k] > hi[k]) {
          x[k] = lo[k];
          --k;
        }
        if (k < 0) break;
      }
    }
  }
  Rational npow = 1;
  for (int k = 1; k < d; ++k) npow *= n;
  for (const EdgeId& e : edges) {
    const int i = e.axis;
    Rational c(2 * e.x[i] + 1, 2 * n);
    Rational integral = 0;
    for (const FieldCell& cell : sigma.cells) {
      if (cell.value[i] == 0) continue;
      if (!(cell.box.lo[i] <= c && c < cell.box.hi[i])) continue;
      Rational area = 1;
      for (int k = 0; k < d && area != 0; ++k) {
        if (k == i) continue;
        Rational plo(2 * e.x[k] - 1, 2 * n), phi(2 * e.x[k] + 1, 2 * n);
        Rational lo = std::max(plo, cell.box.lo[k]), hi = std::min(phi, cell.box.hi[k]);
        area = lo < hi ? Rational(area * (hi - lo)) : Rational(0);
      }
      integral += cell.value[i] * area;
    }
    out.set(e, ScalarTraits<S>::from_rational(damping * npow * integral));
  }
  return out;
}

template <class S>
Stream<S> constant_stream(const std::vector<Rational>& v, const Region& C, int64_t n, const Rational& damping) {
  const int d = static_cast<int>(v.size());
  Stream<S> out(d, n);
  for (const Vertex& x : C.vertices(n)) {
    for (int i = 0; i < d; ++i) out.set(EdgeId{x, i}, ScalarTraits<S>::from_rational(damping * v[i]));
  }
  return out;
}

template <class S>
Stream<S> rescale_stream(const Stream<S>& f, const Vertex& x, int64_t n) {
  if (n < f.n) throw std::invalid_argument("rescale_stream: target scale must be >= source scale");
  Stream<S> out(f.d, n);
  for (const auto& [e, v] : f.values) {
    EdgeId g = e;
    for (int j = 0; j < f.d; ++j) g.x[j] += x[j];
    out.values.emplace(g, v);
  }
  return out;
}

template <class S>
void write_stream(std::ostream& os, const Stream<S>& f) {
  os << f.d << ' ' << f.n << '\n';
  for (const auto& [e, v] : f.values) os << format_vertex(e.x, f.d) << ' ' << e.axis + 1 << ' ' << format_scalar(v) << '\n';
}

template <class S>
Stream<S> read_stream(std::istream& is) {
  std::string line;
  int lineno = 0;
  Stream<S> f;
  bool header = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    if (!header) {
      if (!(ls >> f.d >> f.n) || f.d < 1 || f.d > kMaxDim || f.n < 1)
        throw std::invalid_argument("stream line " + std::to_string(lineno) + ": expected header 'd n'");
      header = true;
      continue;
    }
    EdgeId e;
    for (int j = 0; j < f.d; ++j) {
      if (!(ls >> e.x[j])) throw std::invalid_argument("stream line " + std::to_string(lineno) + ": bad coordinate");
    }
    int axis = 0;
    std::string value;
    if (!(ls >> axis >> value) || axis < 1 || axis > f.d)
      throw std::invalid_argument("stream line " + std::to_string(lineno) + ": bad axis/value");
    e.axis = axis - 1;
    f.set(e, parse_scalar<S>(value));
  }
  if (!header) throw std::invalid_argument("stream: missing header");
  return f;
}

template <class T, class S>
Stream<T> convert_stream(const Stream<S>& f) {
  Stream<T> out(f.d, f.n);
  for (const auto& [e, v] : f.values) {
    if constexpr (std::is_same_v<T, S>) {
      out.values.emplace(e, v);
    } else if constexpr (ScalarTraits<T>::exact) {
      out.set(e, ScalarTraits<T>::from_double(ScalarTraits<S>::to_double(v)));
    } else {
      out.set(e, ScalarTraits<S>::to_double(v));
    }
  }
  return out;
}

#define FPP_INSTANTIATE_STREAM(S)                                                                                  \
  template struct Stream<S>;                                                                                       \
  template S divergence_at<S>(const Stream<S>&, const Vertex&);                                                    \
  template std::map<Vertex, S> divergence<S>(const Stream<S>&);                                                    \
  template AdmissibilityReport admissibility_report<S>(const Stream<S>&, const Capacities<S>&, const LatticeDomain&); \
  template AdmissibilityReport admissibility_region_report<S>(const Stream<S>&, const Capacities<S>&, const Region&); \
  template VectorMeasure vector_measure<S>(const Stream<S>&);                                                      \
  template S flow_value<S>(const Stream<S>&, const LatticeDomain&);                                                \
  template S face_flux<S>(const Stream<S>&, const Face&, int, int);                                                \
  template Stream<S> discretize_field<S>(const ContinuousField&, const Region&, int64_t, const Rational&);          \
  template Stream<S> constant_stream<S>(const std::vector<Rational>&, const Region&, int64_t, const Rational&);    \
  template Stream<S> rescale_stream<S>(const Stream<S>&, const Vertex&, int64_t);                                  \
  template void write_stream<S>(std::ostream&, const Stream<S>&);                                                  \
  template Stream<S> read_stream<S>(std::istream&);

FPP_INSTANTIATE_STREAM(double)
FPP_INSTANTIATE_STREAM(Rational)

template Stream<double> convert_stream<double, Rational>(const Stream<Rational>&);
template Stream<Rational> convert_stream<Rational, double>(const Stream<double>&);
template Stream<double> convert_stream<double, double>(const Stream<double>&);
template Stream<Rational> convert_stream<Rational, Rational>(const Stream<Rational>&);

}  // namespace fpp
