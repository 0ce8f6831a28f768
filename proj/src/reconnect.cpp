#include "fpp/reconnect.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fpp {

namespace {

template <class S>
double mag(const S& x) {
  return std::fabs(ScalarTraits<S>::to_double(x));
}

// a <= b up to rounding for double, exactly for Rational.
template <class S>
bool leq(const S& a, const S& b, double scale) {
  if constexpr (ScalarTraits<S>::exact) {
    return a <= b;
  } else {
    return a <= b + 1e-12 * std::max(1.0, scale);
  }
}

template <class S>
bool positive(const S& x, double scale) {
  return x > S{0} && !near_zero(x, scale);
}

std::string join_point(const std::vector<int64_t>& y) {
  std::ostringstream os;
  os << "(";
  for (size_t k = 0; k < y.size(); ++k) os << (k ? "," : "") << y[k];
  os << ")";
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------------------------------------------
// Decomposition

template <class S>
std::vector<OrientedPath<S>> decompose(const Stream<S>& f, const LatticeDomain& L) {
  const int d = f.d;
  const double scale = std::max(1.0, f.max_abs());
  auto is_terminal = [&](const Vertex& x) {
    int idx = L.index_of(x);
    return idx >= 0 && L.is_terminal(idx);
  };
  for (const auto& [x, div] : divergence(f)) {
    if (near_zero(div, scale * static_cast<double>(f.n)) || is_terminal(x)) continue;
    throw std::invalid_argument("decompose: node law fails at " + format_vertex(x, d));
  }

  std::map<EdgeId, S> res;
  for (const auto& [e, v] : f.values) {
    if (!near_zero(v, scale)) res[e] = v;
  }
  auto value = [&](const EdgeId& e) {
    auto it = res.find(e);
    return it == res.end() ? S{0} : it->second;
  };
  // Positive-alignment residual edges out of u with their far endpoint, smallest edge first.
  auto out_edges = [&](const Vertex& u) {
    std::vector<std::pair<EdgeId, Vertex>> c;
    for (int i = 0; i < d; ++i) {
      EdgeId fwd{u, i};
      if (value(fwd) > S{0}) c.push_back({fwd, fwd.head()});
      EdgeId back{shifted(u, i, -1), i};
      if (value(back) < S{0}) c.push_back({back, back.x});
    }
    std::sort(c.begin(), c.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return c;
  };

  // Depth-first search with backtracking; stops at the first terminal other than s.
  auto find_path = [&](const Vertex& s) -> std::vector<Vertex> {
    std::set<Vertex> seen{s};
    std::vector<Vertex> stack{s};
    std::vector<std::vector<std::pair<EdgeId, Vertex>>> cand{out_edges(s)};
    std::vector<size_t> next{0};
    while (!stack.empty()) {
      size_t top = stack.size() - 1;
      if (next[top] >= cand[top].size()) {
        stack.pop_back();
        cand.pop_back();
        next.pop_back();
        continue;
      }
      Vertex w = cand[top][next[top]++].second;
      if (seen.count(w) || !L.contains(w)) continue;
      seen.insert(w);
      if (is_terminal(w)) {
        stack.push_back(w);
        return stack;
      }
      stack.push_back(w);
      cand.push_back(out_edges(w));
      next.push_back(0);
    }
    return {};
  };

  auto edge_between = [](const Vertex& u, const Vertex& w, int dd) {
    for (int i = 0; i < dd; ++i) {
      if (w[i] == u[i] + 1) return std::make_pair(EdgeId{u, i}, 1);
      if (w[i] == u[i] - 1) return std::make_pair(EdgeId{w, i}, -1);
    }
    throw std::logic_error("decompose: vertices are not adjacent");
  };

  std::vector<Vertex> terminals;
  for (size_t i = 0; i < L.size(); ++i) {
    if (L.is_terminal(static_cast<int>(i))) terminals.push_back(L.vertices()[i]);
  }
  std::sort(terminals.begin(), terminals.end());

  std::vector<OrientedPath<S>> paths;
  for (const Vertex& s : terminals) {
    while (!out_edges(s).empty()) {
      std::vector<Vertex> p = find_path(s);
      if (p.empty()) throw std::runtime_error("decompose: circulation through terminal " + format_vertex(s, d));
      S w{-1};
      size_t arg = 0;
      for (size_t k = 0; k + 1 < p.size(); ++k) {
        S a = ScalarTraits<S>::abs(value(edge_between(p[k], p[k + 1], d).first));
        if (w < S{0} || a < w) {
          w = a;
          arg = k;
        }
      }
      for (size_t k = 0; k + 1 < p.size(); ++k) {
        auto [e, dir] = edge_between(p[k], p[k + 1], d);
        S nv = k == arg ? S{0} : S(value(e) - S(dir) * w);
        if (near_zero(nv, scale)) {
          res.erase(e);
        } else {
          res[e] = nv;
        }
      }
      paths.push_back(OrientedPath<S>{std::move(p), w});
    }
  }
  if (!res.empty()) {
    throw std::runtime_error("decompose: circulation left on edge at " + format_vertex(res.begin()->first.x, d));
  }
  return paths;
}

template <class S>
Stream<S> path_sum(const std::vector<OrientedPath<S>>& paths, int d, int64_t n) {
  Stream<S> out(d, n);
  for (const auto& p : paths) {
    for (size_t k = 0; k + 1 < p.vertices.size(); ++k) {
      const Vertex& u = p.vertices[k];
      const Vertex& w = p.vertices[k + 1];
      for (int i = 0; i < d; ++i) {
        if (w[i] == u[i] + 1) out.add(EdgeId{u, i}, p.weight);
        if (w[i] == u[i] - 1) out.add(EdgeId{w, i}, S(-p.weight));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------------------------------------------
// Family

template <class S>
Family<S>::Family(int dims, int64_t side, const S& fill) : k(dims), n(side) {
  if (dims < 1) throw std::invalid_argument("family: dimension must be >= 1");
  if (side < 0) throw std::invalid_argument("family: negative side");
  size_t count = 1;
  for (int j = 0; j < dims; ++j) count *= static_cast<size_t>(side);
  values.assign(count, fill);
}

template <class S>
size_t Family<S>::index(const std::vector<int64_t>& y) const {
  size_t idx = 0;
  for (int j = 0; j < k; ++j) {
    if (y[j] < 1 || y[j] > n) throw std::out_of_range("family: index " + join_point(y) + " outside {1.." + std::to_string(n) + "}");
    idx = idx * static_cast<size_t>(n) + static_cast<size_t>(y[j] - 1);
  }
  return idx;
}

template <class S>
std::vector<int64_t> Family<S>::point(size_t idx) const {
  std::vector<int64_t> y(k);
  for (int j = k - 1; j >= 0; --j) {
    y[j] = static_cast<int64_t>(idx % static_cast<size_t>(n)) + 1;
    idx /= static_cast<size_t>(n);
  }
  return y;
}

template <class S>
S Family<S>::sum() const {
  S s{0};
  for (const S& v : values) s += v;
  return s;
}

// ---------------------------------------------------------------------------------------------------------------
// Mixing in dimension 2

namespace {

template <class S>
struct Mix2dResult {
  Stream<S> f;
  S out{0};
};

template <class S>
void check_mix2d_invariants(const std::vector<S>& a, const S& beta, const std::vector<int64_t>& col,
                            const std::vector<std::vector<S>>& h, const std::vector<std::vector<S>>& v,
                            double scale, Mix2dTrace& tr) {
  const int64_t n = static_cast<int64_t>(a.size());
  auto fail = [&](const std::string& msg) {
    tr.failures.push_back("step " + std::to_string(tr.steps) + ": " + msg);
  };
  ++tr.checks;
  std::vector<int64_t> owner(n, -1);
  for (int64_t i = 0; i < n; ++i) {
    if (col[i] >= 0) owner[col[i]] = i;
  }
  for (int64_t c = 0; c < n; ++c) {
    for (int64_t r = 0; r + 1 < n; ++r) {
      S x = ScalarTraits<S>::abs(v[c][r]);
      if (x == S{0}) continue;
      if (owner[c] < 0) {
        fail("(a) column " + std::to_string(c) + " carries vertical flow but belongs to no source");
      } else if (!leq(x, ScalarTraits<S>::abs(h[owner[c]][0]), scale)) {
        fail("(a) column " + std::to_string(c) + " exceeds the input edge of its source");
      }
    }
  }
  for (int64_t i = 0; i < n; ++i) {
    if (a[i] <= beta) {
      if (!near_equal(h[i][0], a[i], scale)) fail("(b) line " + std::to_string(i + 1) + " input changed");
      for (int64_t k = 0; k + 1 < n; ++k) {
        if (!leq(h[i][k], h[i][k + 1], scale)) fail("(b) line " + std::to_string(i + 1) + " not non-decreasing");
      }
      if (!leq(h[i][n - 1], beta, scale)) fail("(b) line " + std::to_string(i + 1) + " exceeds the mean");
    } else {
      if (!leq(h[i][0], a[i], scale)) fail("(c) line " + std::to_string(i + 1) + " exceeds its input");
      for (int64_t k = 0; k + 1 < n; ++k) {
        if (!leq(h[i][k + 1], h[i][k], scale)) fail("(c) line " + std::to_string(i + 1) + " not non-increasing");
      }
      if (!near_equal(h[i][n - 1], beta, scale)) fail("(c) line " + std::to_string(i + 1) + " output differs from the mean");
    }
  }
}

template <class S>
Mix2dResult<S> mix2d_impl(const std::vector<S>& f_in, const S& M, Mix2dTrace* trace) {
  const int64_t n = static_cast<int64_t>(f_in.size());
  if (n < 1) throw std::invalid_argument("mix2d: at least one input required");
  double scale = std::max(1.0, mag(M));
  for (size_t j = 0; j < f_in.size(); ++j) {
    if (!leq(ScalarTraits<S>::abs(f_in[j]), M, scale)) {
      throw std::invalid_argument("mix2d: |f_in(" + std::to_string(j + 1) + ")| exceeds M");
    }
  }
  S total{0};
  for (const S& x : f_in) total += x;
  const bool flip = total < S{0};
  std::vector<S> a(f_in);
  if (flip) {
    for (S& x : a) x = -x;
    total = -total;
  }
  const S beta = total / S(n);

  std::vector<std::vector<S>> h(n, std::vector<S>(n)), v(n, std::vector<S>(n > 1 ? n - 1 : 0, S{0}));
  std::vector<int64_t> col(n, -1);
  std::vector<S> need(n, S{0}), room(n, S{0});
  int64_t rank = 0;
  for (int64_t i = 0; i < n; ++i) {
    S base = a[i] < beta ? a[i] : beta;
    for (int64_t k = 0; k < n; ++k) h[i][k] = base;
    if (a[i] > beta) {
      col[i] = n - (++rank);
      need[i] = a[i] - beta;
    } else if (a[i] < beta) {
      room[i] = beta - a[i];
    }
  }
  if (trace) check_mix2d_invariants(a, beta, col, h, v, scale, *trace);

  while (true) {
    int64_t i = -1, j = -1;
    for (int64_t k = 0; k < n && i < 0; ++k) {
      if (positive(need[k], scale)) i = k;
    }
    if (i < 0) break;
    for (int64_t k = 0; k < n && j < 0; ++k) {
      if (positive(room[k], scale)) j = k;
    }
    if (j < 0) {
      if constexpr (ScalarTraits<S>::exact) throw std::logic_error("mix2d: no line below the mean is left");
      break;
    }
    const S mm = need[i] < room[j] ? need[i] : room[j];
    const int64_t c = col[i];
    for (int64_t k = 0; k < c; ++k) h[i][k] += mm;
    if (j > i) {
      for (int64_t r = i; r < j; ++r) v[c][r] += mm;
    } else {
      for (int64_t r = j; r < i; ++r) v[c][r] -= mm;
    }
    for (int64_t k = c; k < n; ++k) h[j][k] += mm;
    if (need[i] < room[j]) {
      room[j] -= need[i];
      need[i] = S{0};
    } else {
      need[i] -= room[j];
      room[j] = S{0};
    }
    if (trace) {
      ++trace->steps;
      check_mix2d_invariants(a, beta, col, h, v, scale, *trace);
    }
  }

  Mix2dResult<S> out;
  out.f = Stream<S>(2, 1);
  const S sign = flip ? S{-1} : S{1};
  for (int64_t j = 0; j < n; ++j) {
    Vertex x;
    x[1] = j + 1;
    for (int64_t k = 0; k < n; ++k) {
      x[0] = k;
      out.f.set(EdgeId{x, 0}, S(sign * h[j][k]));
    }
  }
  for (int64_t c = 0; c < n; ++c) {
    for (int64_t r = 0; r + 1 < n; ++r) {
      if (v[c][r] == S{0}) continue;
      Vertex x;
      x[0] = c;
      x[1] = r + 1;
      out.f.set(EdgeId{x, 1}, S(sign * v[c][r]));
    }
  }
  out.out = sign * beta;
  return out;
}

template <class S>
Mix2dResult<S> precise2d(const std::vector<S>& f_in, const S& M, const S& eps) {
  const S bound = M < eps ? eps : M;
  S total{0};
  for (const S& x : f_in) total += x;
  if (!(total < S{0})) return mix2d_impl(f_in, bound, nullptr);
  S lowest = *std::min_element(f_in.begin(), f_in.end());
  std::vector<S> shifted_in(f_in);
  for (S& x : shifted_in) x -= lowest;
  Mix2dResult<S> r = mix2d_impl(shifted_in, bound, nullptr);
  const int64_t n = static_cast<int64_t>(f_in.size());
  for (int64_t j = 1; j <= n; ++j) {
    Vertex x;
    x[1] = j;
    for (int64_t k = 0; k < n; ++k) {
      x[0] = k;
      r.f.add(EdgeId{x, 0}, lowest);
    }
  }
  r.out += lowest;
  return r;
}

// Embeds a planar stream: (l, j) -> base + (x0 + l) e_0 + j e_axis.
template <class S>
void add_plane(Stream<S>& out, const Stream<S>& f2, int axis, const Vertex& base, int64_t x0) {
  for (const auto& [e, val] : f2.values) {
    Vertex x = base;
    x[0] += x0 + e.x[0];
    x[axis] += e.x[1];
    out.add(EdgeId{x, e.axis == 0 ? 0 : axis}, val);
  }
}

// Uniform-output mixing by induction on the number of transverse axes; returns the common output value.
template <class S, class Mix2>
S uniform_rec(Stream<S>& out, const std::vector<S>& in, int64_t n, const std::vector<int>& axes, const Vertex& base,
              int64_t x0, const Mix2& mix2) {
  const int k = static_cast<int>(axes.size());
  if (k == 1) {
    Mix2dResult<S> r = mix2(in);
    add_plane(out, r.f, axes[0], base, x0);
    return r.out;
  }
  size_t slice = in.size() / static_cast<size_t>(n);
  std::vector<int> rest(axes.begin() + 1, axes.end());
  std::vector<S> g(n);
  for (int64_t i = 0; i < n; ++i) {
    std::vector<S> sub(in.begin() + static_cast<long>(i * slice), in.begin() + static_cast<long>((i + 1) * slice));
    Vertex b = base;
    b[axes[0]] = i + 1;
    g[i] = uniform_rec(out, sub, n, rest, b, x0, mix2);
  }
  Mix2dResult<S> r = mix2(g);
  Family<S> idx(k - 1, n);
  for (size_t t = 0; t < idx.size(); ++t) {
    std::vector<int64_t> y = idx.point(t);
    Vertex b = base;
    for (int q = 0; q < k - 1; ++q) b[rest[q]] = y[q];
    add_plane(out, r.f, axes[0], b, x0 + static_cast<int64_t>(k - 1) * n);
  }
  return r.out;
}

template <class S>
std::vector<int> transverse_axes(int k) {
  std::vector<int> axes(k);
  for (int j = 0; j < k; ++j) axes[j] = j + 1;
  return axes;
}

template <class S>
Stream<S> mix_uniform(const Family<S>& f_in, const S& M, S* out_value) {
  Stream<S> out(f_in.k + 1, 1);
  S v = uniform_rec(out, f_in.values, f_in.n, transverse_axes<S>(f_in.k), Vertex{}, 0,
                    [&](const std::vector<S>& a) { return mix2d_impl(a, M, nullptr); });
  if (out_value) *out_value = v;
  return out;
}

}  // namespace

template <class S>
Stream<S> mix2d(const std::vector<S>& f_in, const S& M, Mix2dTrace* trace) {
  return mix2d_impl(f_in, M, trace).f;
}

template <class S>
Stream<S> mix(const Family<S>& f_in, const Family<S>& f_out, int64_t m, const S& M) {
  if (f_in.k != f_out.k || f_in.n != f_out.n) throw std::invalid_argument("mix: input and output families differ in shape");
  if (f_in.k + 1 > kMaxDim) throw std::invalid_argument("mix: dimension exceeds " + std::to_string(kMaxDim));
  const int d = f_in.k + 1;
  const int64_t n = f_in.n;
  Stream<S> out(d, 1);
  if (n == 0) return out;
  double scale = std::max(1.0, mag(M));
  double mass = 0;
  for (size_t t = 0; t < f_in.size(); ++t) {
    if (!leq(ScalarTraits<S>::abs(f_in[t]), M, scale)) throw std::invalid_argument("mix: |f_in" + join_point(f_in.point(t)) + "| exceeds M");
    if (!leq(ScalarTraits<S>::abs(f_out[t]), M, scale)) throw std::invalid_argument("mix: |f_out" + join_point(f_out.point(t)) + "| exceeds M");
    mass += mag(f_in[t]) + mag(f_out[t]);
  }
  const S sin = f_in.sum(), sout = f_out.sum();
  if (!near_equal(sin, sout, mass)) throw std::invalid_argument("mix: sum of inputs differs from sum of outputs");
  const S mean = sin / S(static_cast<long>(f_in.size()));
  bool uniform = true;
  for (const S& v : f_out.values) uniform = uniform && near_equal(v, mean, scale);
  const int64_t W = static_cast<int64_t>(d - 1) * n;

  auto extend = [&](int64_t from) {
    for (size_t t = 0; t < f_out.size(); ++t) {
      std::vector<int64_t> y = f_out.point(t);
      Vertex x;
      for (int q = 0; q < d - 1; ++q) x[q + 1] = y[q];
      for (int64_t k = from; k < m; ++k) {
        x[0] = k;
        out.set(EdgeId{x, 0}, f_out[t]);
      }
    }
  };

  if (uniform) {
    if (m < W) throw std::invalid_argument("mix: m = " + std::to_string(m) + " < (d-1)n = " + std::to_string(W));
    out = mix_uniform(f_in, M, static_cast<S*>(nullptr));
    extend(W);
    return out;
  }
  if (m < 2 * W) throw std::invalid_argument("mix: m = " + std::to_string(m) + " < 2(d-1)n = " + std::to_string(2 * W));
  out = mix_uniform(f_in, M, static_cast<S*>(nullptr));
  Stream<S> fo = mix_uniform(f_out, M, static_cast<S*>(nullptr));
  // -S f^o shifted: axis-0 edge at k goes to 2W-1-k with the same value, a transverse edge at k goes to 2W-k negated.
  for (const auto& [e, val] : fo.values) {
    Vertex x = e.x;
    if (e.axis == 0) {
      x[0] = 2 * W - 1 - e.x[0];
      out.add(EdgeId{x, 0}, val);
    } else {
      x[0] = 2 * W - e.x[0];
      out.add(EdgeId{x, e.axis}, S(-val));
    }
  }
  extend(2 * W);
  return out;
}

template <class S>
Stream<S> mix_sparse(const Family<S>& f_in, const Family<S>& f_out, int64_t n, int K, const S& M) {
  const int d = f_in.k + 1;
  if (K < 2 * (d - 1)) throw std::invalid_argument("mix_sparse: K = " + std::to_string(K) + " < 2(d-1) = " + std::to_string(2 * (d - 1)));
  const int64_t n0 = n / K;
  if (f_in.n != n0 || f_out.n != n0 || f_out.k != f_in.k) {
    throw std::invalid_argument("mix_sparse: families must be indexed by {1.." + std::to_string(n0) + "}^" + std::to_string(d - 1));
  }
  Stream<S> coarse = mix(f_in, f_out, n, M);
  Stream<S> out(d, 1);
  for (const auto& [e, val] : coarse.values) {
    Vertex x = e.x;
    for (int q = 1; q < d; ++q) x[q] = e.x[q] * K;
    if (e.axis == 0) {
      out.add(EdgeId{x, 0}, val);
    } else {
      for (int r = 0; r < K; ++r) out.add(EdgeId{shifted(x, e.axis, r), e.axis}, val);
    }
  }
  return out;
}

template <class S>
int precise_prefix_failure(const Family<S>& f_in, const S& eps) {
  const double scale = std::max(1.0, mag(eps));
  for (int level = 0; level < f_in.k; ++level) {
    size_t block = 1;
    for (int q = level; q < f_in.k; ++q) block *= static_cast<size_t>(f_in.n);
    for (size_t start = 0; start < f_in.size(); start += block) {
      S sum{0};
      S lo = f_in[start], hi = f_in[start];
      for (size_t t = start; t < start + block; ++t) {
        sum += f_in[t];
        lo = std::min(lo, f_in[t]);
        hi = std::max(hi, f_in[t]);
      }
      if (sum < S{0} && !leq(S(hi - lo), eps, scale)) return level;
    }
  }
  return -1;
}

template <class S>
Stream<S> mix_precise(const Family<S>& f_in, const S& M, const S& eps) {
  const double scale = std::max({1.0, mag(M), mag(eps)});
  for (size_t t = 0; t < f_in.size(); ++t) {
    if (!leq(S(-M), f_in[t], scale) || !leq(f_in[t], eps, scale)) {
      throw std::invalid_argument("mix_precise: f_in" + join_point(f_in.point(t)) + " outside [-M, eps]");
    }
  }
  int level = precise_prefix_failure(f_in, eps);
  if (level >= 0) throw std::invalid_argument("mix_precise: prefix condition fails at level " + std::to_string(level));
  Stream<S> out(f_in.k + 1, 1);
  if (f_in.n == 0) return out;
  uniform_rec(out, f_in.values, f_in.n, transverse_axes<S>(f_in.k), Vertex{}, 0,
              [&](const std::vector<S>& a) { return precise2d(a, M, eps); });
  return out;
}

template <class S>
MixReport verify_mix(const Stream<S>& f, const MixSpec<S>& spec) {
  MixReport rep;
  const int d = spec.inputs.k + 1;
  const int K = std::max(1, spec.K);
  double scale = std::max({1.0, mag(spec.axis_lo), mag(spec.axis_hi), mag(spec.transverse_bound)});
  auto fail = [&](const std::string& msg) {
    if (rep.failures.size() < 20) rep.failures.push_back(msg);
  };
  auto on_grid = [K](int64_t c) { return c % K == 0; };
  rep.support = f.values.size();
  for (const auto& [e, val] : f.values) {
    const Vertex& x = e.x;
    bool inside = x[0] >= 0 && x[0] < spec.length;
    for (int q = 1; q < d; ++q) inside = inside && x[q] >= 1 && x[q] <= spec.n;
    if (!inside) fail("support: edge at " + format_vertex(x, d) + " axis " + std::to_string(e.axis + 1) + " outside the box");
    if (K > 1) {
      bool sparse = true;
      for (int q = 1; q < d; ++q) {
        if (q != e.axis && !on_grid(x[q])) sparse = false;
      }
      if (!sparse) fail("support: edge at " + format_vertex(x, d) + " axis " + std::to_string(e.axis + 1) + " not in E_K");
    }
    if (e.axis == 0) {
      if (!leq(spec.axis_lo, val, scale) || !leq(val, spec.axis_hi, scale)) {
        fail("bound: axis-1 edge at " + format_vertex(x, d) + " value " + format_scalar(val));
      }
    } else if (!leq(ScalarTraits<S>::abs(val), spec.transverse_bound, scale)) {
      fail("bound: transverse edge at " + format_vertex(x, d) + " value " + format_scalar(val));
    }
  }
  auto line = [&](size_t t, int64_t x0) {
    std::vector<int64_t> y = spec.inputs.point(t);
    Vertex x;
    x[0] = x0;
    for (int q = 1; q < d; ++q) x[q] = y[q - 1] * K;
    return x;
  };
  std::set<Vertex> terminals;
  for (size_t t = 0; t < spec.inputs.size(); ++t) {
    Vertex xi = line(t, 0), xo = line(t, spec.length - 1);
    if (!near_equal(f(EdgeId{xi, 0}), spec.inputs[t], scale)) fail("input at " + format_vertex(xi, d) + " differs");
    if (!near_equal(f(EdgeId{xo, 0}), spec.outputs[t], scale)) fail("output at " + format_vertex(xo, d) + " differs");
    terminals.insert(xi);
    terminals.insert(line(t, spec.length));
  }
  for (const auto& [x, div] : divergence(f)) {
    if (near_zero(div, scale) || terminals.count(x)) continue;
    fail("node law fails at " + format_vertex(x, d));
  }
  if (spec.support_cap >= 0 && static_cast<double>(rep.support) > spec.support_cap) {
    fail("support size " + std::to_string(rep.support) + " exceeds " + std::to_string(spec.support_cap));
  }
  return rep;
}

// ---------------------------------------------------------------------------------------------------------------
// Quantization and mesoscopic constants

double quantize(double t, double eps) {
  if (!(eps > 0)) throw std::invalid_argument("quantize: eps must be positive");
  double r = std::sqrt(eps);
  double q = r * std::floor(std::fabs(t) / r);
  return t < 0 ? -q : q;
}

double mesoscopic_alpha(int d) {
  return 1.0 / (2.0 * (3 * d + 1));
}

int mesoscopic_m(double eps, int d) {
  // Guard exact powers such as eps = 10^-14 against rounding just below an integer.
  return static_cast<int>(std::floor(std::pow(eps, -mesoscopic_alpha(d)) * (1 + 1e-12)));
}

int balance_K(double eps, int d, double kappa) {
  double a = mesoscopic_alpha(d);
  return static_cast<int>(std::floor(std::pow(1.0 / (2.0 * kappa * std::pow(eps, a / 2)), 1.0 / (d - 1))));
}

double well_behaved_damping(double eps, int d) {
  return 1.0 - std::pow(eps, mesoscopic_alpha(d) / 4);
}

std::vector<Face> cube_face_cells(const RBox& Q, int axis, int sign, int m) {
  const int d = Q.dim();
  if (m < 1) throw std::invalid_argument("cube_face_cells: m must be >= 1");
  std::vector<Face> out;
  std::vector<int> others;
  for (int k = 0; k < d; ++k) {
    if (k != axis) others.push_back(k);
  }
  Family<int> idx(std::max(1, d - 1), m);
  for (size_t t = 0; t < idx.size(); ++t) {
    std::vector<int64_t> c = idx.point(t);
    Face f;
    f.axis = axis;
    f.coord = sign < 0 ? Q.lo[axis] : Q.hi[axis];
    f.lo.assign(d, f.coord);
    f.hi.assign(d, f.coord);
    for (size_t q = 0; q < others.size(); ++q) {
      int k = others[q];
      Rational w = (Q.hi[k] - Q.lo[k]) / m;
      f.lo[k] = Q.lo[k] + w * (c[q] - 1);
      f.hi[k] = f.lo[k] + w;
    }
    out.push_back(f);
  }
  return out;
}

template <class S>
FaceFluxes<S>::FaceFluxes(int dim, int cells_per_side) : d(dim), m(cells_per_side) {
  size_t cells = 1;
  for (int k = 0; k + 1 < dim; ++k) cells *= static_cast<size_t>(cells_per_side);
  v.assign(2 * dim, std::vector<S>(cells, S{0}));
}

template <class S>
S FaceFluxes<S>::total(int sign) const {
  S s{0};
  for (int i = 0; i < d; ++i) {
    for (const S& x : face(i, sign)) s += x;
  }
  return s;
}

template <class S>
FaceFluxes<S> measure_face_fluxes(const Stream<S>& f, const RBox& Q, int m) {
  FaceFluxes<S> out(Q.dim(), m);
  for (int i = 0; i < Q.dim(); ++i) {
    for (int sign : {-1, 1}) {
      std::vector<Face> cells = cube_face_cells(Q, i, sign, m);
      for (size_t c = 0; c < cells.size(); ++c) out.face(i, sign)[c] = face_flux(f, cells[c], i, sign);
    }
  }
  return out;
}

template <class S>
FaceFluxes<S> well_behaved_targets(const RBox& Q, int m, int64_t n, const std::vector<S>& sv, const S& damping) {
  const int d = Q.dim();
  if (static_cast<int>(sv.size()) != d) throw std::invalid_argument("well_behaved_targets: s v must have d components");
  FaceFluxes<S> out(d, m);
  Rational scale = 1;
  for (int k = 0; k + 1 < d; ++k) scale *= n;
  for (int i = 0; i < d; ++i) {
    for (int sign : {-1, 1}) {
      std::vector<Face> cells = cube_face_cells(Q, i, sign, m);
      for (size_t c = 0; c < cells.size(); ++c) {
        out.face(i, sign)[c] = damping * sv[i] * ScalarTraits<S>::from_rational(cells[c].area() * scale);
      }
    }
  }
  return out;
}

template <class S>
bool is_well_behaved(const Stream<S>& f, const RBox& Q, int m, const std::vector<S>& sv, const S& damping) {
  FaceFluxes<S> got = measure_face_fluxes(f, Q, m);
  FaceFluxes<S> want = well_behaved_targets(Q, m, f.n, sv, damping);
  for (size_t s = 0; s < got.v.size(); ++s) {
    for (size_t c = 0; c < got.v[s].size(); ++c) {
      if constexpr (ScalarTraits<S>::exact) {
        if (got.v[s][c] != want.v[s][c]) return false;
      } else {
        if (std::fabs(got.v[s][c] - want.v[s][c]) > 1e-9 * std::max(1.0, std::fabs(want.v[s][c]))) return false;
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------------------------------------------
// Face balancing

namespace {

struct CubeLattice {
  int d = 2;
  int64_t n = 1;        // lattice scale
  int64_t side = 0;     // points per axis
  std::vector<int64_t> a;  // first layer per axis

  CubeLattice(const RBox& Q, int64_t scale) : d(Q.dim()), n(scale), a(Q.dim()) {
    for (int k = 0; k < d; ++k) {
      a[k] = ceil_to_ll(Rational(n) * Q.lo[k]);
      int64_t b = ceil_to_ll(Rational(n) * Q.hi[k]) - 1;
      if (k == 0) side = b - a[k] + 1;
      if (b - a[k] + 1 != side) throw std::invalid_argument("cube lattice: Q is not a lattice cube at this scale");
    }
    if (side < 1) throw std::invalid_argument("cube lattice: empty cube");
  }
  std::vector<int> others(int axis) const {
    std::vector<int> o;
    for (int k = 0; k < d; ++k) {
      if (k != axis) o.push_back(k);
    }
    return o;
  }
};

// Places a local mixing stream (axis 0 along `axis`, transverse y -> a - 1 + y) inside the cube.
template <class S>
void embed_local(Stream<S>& out, const Stream<S>& local, const CubeLattice& C, int axis, const S& factor) {
  std::vector<int> o = C.others(axis);
  for (const auto& [e, val] : local.values) {
    Vertex x;
    x[axis] = C.a[axis] + e.x[0];
    for (size_t q = 0; q < o.size(); ++q) x[o[q]] = C.a[o[q]] - 1 + e.x[q + 1];
    out.add(EdgeId{x, e.axis == 0 ? axis : o[e.axis - 1]}, S(factor * val));
  }
}

}  // namespace

template <class S>
Stream<S> balance_faces(const FaceFluxes<S>& lambda, const FaceFluxes<S>& beta, const RBox& Q, int64_t n, int K) {
  const int d = Q.dim();
  const int m = beta.m;
  if (lambda.d != d || beta.d != d || lambda.m != m) throw std::invalid_argument("balance_faces: flux families do not match the cube");
  if (K < 2 * (d - 1)) throw std::invalid_argument("balance_faces: K = " + std::to_string(K) + " < 2(d-1)");
  CubeLattice C(Q, n);
  const int64_t n0 = C.side / K;
  if (n0 < 1) throw std::invalid_argument("balance_faces: K exceeds the cube side");

  double scale = 1.0;
  for (size_t s = 0; s < beta.v.size(); ++s) {
    for (size_t c = 0; c < beta.v[s].size(); ++c) scale += mag(beta.v[s][c]) + mag(lambda.v[s][c]);
  }
  FaceFluxes<S> diff(d, m);
  for (size_t s = 0; s < diff.v.size(); ++s) {
    for (size_t c = 0; c < diff.v[s].size(); ++c) diff.v[s][c] = beta.v[s][c] - lambda.v[s][c];
  }
  if (!near_equal(diff.total(-1), diff.total(1), scale)) {
    throw std::invalid_argument("balance_faces: + and - totals of beta - lambda differ");
  }

  // w on the sublattice points V_A of every face, indexed by coarse transverse coordinates.
  std::vector<Family<S>> w(2 * d, Family<S>(d - 1, n0));
  std::vector<S> mu(2 * d, S{0});
  for (int i = 0; i < d; ++i) {
    std::vector<int> o = C.others(i);
    for (int sign : {-1, 1}) {
      const int slot = FaceFluxes<S>::slot(i, sign);
      std::vector<Face> cells = cube_face_cells(Q, i, sign, m);
      std::vector<size_t> cell_of(w[slot].size());
      std::vector<int64_t> count(cells.size(), 0);
      for (size_t t = 0; t < w[slot].size(); ++t) {
        std::vector<int64_t> y = w[slot].point(t);
        size_t cell = 0;
        for (size_t q = 0; q < o.size(); ++q) {
          int k = o[q];
          Rational X = C.a[k] - 1 + K * y[q];
          Rational width = (Q.hi[k] - Q.lo[k]) / m;
          int64_t ck = floor_to_ll((X / n - Q.lo[k]) / width);
          cell = cell * static_cast<size_t>(m) + static_cast<size_t>(std::clamp<int64_t>(ck, 0, m - 1));
        }
        cell_of[t] = cell;
        ++count[cell];
      }
      for (size_t c = 0; c < cells.size(); ++c) {
        const S& dv = diff.face(i, sign)[c];
        mu[slot] += dv;
        if (count[c] == 0 && dv != S{0}) {
          throw std::invalid_argument("balance_faces: cell " + cells[c].describe() + " holds no sublattice line");
        }
      }
      for (size_t t = 0; t < w[slot].size(); ++t) {
        size_t c = cell_of[t];
        w[slot][t] = diff.face(i, sign)[c] / S(count[c]);
      }
    }
  }

  Stream<S> res(d, n);
  const S bound = [&] {
    S b{0};
    for (const auto& fam : w) {
      for (const S& x : fam.values) b = std::max(b, ScalarTraits<S>::abs(x));
    }
    return S(2 * b + 1);
  }();
  const Family<S> zero(d - 1, n0);
  auto M_axis = [&](int axis, const Family<S>& p, const Family<S>& q) {
    embed_local(res, mix_sparse(p, q, C.side, K, bound), C, axis, S{1});
  };
  auto scaled = [](const Family<S>& f, const S& c) {
    Family<S> g = f;
    for (S& x : g.values) x *= c;
    return g;
  };
  // Paths from the - layer of axis i to the - layer of axis j: +e_i for t steps, then -e_j for t steps.
  auto transfer = [&](int i, int j, const Family<S>& c) {
    std::vector<int> oi = C.others(i), oj = C.others(j);
    Family<S> r(d - 1, n0);
    for (size_t t = 0; t < c.size(); ++t) {
      if (c[t] == S{0}) continue;
      std::vector<int64_t> y = c.point(t);
      Vertex x;
      x[i] = C.a[i];
      int64_t yj = 0;
      for (size_t q = 0; q < oi.size(); ++q) {
        x[oi[q]] = C.a[oi[q]] - 1 + K * y[q];
        if (oi[q] == j) yj = y[q];
      }
      const int64_t steps = K * yj - 1;
      for (int64_t s = 0; s < steps; ++s) res.add(EdgeId{shifted(x, i, s), i}, c[t]);
      Vertex p = shifted(x, i, steps);
      for (int64_t s = 0; s < steps; ++s) res.add(EdgeId{shifted(p, j, -(s + 1)), j}, S(-c[t]));
      // Endpoint tau(x): coordinate i takes the old coordinate j.
      std::vector<int64_t> z(oj.size());
      for (size_t q = 0; q < oj.size(); ++q) {
        int k = oj[q];
        if (k == i) {
          z[q] = yj;
        } else {
          for (size_t u = 0; u < oi.size(); ++u) {
            if (oi[u] == k) z[q] = y[u];
          }
        }
      }
      r[r.index(z)] -= c[t];
    }
    return r;  // flux left on the - layer of axis j
  };
  auto pair_stream = [&](int i, int si, int j, int sj, const S& alpha) {
    const int in_slot = FaceFluxes<S>::slot(i, si), out_slot = FaceFluxes<S>::slot(j, sj);
    Family<S> rho_in = scaled(w[in_slot], S(alpha / ScalarTraits<S>::abs(mu[in_slot])));
    Family<S> rho_out = scaled(w[out_slot], S(alpha / ScalarTraits<S>::abs(mu[out_slot])));
    if (i == j) {
      if (si < 0) {
        M_axis(i, rho_in, rho_out);
      } else {
        M_axis(i, rho_out, rho_in);
      }
      return;
    }
    Family<S> c = rho_in;
    if (si > 0) {
      M_axis(i, rho_in, rho_in);
      c = scaled(rho_in, S{-1});
    }
    Family<S> r = transfer(i, j, c);
    if (sj > 0) {
      M_axis(j, scaled(r, S{-1}), rho_out);
    } else {
      Family<S> p = rho_out;
      for (size_t t = 0; t < p.size(); ++t) p[t] -= r[t];
      M_axis(j, p, zero);
    }
  };

  auto category = [&](int slot, int sign) {
    if (near_zero(mu[slot], scale)) return 0;
    bool pos = mu[slot] > S{0};
    return (sign < 0) == pos ? 1 : -1;  // 1 in, -1 out
  };
  for (int i = 0; i < d; ++i) {
    for (int sign : {-1, 1}) {
      int slot = FaceFluxes<S>::slot(i, sign);
      if (category(slot, sign) != 0) continue;
      if (sign < 0) {
        M_axis(i, w[slot], zero);
      } else {
        M_axis(i, zero, w[slot]);
      }
    }
  }
  std::vector<S> left(2 * d);
  for (int s = 0; s < 2 * d; ++s) left[s] = ScalarTraits<S>::abs(mu[s]);
  for (int i = 0; i < d; ++i) {
    for (int si : {-1, 1}) {
      int in = FaceFluxes<S>::slot(i, si);
      if (category(in, si) != 1) continue;
      while (positive(left[in], scale)) {
        int out = -1, oj = 0, osj = 0;
        for (int j = 0; j < d && out < 0; ++j) {
          for (int sj : {-1, 1}) {
            int s = FaceFluxes<S>::slot(j, sj);
            if (out < 0 && category(s, sj) == -1 && positive(left[s], scale)) {
              out = s;
              oj = j;
              osj = sj;
            }
          }
        }
        if (out < 0) {
          if constexpr (ScalarTraits<S>::exact) throw std::logic_error("balance_faces: no deficit face left");
          break;
        }
        S alpha = left[in] < left[out] ? left[in] : left[out];
        pair_stream(i, si, oj, osj, alpha);
        if (left[in] < left[out]) {
          left[out] -= left[in];
          left[in] = S{0};
        } else {
          left[in] -= left[out];
          left[out] = S{0};
        }
      }
    }
  }

  FaceFluxes<S> got = measure_face_fluxes(res, Q, m);
  for (size_t s = 0; s < got.v.size(); ++s) {
    for (size_t c = 0; c < got.v[s].size(); ++c) {
      if (!near_equal(got.v[s][c], diff.v[s][c], scale)) {
        throw std::logic_error("balance_faces: residual flux misses its target on face slot " + std::to_string(s));
      }
    }
  }
  return res;
}

template <class S>
Stream<S> balance_faces(const Stream<S>& f, const FaceFluxes<S>& beta, const RBox& Q, int K) {
  return balance_faces(measure_face_fluxes(f, Q, beta.m), beta, Q, f.n, K);
}

// ---------------------------------------------------------------------------------------------------------------
// Corridor gluing

namespace {

int glue_axis(const RBox& QA, const RBox& QB) {
  if (QA.dim() != QB.dim()) throw std::invalid_argument("glue: cubes differ in dimension");
  int axis = -1;
  for (int k = 0; k < QA.dim(); ++k) {
    if (QA.lo[k] == QB.lo[k] && QA.hi[k] == QB.hi[k]) continue;
    if (axis >= 0) throw std::invalid_argument("glue: cubes are not adjacent along a single axis");
    axis = k;
  }
  if (axis < 0) throw std::invalid_argument("glue: cubes coincide");
  if (!(QB.lo[axis] >= QA.hi[axis]) || QB.hi[axis] - QB.lo[axis] != QA.hi[axis] - QA.lo[axis]) {
    throw std::invalid_argument("glue: second cube must follow the first along the axis with equal side");
  }
  return axis;
}

template <class S>
Stream<S> restrict_to(const Stream<S>& f, const RBox& Q) {
  Region R({Q});
  Stream<S> out(f.d, f.n);
  for (const auto& [e, v] : f.values) {
    if (R.contains(e.x, f.n)) out.values.emplace(e, v);
  }
  return out;
}

}  // namespace

RBox glue_region(const RBox& QA, const RBox& QB) {
  int l = glue_axis(QA, QB);
  RBox R = QA;
  R.hi[l] = QB.hi[l];
  return R;
}

template <class S>
Stream<S> glue_adjacent(const Stream<S>& fA, const Stream<S>& fB, const RBox& QA, const RBox& QB, int m, const S& M) {
  if (fA.d != fB.d || fA.n != fB.n || fA.d != QA.dim()) throw std::invalid_argument("glue: streams differ in dimension or scale");
  const int d = fA.d;
  const int64_t N = fA.n;
  const int l = glue_axis(QA, QB);
  const int64_t bA = ceil_to_ll(Rational(N) * QA.hi[l]) - 1;
  const int64_t aB = ceil_to_ll(Rational(N) * QB.lo[l]);
  const int64_t span = aB - bA + 1;  // local edges 0 (exit of A) .. span-1 (entry of B)

  Stream<S> out = restrict_to(fA, QA);
  const Stream<S> rB = restrict_to(fB, QB);
  for (const auto& [e, v] : rB.values) out.add(e, v);

  std::vector<int> o;
  for (int k = 0; k < d; ++k) {
    if (k != l) o.push_back(k);
  }
  for (const Face& cell : cube_face_cells(QA, l, 1, m)) {
    int64_t width = -1;
    std::vector<int64_t> c0(o.size());
    for (size_t q = 0; q < o.size(); ++q) {
      int k = o[q];
      c0[q] = ceil_to_ll(Rational(N) * cell.lo[k]);
      int64_t wk = ceil_to_ll(Rational(N) * cell.hi[k]) - c0[q];
      if (width >= 0 && wk != width) throw std::invalid_argument("glue: face cell " + cell.describe() + " is not a lattice square");
      width = wk;
    }
    if (width < 1) throw std::invalid_argument("glue: face cell " + cell.describe() + " holds no lattice line");
    Family<S> fin(d - 1, width), fout(d - 1, width);
    double mass = 0;
    for (size_t t = 0; t < fin.size(); ++t) {
      std::vector<int64_t> y = fin.point(t);
      Vertex x;
      for (size_t q = 0; q < o.size(); ++q) x[o[q]] = c0[q] - 1 + y[q];
      x[l] = bA;
      fin[t] = fA(EdgeId{x, l});
      x[l] = aB;
      fout[t] = -divergence_at(rB, x) / S(N);  // net outflow of B at the entry vertex
      mass += mag(fin[t]) + mag(fout[t]);
    }
    if (!near_equal(fin.sum(), fout.sum(), mass)) {
      throw std::invalid_argument("glue: flux mismatch on face cell " + cell.describe() + ": " + format_scalar(fin.sum()) +
                                  " vs " + format_scalar(fout.sum()));
    }
    // One layer short of the entry edge so that no transverse edge lands on the first layer of B.
    Stream<S> local = mix(fin, fout, span - 1, M);
    for (const auto& [e, v] : local.values) {
      if (e.x[0] < 1 || e.x[0] > span - 2) continue;
      Vertex x;
      x[l] = bA + e.x[0];
      for (size_t q = 0; q < o.size(); ++q) x[o[q]] = c0[q] - 1 + e.x[q + 1];
      out.add(EdgeId{x, e.axis == 0 ? l : o[e.axis - 1]}, v);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------------------------------------------

#define FPP_INSTANTIATE_RECONNECT(S)                                                                               \
  template struct Family<S>;                                                                                       \
  template struct FaceFluxes<S>;                                                                                   \
  template std::vector<OrientedPath<S>> decompose<S>(const Stream<S>&, const LatticeDomain&);                      \
  template Stream<S> path_sum<S>(const std::vector<OrientedPath<S>>&, int, int64_t);                               \
  template Stream<S> mix2d<S>(const std::vector<S>&, const S&, Mix2dTrace*);                                       \
  template Stream<S> mix<S>(const Family<S>&, const Family<S>&, int64_t, const S&);                                \
  template Stream<S> mix_sparse<S>(const Family<S>&, const Family<S>&, int64_t, int, const S&);                    \
  template Stream<S> mix_precise<S>(const Family<S>&, const S&, const S&);                                         \
  template int precise_prefix_failure<S>(const Family<S>&, const S&);                                              \
  template MixReport verify_mix<S>(const Stream<S>&, const MixSpec<S>&);                                           \
  template FaceFluxes<S> measure_face_fluxes<S>(const Stream<S>&, const RBox&, int);                               \
  template FaceFluxes<S> well_behaved_targets<S>(const RBox&, int, int64_t, const std::vector<S>&, const S&);      \
  template bool is_well_behaved<S>(const Stream<S>&, const RBox&, int, const std::vector<S>&, const S&);           \
  template Stream<S> balance_faces<S>(const FaceFluxes<S>&, const FaceFluxes<S>&, const RBox&, int64_t, int);      \
  template Stream<S> balance_faces<S>(const Stream<S>&, const FaceFluxes<S>&, const RBox&, int);                   \
  template Stream<S> glue_adjacent<S>(const Stream<S>&, const Stream<S>&, const RBox&, const RBox&, int, const S&);

FPP_INSTANTIATE_RECONNECT(double)
FPP_INSTANTIATE_RECONNECT(Rational)

template struct Family<int>;

}  // namespace fpp
