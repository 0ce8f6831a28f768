#include "fpp/maxflow.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <stdexcept>

namespace fpp {

namespace {

template <class S>
class Dinic {
 public:
  explicit Dinic(int nodes) : head_(nodes, -1), level_(nodes), iter_(nodes) {}

  // Arc a -> b with capacity c and its reverse with capacity c_rev; returns the index of the forward arc.
  int add_pair(int a, int b, const S& c, const S& c_rev) {
    int id = static_cast<int>(to_.size());
    push(a, b, c);
    push(b, a, c_rev);
    return id;
  }

  const S& residual(int arc) const { return cap_[arc]; }

  S run(int s, int t) {
    S total{0};
    while (bfs(s, t)) {
      std::copy(head_.begin(), head_.end(), iter_.begin());
      while (true) {
        S pushed = dfs(s, t, S{-1});
        if (pushed == S{0}) break;
        total += pushed;
      }
    }
    return total;
  }

  std::vector<char> reachable(int s) const {
    std::vector<char> seen(head_.size(), 0);
    std::vector<int> stack{s};
    seen[s] = 1;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int a = head_[u]; a >= 0; a = next_[a]) {
        if (cap_[a] > S{0} && !seen[to_[a]]) {
          seen[to_[a]] = 1;
          stack.push_back(to_[a]);
        }
      }
    }
    return seen;
  }

 private:
  void push(int a, int b, const S& c) {
    to_.push_back(b);
    cap_.push_back(c);
    next_.push_back(head_[a]);
    head_[a] = static_cast<int>(to_.size()) - 1;
  }

  bool bfs(int s, int t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::queue<int> q;
    level_[s] = 0;
    q.push(s);
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (int a = head_[u]; a >= 0; a = next_[a]) {
        if (cap_[a] > S{0} && level_[to_[a]] < 0) {
          level_[to_[a]] = level_[u] + 1;
          q.push(to_[a]);
        }
      }
    }
    return level_[t] >= 0;
  }

  // limit < 0 means unbounded.
  S dfs(int u, int t, const S& limit) {
    if (u == t) return limit;
    for (int& a = iter_[u]; a >= 0; a = next_[a]) {
      int v = to_[a];
      if (!(cap_[a] > S{0}) || level_[v] != level_[u] + 1) continue;
      S lim = (limit < S{0} || cap_[a] < limit) ? cap_[a] : limit;
      S got = dfs(v, t, lim);
      if (got > S{0}) {
        cap_[a] -= got;
        cap_[a ^ 1] += got;
        return got;
      }
    }
    return S{0};
  }

  std::vector<int> head_, level_, iter_;
  std::vector<int> to_, next_;
  std::vector<S> cap_;
};

}  // namespace

template <class S>
MaxFlowResult<S> max_flow(const LatticeDomain& L, const Capacities<S>& t, bool acyclic) {
  const int V = static_cast<int>(L.size());
  const int src = V, snk = V + 1;
  Dinic<S> net(V + 2);
  std::vector<EdgeId> edges = L.edges();
  std::vector<int> arc(edges.size(), -1);
  S big{1};
  for (size_t k = 0; k < edges.size(); ++k) {
    S c = t(edges[k]);
    if (c < S{0}) throw std::invalid_argument("max_flow: negative capacity");
    big += c;
    if (c == S{0}) continue;
    arc[k] = net.add_pair(L.index_of(edges[k].x), L.index_of(edges[k].head()), c, c);
  }
  for (int i = 0; i < V; ++i) {
    if (L.is_source(i)) net.add_pair(src, i, big, S{0});
    if (L.is_sink(i)) net.add_pair(i, snk, big, S{0});
  }
  MaxFlowResult<S> res;
  res.value = net.run(src, snk);
  res.stream = Stream<S>(L.d(), L.n());
  for (size_t k = 0; k < edges.size(); ++k) {
    if (arc[k] < 0) continue;
    res.stream.set(edges[k], t(edges[k]) - net.residual(arc[k]));
  }
  if (acyclic) cancel_cycles(res.stream);

  auto seen = net.reachable(src);
  for (int i = 0; i < V; ++i) {
    if (seen[i]) res.source_side.push_back(L.vertices()[i]);
  }
  for (const EdgeId& e : edges) {
    bool a = seen[L.index_of(e.x)], b = seen[L.index_of(e.head())];
    if (a != b) {
      res.cut.push_back(e);
      res.cut_capacity += t(e);
    }
  }
  return res;
}

template <class S>
void cancel_cycles(Stream<S>& f) {
  while (true) {
    // Directed support graph: tail -> head for s > 0, head -> tail for s < 0.
    std::map<Vertex, std::vector<EdgeId>> out;
    for (const auto& [e, v] : f.values) {
      out[v > S{0} ? e.x : e.head()].push_back(e);
    }
    auto target = [&](const EdgeId& e) { return f(e) > S{0} ? e.head() : e.x; };
    std::map<Vertex, int> color;  // 0 new, 1 on stack, 2 done
    std::vector<EdgeId> cycle;
    for (const auto& [root, unused] : out) {
      if (color[root] != 0) continue;
      std::vector<std::pair<Vertex, size_t>> stack{{root, 0}};
      std::vector<EdgeId> path;
      color[root] = 1;
      while (!stack.empty() && cycle.empty()) {
        auto& [u, next] = stack.back();
        auto it = out.find(u);
        if (it == out.end() || next >= it->second.size()) {
          color[u] = 2;
          stack.pop_back();
          if (!path.empty()) path.pop_back();
          continue;
        }
        EdgeId e = it->second[next++];
        Vertex w = target(e);
        int c = color[w];
        if (c == 1) {
          // Cycle: the edges of path from w onwards, plus e.
          size_t start = 0;
          for (size_t k = 0; k < stack.size(); ++k) {
            if (stack[k].first == w) start = k;
          }
          cycle.assign(path.begin() + static_cast<long>(start), path.end());
          cycle.push_back(e);
        } else if (c == 0) {
          color[w] = 1;
          path.push_back(e);
          stack.push_back({w, 0});
        }
      }
      if (!cycle.empty()) break;
    }
    if (cycle.empty()) return;
    S m = ScalarTraits<S>::abs(f(cycle[0]));
    for (const EdgeId& e : cycle) m = std::min(m, ScalarTraits<S>::abs(f(e)));
    for (const EdgeId& e : cycle) {
      S v = f(e);
      f.set(e, v > S{0} ? S(v - m) : S(v + m));
    }
  }
}

bool separates(const LatticeDomain& L, const std::vector<EdgeId>& E) {
  std::set<EdgeId> removed(E.begin(), E.end());
  const int V = static_cast<int>(L.size());
  std::vector<char> seen(V, 0);
  std::vector<int> stack;
  for (int i = 0; i < V; ++i) {
    if (L.is_source(i)) {
      seen[i] = 1;
      stack.push_back(i);
    }
  }
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    if (L.is_sink(u)) return false;
    const Vertex& x = L.vertices()[u];
    for (int i = 0; i < L.d(); ++i) {
      for (int dir : {1, -1}) {
        EdgeId e = dir > 0 ? EdgeId{x, i} : EdgeId{shifted(x, i, -1), i};
        if (!L.edge_allowed(e) || removed.count(e)) continue;
        int v = L.index_of(dir > 0 ? e.head() : e.x);
        if (!seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
      }
    }
  }
  return true;
}

template <class S>
S cylinder_flow_top_bottom(const CylinderSpec& cyl, int64_t n, const Capacities<S>& t) {
  return max_flow(cylinder_sets(cyl, n).top_bottom, t, false).value;
}

template <class S>
S cylinder_flow_tau(const CylinderSpec& cyl, int64_t n, const Capacities<S>& t) {
  return max_flow(cylinder_sets(cyl, n).halves, t, false).value;
}

template MaxFlowResult<double> max_flow<double>(const LatticeDomain&, const Capacities<double>&, bool);
template MaxFlowResult<Rational> max_flow<Rational>(const LatticeDomain&, const Capacities<Rational>&, bool);
template void cancel_cycles<double>(Stream<double>&);
template void cancel_cycles<Rational>(Stream<Rational>&);
template double cylinder_flow_top_bottom<double>(const CylinderSpec&, int64_t, const Capacities<double>&);
template Rational cylinder_flow_top_bottom<Rational>(const CylinderSpec&, int64_t, const Capacities<Rational>&);
template double cylinder_flow_tau<double>(const CylinderSpec&, int64_t, const Capacities<double>&);
template Rational cylinder_flow_tau<Rational>(const CylinderSpec&, int64_t, const Capacities<Rational>&);

}  // namespace fpp
