#include "fpp/measure.hpp"

#include "fpp/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace fpp {

// ---------------------------------------------------------------------------
// VectorMeasure

void VectorMeasure::validate() const {
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("measure: bad dimension");
  for (size_t i = 0; i < atoms.size(); ++i) {
    if (static_cast<int>(atoms[i].point.size()) != d || static_cast<int>(atoms[i].weight.size()) != d)
      throw std::invalid_argument("measure.atoms[" + std::to_string(i) + "]: wrong dimension");
    for (double w : atoms[i].weight) {
      if (!std::isfinite(w)) throw std::invalid_argument("measure.atoms[" + std::to_string(i) + "]: non-finite weight");
    }
  }
  for (size_t i = 0; i < densities.size(); ++i) {
    const DensityBox& b = densities[i];
    if (b.box.dim() != d || static_cast<int>(b.value.size()) != d)
      throw std::invalid_argument("measure.densities[" + std::to_string(i) + "]: wrong dimension");
    for (int j = 0; j < d; ++j) {
      if (b.box.lo[j] > b.box.hi[j]) throw std::invalid_argument("measure.densities[" + std::to_string(i) + "]: lo > hi");
    }
    for (double w : b.value) {
      if (!std::isfinite(w)) throw std::invalid_argument("measure.densities[" + std::to_string(i) + "]: non-finite value");
    }
  }
}

VectorMeasure VectorMeasure::scaled(double c) const {
  VectorMeasure out = *this;
  for (Atom& a : out.atoms) {
    for (double& w : a.weight) w *= c;
  }
  for (DensityBox& b : out.densities) {
    for (double& w : b.value) w *= c;
  }
  return out;
}

VectorMeasure VectorMeasure::restricted(const RBox& A) const {
  VectorMeasure out;
  out.d = d;
  for (const Atom& a : atoms) {
    bool in = true;
    for (int j = 0; j < d && in; ++j) in = A.lo[j] <= a.point[j] && a.point[j] < A.hi[j];
    if (in) out.atoms.push_back(a);
  }
  for (const DensityBox& b : densities) {
    DensityBox c = b;
    bool nonempty = true;
    for (int j = 0; j < d; ++j) {
      c.box.lo[j] = std::max(b.box.lo[j], A.lo[j]);
      c.box.hi[j] = std::min(b.box.hi[j], A.hi[j]);
      if (!(c.box.lo[j] < c.box.hi[j])) nonempty = false;
    }
    if (nonempty) out.densities.push_back(c);
  }
  return out;
}

double VectorMeasure::total_variation() const {
  return DistanceEngine(*this).tv();
}

VectorMeasure operator+(const VectorMeasure& a, const VectorMeasure& b) {
  if (a.d != b.d) throw std::invalid_argument("measure sum: dimension mismatch");
  VectorMeasure out = a;
  out.atoms.insert(out.atoms.end(), b.atoms.begin(), b.atoms.end());
  out.densities.insert(out.densities.end(), b.densities.begin(), b.densities.end());
  return out;
}

VectorMeasure operator-(const VectorMeasure& a, const VectorMeasure& b) {
  return a + b.scaled(-1.0);
}

VectorMeasure density_measure(const RBox& box, const std::vector<double>& v) {
  VectorMeasure m;
  m.d = box.dim();
  m.densities.push_back(DensityBox{box, v});
  return m;
}

std::vector<double> box_mass(const VectorMeasure& m, const RBox& B) {
  std::vector<double> out(m.d, 0.0);
  for (const Atom& a : m.atoms) {
    bool in = true;
    for (int j = 0; j < m.d && in; ++j) in = B.lo[j] <= a.point[j] && a.point[j] < B.hi[j];
    if (!in) continue;
    for (int j = 0; j < m.d; ++j) out[j] += a.weight[j];
  }
  for (const DensityBox& b : m.densities) {
    Rational vol = 1;
    for (int j = 0; j < m.d; ++j) {
      Rational lo = std::max(b.box.lo[j], B.lo[j]), hi = std::min(b.box.hi[j], B.hi[j]);
      if (!(lo < hi)) {
        vol = 0;
        break;
      }
      vol *= hi - lo;
    }
    if (vol == 0) continue;
    double v = vol.convert_to<double>();
    for (int j = 0; j < m.d; ++j) out[j] += b.value[j] * v;
  }
  return out;
}

// ---------------------------------------------------------------------------
// DistanceEngine

DistanceEngine::DistanceEngine(const VectorMeasure& sigma) : d_(sigma.d) {
  sigma.validate();
  const int d = d_;
  bp_.assign(d, {});
  for (const Atom& a : sigma.atoms) {
    for (int j = 0; j < d; ++j) bp_[j].push_back(a.point[j].convert_to<double>());
  }
  for (const DensityBox& b : sigma.densities) {
    for (int j = 0; j < d; ++j) {
      bp_[j].push_back(b.box.lo[j].convert_to<double>());
      bp_[j].push_back(b.box.hi[j].convert_to<double>());
    }
  }
  for (int j = 0; j < d; ++j) {
    auto& B = bp_[j];
    if (B.empty()) B.push_back(0.0);
    std::sort(B.begin(), B.end());
    B.erase(std::unique(B.begin(), B.end()), B.end());
  }
  node_stride_.assign(d, 1);
  atom_stride_.assign(d, 1);
  for (int j = d - 2; j >= 0; --j) {
    node_stride_[j] = node_stride_[j + 1] * bp_[j + 1].size();
    atom_stride_[j] = atom_stride_[j + 1] * (bp_[j + 1].size() + 1);
  }
  size_t nodes = node_stride_[0] * bp_[0].size();
  size_t prefixes = atom_stride_[0] * (bp_[0].size() + 1);

  // Density: per-node contributions of the cell ending at that node, then prefix sums.
  dens_vec_.assign(nodes * d, 0.0);
  dens_abs_.assign(nodes, 0.0);
  std::vector<double> cell(nodes * d, 0.0);  // cell indexed by its upper node
  for (const DensityBox& b : sigma.densities) {
    std::vector<int> lo(d), hi(d);
    bool empty = false;
    for (int j = 0; j < d; ++j) {
      const auto& B = bp_[j];
      lo[j] = static_cast<int>(std::lower_bound(B.begin(), B.end(), b.box.lo[j].convert_to<double>()) - B.begin());
      hi[j] = static_cast<int>(std::lower_bound(B.begin(), B.end(), b.box.hi[j].convert_to<double>()) - B.begin());
      if (hi[j] <= lo[j]) empty = true;
    }
    if (empty) continue;
    std::vector<int> idx(lo);
    while (true) {
      size_t flat = 0;
      for (int j = 0; j < d; ++j) flat += static_cast<size_t>(idx[j] + 1) * node_stride_[j];
      for (int c = 0; c < d; ++c) cell[flat * d + c] += b.value[c];
      int j = d - 1;
      while (j >= 0 && ++idx[j] >= hi[j]) {
        idx[j] = lo[j];
        --j;
      }
      if (j < 0) break;
    }
  }
  tv_dens_ = 0;
  for (size_t flat = 0; flat < nodes; ++flat) {
    size_t rem = flat;
    double vol = 1;
    bool valid = true;
    for (int j = 0; j < d; ++j) {
      size_t i = rem / node_stride_[j];
      rem %= node_stride_[j];
      if (i == 0) {
        valid = false;
        break;
      }
      vol *= bp_[j][i] - bp_[j][i - 1];
    }
    if (!valid) continue;
    double norm = 0;
    for (int c = 0; c < d; ++c) {
      double v = cell[flat * d + c];
      norm += v * v;
      dens_vec_[flat * d + c] = v * vol;
    }
    norm = std::sqrt(norm);
    dens_abs_[flat] = norm * vol;
    tv_dens_ += norm * vol;
  }
  for (int j = 0; j < d; ++j) {
    size_t stride = node_stride_[j];
    size_t len = bp_[j].size();
    for (size_t flat = 0; flat < nodes; ++flat) {
      size_t i = (flat / stride) % len;
      if (i == 0) continue;
      dens_abs_[flat] += dens_abs_[flat - stride];
      for (int c = 0; c < d; ++c) dens_vec_[flat * d + c] += dens_vec_[(flat - stride) * d + c];
    }
  }

  atom_node_.reserve(sigma.atoms.size());
  atom_w_.reserve(sigma.atoms.size());
  for (const Atom& a : sigma.atoms) {
    size_t flat = 0;
    for (int j = 0; j < d; ++j) {
      const auto& B = bp_[j];
      size_t i = std::lower_bound(B.begin(), B.end(), a.point[j].convert_to<double>()) - B.begin();
      flat += i * node_stride_[j];
    }
    atom_node_.push_back(flat);
    atom_w_.push_back(a.weight);
  }
  atom_vec_.assign(prefixes * d, 0.0);
  atom_abs_.assign(prefixes, 0.0);
  build_atom_tables();
  lo_ = hi_ = 0;
}

void DistanceEngine::set_atom_weights(const std::vector<std::vector<double>>& w) {
  if (w.size() != atom_w_.size()) throw std::invalid_argument("set_atom_weights: count mismatch");
  atom_w_ = w;
  build_atom_tables();
}

void DistanceEngine::build_atom_tables() {
  const int d = d_;
  std::fill(atom_vec_.begin(), atom_vec_.end(), 0.0);
  std::fill(atom_abs_.begin(), atom_abs_.end(), 0.0);
  std::map<size_t, std::vector<double>> merged;
  for (size_t a = 0; a < atom_node_.size(); ++a) {
    auto& acc = merged[atom_node_[a]];
    if (acc.empty()) acc.assign(d, 0.0);
    for (int c = 0; c < d; ++c) acc[c] += atom_w_[a][c];
  }
  tv_atoms_ = 0;
  for (const auto& [node, w] : merged) {
    size_t rem = node, flat = 0;
    for (int j = 0; j < d; ++j) {
      size_t i = rem / node_stride_[j];
      rem %= node_stride_[j];
      flat += (i + 1) * atom_stride_[j];
    }
    double norm = 0;
    for (int c = 0; c < d; ++c) {
      atom_vec_[flat * d + c] += w[c];
      norm += w[c] * w[c];
    }
    norm = std::sqrt(norm);
    atom_abs_[flat] += norm;
    tv_atoms_ += norm;
  }
  size_t prefixes = atom_abs_.size();
  for (int j = 0; j < d; ++j) {
    size_t stride = atom_stride_[j];
    size_t len = bp_[j].size() + 1;
    for (size_t flat = 0; flat < prefixes; ++flat) {
      size_t i = (flat / stride) % len;
      if (i == 0) continue;
      atom_abs_[flat] += atom_abs_[flat - stride];
      for (int c = 0; c < d; ++c) atom_vec_[flat * d + c] += atom_vec_[(flat - stride) * d + c];
    }
  }
}

void DistanceEngine::density_factor(int axis, double lo, double hi, double scale, AxisFactor& f) const {
  f.count = 0;
  if (!(lo < hi)) return;
  const auto& B = bp_[axis];
  const int nb = static_cast<int>(B.size());
  auto add = [&](double y, double sign) {
    if (y <= B.front()) return;  // prefix is zero at the first node
    if (y >= B.back()) {
      f.node[f.count] = nb - 1;
      f.w[f.count++] = sign * scale;
      return;
    }
    int t = static_cast<int>(std::upper_bound(B.begin(), B.end(), y) - B.begin()) - 1;
    double frac = (y - B[t]) / (B[t + 1] - B[t]);
    f.node[f.count] = t;
    f.w[f.count++] = sign * scale * (1.0 - frac);
    f.node[f.count] = t + 1;
    f.w[f.count++] = sign * scale * frac;
  };
  add(hi, 1.0);
  add(lo, -1.0);
}

void DistanceEngine::interval_factor(int axis, int t, double length, AxisFactor& f) const {
  const auto& B = bp_[axis];
  double width = B[t + 1] - B[t];
  f.count = 2;
  f.node[0] = t;
  f.w[0] = -length / width;
  f.node[1] = t + 1;
  f.w[1] = length / width;
  f.atoms = false;
}

void DistanceEngine::atom_factor(int axis, double lo, double hi, AxisFactor& f) const {
  const auto& B = bp_[axis];
  f.atoms = false;
  if (!(lo < hi)) return;
  f.cnt_lo = static_cast<int>(std::lower_bound(B.begin(), B.end(), lo) - B.begin());
  f.cnt_hi = static_cast<int>(std::lower_bound(B.begin(), B.end(), hi) - B.begin());
  f.atoms = f.cnt_hi > f.cnt_lo;
}

double DistanceEngine::contract_abs(const std::vector<double>& table, const AxisFactor* f) const {
  const int d = d_;
  for (int j = 0; j < d; ++j) {
    if (f[j].count == 0) return 0.0;
  }
  int idx[kMaxDim] = {0, 0, 0, 0};
  double total = 0;
  while (true) {
    size_t flat = 0;
    double w = 1;
    for (int j = 0; j < d; ++j) {
      flat += static_cast<size_t>(f[j].node[idx[j]]) * node_stride_[j];
      w *= f[j].w[idx[j]];
    }
    total += w * table[flat];
    int j = d - 1;
    while (j >= 0 && ++idx[j] >= f[j].count) {
      idx[j] = 0;
      --j;
    }
    if (j < 0) break;
  }
  return total;
}

void DistanceEngine::contract_vec(const std::vector<double>& table, const AxisFactor* f, double* out) const {
  const int d = d_;
  for (int c = 0; c < d; ++c) out[c] = 0.0;
  for (int j = 0; j < d; ++j) {
    if (f[j].count == 0) return;
  }
  int idx[kMaxDim] = {0, 0, 0, 0};
  while (true) {
    size_t flat = 0;
    double w = 1;
    for (int j = 0; j < d; ++j) {
      flat += static_cast<size_t>(f[j].node[idx[j]]) * node_stride_[j];
      w *= f[j].w[idx[j]];
    }
    const double* row = &table[flat * d];
    for (int c = 0; c < d; ++c) out[c] += w * row[c];
    int j = d - 1;
    while (j >= 0 && ++idx[j] >= f[j].count) {
      idx[j] = 0;
      --j;
    }
    if (j < 0) break;
  }
}

double DistanceEngine::atom_abs(const AxisFactor* f) const {
  const int d = d_;
  for (int j = 0; j < d; ++j) {
    if (!f[j].atoms) return 0.0;
  }
  double total = 0;
  for (int corner = 0; corner < (1 << d); ++corner) {
    size_t flat = 0;
    int sign = 1;
    for (int j = 0; j < d; ++j) {
      bool high = corner & (1 << j);
      flat += static_cast<size_t>(high ? f[j].cnt_hi : f[j].cnt_lo) * atom_stride_[j];
      if (!high) sign = -sign;
    }
    total += sign * atom_abs_[flat];
  }
  return total;
}

void DistanceEngine::atom_vec(const AxisFactor* f, double* out) const {
  const int d = d_;
  for (int c = 0; c < d; ++c) out[c] = 0.0;
  for (int j = 0; j < d; ++j) {
    if (!f[j].atoms) return;
  }
  for (int corner = 0; corner < (1 << d); ++corner) {
    size_t flat = 0;
    int sign = 1;
    for (int j = 0; j < d; ++j) {
      bool high = corner & (1 << j);
      flat += static_cast<size_t>(high ? f[j].cnt_hi : f[j].cnt_lo) * atom_stride_[j];
      if (!high) sign = -sign;
    }
    for (int c = 0; c < d; ++c) out[c] += sign * atom_vec_[flat * d + c];
  }
}

std::vector<double> DistanceEngine::mass(const double* lo, const double* hi) const {
  AxisFactor f[kMaxDim];
  for (int j = 0; j < d_; ++j) {
    density_factor(j, lo[j], hi[j], 1.0, f[j]);
    atom_factor(j, lo[j], hi[j], f[j]);
  }
  std::vector<double> out(d_), tmp(d_);
  contract_vec(dens_vec_, f, out.data());
  atom_vec(f, tmp.data());
  for (int c = 0; c < d_; ++c) out[c] += tmp[c];
  return out;
}

// Upper bound for S_k = sum_Q |sigma(Q)| uniformly over x in [x0,x1], lambda in [l0,l1]; exact at a point.
// The cubes of one level partition space, so S_k = TV - sum_Q loss(Q) with loss(Q) = |sigma|(Q) - |sigma(Q)|.
// loss is monotone under inclusion, so the inner box I of every cube (the part covered for all parameters in
// the cell) gives loss(Q) >= loss(I). Cubes whose hull stays in one open grid cell have zero loss. When one
// axis of a cube stays inside grid cell t, loss(I) is linear in the inner length along that axis, so such
// cubes are summed per t.
namespace {
constexpr double kMaxCombos = 20000;
}  // namespace

double DistanceEngine::level_bound_impl(const double* x0, const double* x1, double l0, double l1, int k) const {
  const int d = d_;
  struct Seg {
    bool clean;
    AxisFactor f;
  };
  std::vector<Seg> segs[kMaxDim];
  const double s = std::ldexp(1.0, -k);
  std::vector<double> sum_i;
  std::vector<char> used;
  for (int j = 0; j < d; ++j) {
    bool overlap = false;
    const auto& B = bp_[j];
    const int nb = static_cast<int>(B.size());
    const double B0 = B.front(), BL = B.back();
    double za = std::min((B0 - x1[j]) / (l0 * s), (B0 - x1[j]) / (l1 * s));
    double zb = std::max((BL - x0[j]) / (l0 * s), (BL - x0[j]) / (l1 * s));
    long long zlo = static_cast<long long>(std::floor(za)) - 1;
    long long zhi = static_cast<long long>(std::ceil(zb)) + 1;
    sum_i.assign(nb, 0.0);
    used.assign(nb, 0);
    const double X0 = x0[j], X1 = x1[j];
    auto a_min = [&](long long z) {
      double clo = s * (static_cast<double>(z) - 0.5);
      return std::min(l0 * clo, l1 * clo) + X0;
    };
    auto a_max = [&](long long z) {
      double clo = s * (static_cast<double>(z) - 0.5);
      return std::max(l0 * clo, l1 * clo) + X1;
    };
    auto b_min = [&](long long z) {
      double chi = s * (static_cast<double>(z) + 0.5);
      return std::min(l0 * chi, l1 * chi) + X0;
    };
    auto b_max = [&](long long z) {
      double chi = s * (static_cast<double>(z) + 0.5);
      return std::max(l0 * chi, l1 * chi) + X1;
    };
    // First z in [lo, hi] where a monotone predicate turns true; hi + 1 if never.
    auto first_true = [](long long lo, long long hi, auto pred) {
      while (lo <= hi) {
        long long mid = lo + (hi - lo) / 2;
        if (pred(mid)) {
          hi = mid - 1;
        } else {
          lo = mid + 1;
        }
      }
      return lo;
    };
    // Cubes with b_max <= B0 or a_min > BL miss the support.
    const long long za0 = first_true(zlo, zhi, [&](long long z) { return b_max(z) > B0; });
    const long long zb0 = first_true(zlo, zhi, [&](long long z) { return a_min(z) > BL; }) - 1;
    if (za0 <= zb0) overlap = true;

    // Cubes whose hull [a_min, b_max) holds a breakpoint are handled one by one.
    std::vector<std::pair<long long, long long>> straddle;
    for (double b : B) {
      long long lo = std::max(za0, first_true(zlo, zhi, [&](long long z) { return b_max(z) > b; }));
      long long hi = std::min(zb0, first_true(zlo, zhi, [&](long long z) { return a_min(z) > b; }) - 1);
      if (lo <= hi) straddle.emplace_back(lo, hi);
    }
    std::sort(straddle.begin(), straddle.end());
    std::vector<std::pair<long long, long long>> merged;
    for (const auto& r : straddle) {
      if (!merged.empty() && r.first <= merged.back().second + 1) {
        merged.back().second = std::max(merged.back().second, r.second);
      } else {
        merged.push_back(r);
      }
    }

    auto one_cube = [&](long long z) {
      const double amn = a_min(z), amx = a_max(z), bmn = b_min(z), bmx = b_max(z);
      if (!(amx < bmn)) return;
      int t = static_cast<int>(std::upper_bound(B.begin(), B.end(), amn) - B.begin()) - 1;
      if (t >= 0 && t <= nb - 2 && B[t] < amn && bmx <= B[t + 1]) {
        used[t] = 1;
        sum_i[t] += bmn - amx;
        return;
      }
      Seg seg;
      seg.clean = false;
      density_factor(j, amx, bmn, 1.0, seg.f);
      atom_factor(j, amx, bmn, seg.f);
      if (seg.f.count == 0 && !seg.f.atoms) return;
      segs[j].push_back(seg);
    };
    // A run of cubes inside one grid cell: the inner length is linear in z on z <= -1, z = 0 and z >= 1.
    auto clean_run = [&](long long ga, long long gb) {
      if (ga > gb) return;
      int t = static_cast<int>(std::upper_bound(B.begin(), B.end(), a_min(ga)) - B.begin()) - 1;
      auto positive = [&](long long z) { return a_max(z) < b_min(z); };
      auto series = [](long long a, long long b) {
        return 0.5 * (static_cast<double>(a) + static_cast<double>(b)) * static_cast<double>(b - a + 1);
      };
      double total = 0;
      bool any = false;
      long long n_lo = ga, n_hi = std::min(gb, -1LL);
      if (n_lo <= n_hi) {
        long long first = first_true(n_lo, n_hi, positive);
        if (first <= n_hi) {
          any = true;
          double cnt = static_cast<double>(n_hi - first + 1);
          total += s * ((l1 - l0) * series(first, n_hi) + 0.5 * (l1 + l0) * cnt) + (X0 - X1) * cnt;
        }
      }
      if (ga <= 0 && 0 <= gb && positive(0)) {
        any = true;
        total += b_min(0) - a_max(0);
      }
      long long p_lo = std::max(ga, 1LL), p_hi = gb;
      if (p_lo <= p_hi) {
        long long stop = first_true(p_lo, p_hi, [&](long long z) { return !positive(z); });
        if (stop > p_lo) {
          any = true;
          long long last = stop - 1;
          double cnt = static_cast<double>(last - p_lo + 1);
          total += s * ((l0 - l1) * series(p_lo, last) + 0.5 * (l0 + l1) * cnt) + (X0 - X1) * cnt;
        }
      }
      if (!any) return;
      used[t] = 1;
      sum_i[t] += total;
    };
    long long cursor = za0;
    for (const auto& [lo, hi] : merged) {
      clean_run(cursor, lo - 1);
      for (long long z = lo; z <= hi; ++z) one_cube(z);
      cursor = hi + 1;
    }
    clean_run(cursor, zb0);
    for (int t = 0; t < nb; ++t) {
      if (!used[t]) continue;
      Seg seg;
      seg.clean = true;
      interval_factor(j, t, sum_i[t], seg.f);
      segs[j].push_back(seg);
    }
    if (!overlap) return 0.0;  // no cube meets the support
  }
  const bool point = l0 == l1 && std::equal(x0, x0 + d, x1);
  double combos = 1;
  for (int j = 0; j < d; ++j) combos *= static_cast<double>(segs[j].size());
  if (combos == 0) return tv();
  if (!point && combos > kMaxCombos) return tv();

  double loss = 0;
  int idx[kMaxDim] = {0, 0, 0, 0};
  AxisFactor f[kMaxDim];
  double vec[kMaxDim], tmp[kMaxDim];
  while (true) {
    bool all_clean = true, any_clean = false;
    for (int j = 0; j < d; ++j) {
      const Seg& sg = segs[j][idx[j]];
      all_clean = all_clean && sg.clean;
      any_clean = any_clean || sg.clean;
      f[j] = sg.f;
    }
    if (!all_clean) {
      contract_vec(dens_vec_, f, vec);
      double abs_i = contract_abs(dens_abs_, f);
      if (!any_clean) {
        atom_vec(f, tmp);
        for (int c = 0; c < d; ++c) vec[c] += tmp[c];
        abs_i += atom_abs(f);
      }
      double norm = 0;
      for (int c = 0; c < d; ++c) norm += vec[c] * vec[c];
      loss += std::max(0.0, abs_i - std::sqrt(norm));
    }
    int j = d - 1;
    while (j >= 0 && ++idx[j] >= static_cast<int>(segs[j].size())) {
      idx[j] = 0;
      --j;
    }
    if (j < 0) break;
  }
  return std::max(0.0, tv() - loss);
}

double DistanceEngine::level_sum(const double* x, double lambda, int k) const {
  return level_bound_impl(x, x, lambda, lambda, k);
}

double DistanceEngine::level_bound(const double* x0, const double* x1, double l0, double l1, int k) const {
  return std::min(level_bound_impl(x0, x1, l0, l1, k), tv());
}

double DistanceEngine::truncated_sum(const double* x, double lambda, int K) const {
  double total = 0;
  for (int k = 0; k <= K; ++k) total += std::ldexp(level_sum(x, lambda, k), -k);
  return total;
}

double DistanceEngine::cell_upper(const double* x0, const double* x1, double l0, double l1, int K) const {
  double total = 0;
  for (int k = 0; k <= K; ++k) total += std::ldexp(level_bound(x0, x1, l0, l1, k), -k);
  return total + std::ldexp(tv(), -K);
}

// ---------------------------------------------------------------------------
// Branch and bound over (x, lambda) in [-1,1]^d x [1,2]

namespace {

struct Cell {
  double lo[kMaxDim + 1];
  double hi[kMaxDim + 1];
  double upper = 0;
  int depth = 0;
};

struct CellOrder {
  bool operator()(const Cell& a, const Cell& b) const {
    if (a.upper != b.upper) return a.upper < b.upper;
    for (int j = 0; j <= kMaxDim; ++j) {
      if (a.lo[j] != b.lo[j]) return a.lo[j] > b.lo[j];
    }
    return false;
  }
};

constexpr int kMaxSplitDepth = 28 * (kMaxDim + 1);

}  // namespace

double truncated_sum_at(const VectorMeasure& mu, const VectorMeasure& nu, const std::vector<double>& x, double lambda,
                        int K_max) {
  DistanceEngine engine(mu - nu);
  return engine.truncated_sum(x.data(), lambda, K_max);
}

DistanceBracket distance(const VectorMeasure& mu, const VectorMeasure& nu, const DistanceOptions& opts) {
  if (mu.d != nu.d) throw std::invalid_argument("distance: dimension mismatch");
  if (opts.K_max < 0 || opts.K_max > 40) throw std::invalid_argument("distance: K_max out of range");
  const int d = mu.d;
  const int P = d + 1;  // parameters: x_1..x_d, lambda
  DistanceEngine engine(mu - nu);
  const int K = opts.K_max;

  DistanceBracket out;
  out.K_max = K;
  out.tv = engine.tv();
  out.argmax_x.assign(d, 0.0);
  out.argmax_lambda = 1.0;

  auto evaluate = [&](Cell& c, double& lower, std::vector<double>& center) {
    c.upper = engine.cell_upper(c.lo, c.hi, c.lo[d], c.hi[d], K);
    center.assign(P, 0.0);
    for (int j = 0; j < P; ++j) center[j] = 0.5 * (c.lo[j] + c.hi[j]);
    lower = engine.truncated_sum(center.data(), center[d], K);
  };

  Cell root;
  for (int j = 0; j < d; ++j) {
    root.lo[j] = -1.0;
    root.hi[j] = 1.0;
  }
  root.lo[d] = 1.0;
  root.hi[d] = 2.0;

  double best = -1;
  std::priority_queue<Cell, std::vector<Cell>, CellOrder> heap;
  {
    double lower;
    std::vector<double> center;
    evaluate(root, lower, center);
    best = lower;
    out.argmax_x.assign(center.begin(), center.begin() + d);
    out.argmax_lambda = center[d];
    heap.push(root);
    out.cells = 1;
  }
  std::vector<Cell> frozen;  // cells too small to split further
  auto top_upper = [&]() {
    double u = heap.empty() ? 0.0 : heap.top().upper;
    for (const Cell& c : frozen) u = std::max(u, c.upper);
    return u;
  };

  while (!heap.empty()) {
    double upper = top_upper();
    if (upper - best <= std::max(opts.abs_gap, opts.rel_gap * upper)) {
      out.converged = true;
      break;
    }
    if (upper <= opts.stop_below || best >= opts.stop_above) break;
    if (out.cells >= opts.max_cells) break;

    std::vector<Cell> parents;
    while (!heap.empty() && parents.size() < opts.batch) {
      parents.push_back(heap.top());
      heap.pop();
    }
    std::vector<Cell> children;
    for (const Cell& c : parents) {
      if (c.depth >= kMaxSplitDepth) {
        frozen.push_back(c);
        continue;
      }
      int axis = 0;
      double widest = -1;
      for (int j = 0; j < P; ++j) {
        double w = c.hi[j] - c.lo[j];
        if (w > widest) {
          widest = w;
          axis = j;
        }
      }
      double mid = 0.5 * (c.lo[axis] + c.hi[axis]);
      Cell a = c, b = c;
      a.hi[axis] = mid;
      b.lo[axis] = mid;
      a.depth = b.depth = c.depth + 1;
      children.push_back(a);
      children.push_back(b);
    }
    std::vector<double> lowers(children.size());
    std::vector<std::vector<double>> centers(children.size());
    parallel_for(children.size(), opts.threads, [&](size_t i) { evaluate(children[i], lowers[i], centers[i]); });
    for (size_t i = 0; i < children.size(); ++i) {
      if (lowers[i] > best) {
        best = lowers[i];
        out.argmax_x.assign(centers[i].begin(), centers[i].begin() + d);
        out.argmax_lambda = centers[i][d];
      }
      heap.push(children[i]);
    }
    out.cells += children.size();
    if (children.empty() && heap.empty()) break;
  }
  out.lower = std::max(0.0, best);
  out.upper = std::max(out.lower, top_upper());
  if (out.upper - out.lower <= std::max(opts.abs_gap, opts.rel_gap * out.upper)) out.converged = true;
  std::ostringstream grid;
  grid << "branch-and-bound over x in [-1,1]^" << d << ", lambda in [1,2]; " << out.cells << " cells; K_max=" << K
       << "; tail 2^-K_max*TV(mu-nu)";
  out.grid = grid.str();
  return out;
}

}  // namespace fpp
