#include "fpp/continuous.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace fpp {

namespace {

// Product grid on the union of the breakpoints of a family of boxes.
struct Grid {
  int d = 0;
  std::vector<std::vector<Rational>> bp;
  std::vector<size_t> stride;
  size_t size = 0;

  Grid(int dim, const std::vector<const RBox*>& boxes) : d(dim), bp(dim), stride(dim, 1) {
    for (const RBox* b : boxes) {
      for (int j = 0; j < d; ++j) {
        bp[j].push_back(b->lo[j]);
        bp[j].push_back(b->hi[j]);
      }
    }
    for (int j = 0; j < d; ++j) {
      std::sort(bp[j].begin(), bp[j].end());
      bp[j].erase(std::unique(bp[j].begin(), bp[j].end()), bp[j].end());
      if (bp[j].size() < 2) bp[j] = {Rational(0), Rational(1)};
    }
    for (int j = d - 2; j >= 0; --j) stride[j] = stride[j + 1] * cells(j + 1);
    size = stride[0] * cells(0);
  }

  size_t cells(int j) const { return bp[j].size() - 1; }

  int locate(int j, const Rational& q) const {
    return static_cast<int>(std::lower_bound(bp[j].begin(), bp[j].end(), q) - bp[j].begin());
  }

  std::vector<int> index(size_t flat) const {
    std::vector<int> idx(d);
    for (int j = 0; j < d; ++j) {
      idx[j] = static_cast<int>(flat / stride[j]);
      flat %= stride[j];
    }
    return idx;
  }

  RBox cell_box(size_t flat) const {
    auto idx = index(flat);
    RBox b;
    for (int j = 0; j < d; ++j) {
      b.lo.push_back(bp[j][idx[j]]);
      b.hi.push_back(bp[j][idx[j] + 1]);
    }
    return b;
  }

  std::vector<Rational> center(size_t flat) const {
    auto idx = index(flat);
    std::vector<Rational> c(d);
    for (int j = 0; j < d; ++j) c[j] = (bp[j][idx[j]] + bp[j][idx[j] + 1]) / 2;
    return c;
  }

  // Calls fn(flat) for every grid cell inside box b.
  template <class Fn>
  void for_each_in(const RBox& b, Fn&& fn) const {
    std::vector<int> lo(d), hi(d);
    for (int j = 0; j < d; ++j) {
      lo[j] = locate(j, b.lo[j]);
      hi[j] = locate(j, b.hi[j]);
      if (hi[j] <= lo[j]) return;
    }
    std::vector<int> idx(lo);
    while (true) {
      size_t flat = 0;
      for (int j = 0; j < d; ++j) flat += idx[j] * stride[j];
      fn(flat);
      int j = d - 1;
      while (j >= 0 && ++idx[j] >= hi[j]) {
        idx[j] = lo[j];
        --j;
      }
      if (j < 0) return;
    }
  }
};

std::vector<std::vector<Rational>> rasterize(const ContinuousField& f, const Grid& g) {
  std::vector<std::vector<Rational>> v(g.size);
  for (const FieldCell& c : f.cells) {
    g.for_each_in(c.box, [&](size_t flat) { v[flat] = c.value; });
  }
  return v;
}

bool open_contains(const std::vector<RBox>& boxes, const std::vector<Rational>& p) {
  for (const RBox& b : boxes) {
    bool in = true;
    for (int j = 0; j < b.dim() && in; ++j) in = b.lo[j] < p[j] && p[j] < b.hi[j];
    if (in) return true;
  }
  return false;
}

bool face_in_gamma(const FieldFace& f, const DomainSpec& spec) {
  auto inside = [&](const RBox& g) {
    for (size_t j = 0; j < f.lo.size(); ++j) {
      if (f.lo[j] < g.lo[j] || f.hi[j] > g.hi[j]) return false;
    }
    return true;
  };
  for (const RBox& g : spec.gamma1) {
    if (inside(g)) return true;
  }
  for (const RBox& g : spec.gamma2) {
    if (inside(g)) return true;
  }
  return false;
}

Rational component(const std::vector<Rational>& v, int j) { return v.empty() ? Rational(0) : v[j]; }

double bump(double r2) { return r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0; }

}  // namespace

void ContinuousField::validate() const {
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("field: bad dimension");
  if (M < 0) throw std::invalid_argument("field: M must be nonnegative");
  for (size_t i = 0; i < cells.size(); ++i) {
    const FieldCell& c = cells[i];
    std::string where = "field.cells[" + std::to_string(i) + "]";
    if (c.box.dim() != d || static_cast<int>(c.value.size()) != d) throw std::invalid_argument(where + ": wrong dimension");
    for (int j = 0; j < d; ++j) {
      if (!(c.box.lo[j] < c.box.hi[j])) throw std::invalid_argument(where + ": empty box");
      if (ScalarTraits<Rational>::abs(c.value[j]) > M) throw std::invalid_argument(where + ": component exceeds M");
    }
  }
  if (cells.size() > 4000) return;
  for (size_t a = 0; a < cells.size(); ++a) {
    for (size_t b = a + 1; b < cells.size(); ++b) {
      bool overlap = true;
      for (int j = 0; j < d && overlap; ++j)
        overlap = cells[a].box.lo[j] < cells[b].box.hi[j] && cells[b].box.lo[j] < cells[a].box.hi[j];
      if (overlap)
        throw std::invalid_argument("field.cells[" + std::to_string(a) + "] overlaps field.cells[" + std::to_string(b) + "]");
    }
  }
}

std::vector<Rational> ContinuousField::value_at(const std::vector<Rational>& p) const {
  for (const FieldCell& c : cells) {
    bool in = true;
    for (int j = 0; j < d && in; ++j) in = c.box.lo[j] <= p[j] && p[j] < c.box.hi[j];
    if (in) return c.value;
  }
  return std::vector<Rational>(d, Rational(0));
}

VectorMeasure ContinuousField::measure() const {
  VectorMeasure m;
  m.d = d;
  for (const FieldCell& c : cells) {
    std::vector<double> v(d);
    for (int j = 0; j < d; ++j) v[j] = c.value[j].convert_to<double>();
    m.densities.push_back(DensityBox{c.box, v});
  }
  return m;
}

ContinuousField ContinuousField::scaled(const Rational& c) const {
  ContinuousField out = *this;
  for (FieldCell& cell : out.cells) {
    for (Rational& v : cell.value) v *= c;
  }
  out.M = ScalarTraits<Rational>::abs(c) * M;
  return out;
}

ContinuousField constant_field(const RBox& box, const std::vector<Rational>& v, const Rational& M) {
  ContinuousField f;
  f.d = box.dim();
  f.M = M;
  f.cells.push_back(FieldCell{box, v});
  f.validate();
  return f;
}

ContinuousField combine(const ContinuousField& f, const Rational& a, const ContinuousField& g, const Rational& b) {
  if (f.d != g.d) throw std::invalid_argument("combine: dimension mismatch");
  std::vector<const RBox*> boxes;
  for (const FieldCell& c : f.cells) boxes.push_back(&c.box);
  for (const FieldCell& c : g.cells) boxes.push_back(&c.box);
  ContinuousField out;
  out.d = f.d;
  out.M = ScalarTraits<Rational>::abs(a) * f.M + ScalarTraits<Rational>::abs(b) * g.M;
  if (boxes.empty()) return out;
  Grid grid(f.d, boxes);
  auto vf = rasterize(f, grid), vg = rasterize(g, grid);
  for (size_t flat = 0; flat < grid.size; ++flat) {
    if (vf[flat].empty() && vg[flat].empty()) continue;
    std::vector<Rational> v(f.d);
    bool nonzero = false;
    for (int j = 0; j < f.d; ++j) {
      v[j] = a * component(vf[flat], j) + b * component(vg[flat], j);
      nonzero = nonzero || v[j] != 0;
    }
    if (nonzero) out.cells.push_back(FieldCell{grid.cell_box(flat), v});
  }
  return out;
}

double l1_distance(const ContinuousField& f, const ContinuousField& g) {
  if (f.d != g.d) throw std::invalid_argument("l1_distance: dimension mismatch");
  std::vector<const RBox*> boxes;
  for (const FieldCell& c : f.cells) boxes.push_back(&c.box);
  for (const FieldCell& c : g.cells) boxes.push_back(&c.box);
  if (boxes.empty()) return 0.0;
  Grid grid(f.d, boxes);
  auto vf = rasterize(f, grid), vg = rasterize(g, grid);
  double total = 0;
  for (size_t flat = 0; flat < grid.size; ++flat) {
    if (vf[flat].empty() && vg[flat].empty()) continue;
    double norm = 0;
    for (int j = 0; j < f.d; ++j) {
      double x = (component(vf[flat], j) - component(vg[flat], j)).convert_to<double>();
      norm += x * x;
    }
    total += std::sqrt(norm) * grid.cell_box(flat).volume().convert_to<double>();
  }
  return total;
}

Rational flow_cont(const ContinuousField& sigma, const DomainSpec& spec, const std::vector<RBox>& gamma) {
  Rational total = 0;
  for (size_t gi = 0; gi < gamma.size(); ++gi) {
    const RBox& g = gamma[gi];
    int axis = -1;
    for (int j = 0; j < g.dim(); ++j) {
      if (g.lo[j] == g.hi[j]) axis = j;
    }
    if (axis < 0) throw std::invalid_argument("flow_cont: gamma[" + std::to_string(gi) + "] is not a face");
    const Rational c = g.lo[axis];
    std::vector<Rational> mid(g.dim());
    for (int j = 0; j < g.dim(); ++j) mid[j] = (g.lo[j] + g.hi[j]) / 2;
    bool plus = false, minus = false;
    for (const RBox& b : spec.region) {
      bool transverse = true;
      for (int j = 0; j < b.dim() && transverse; ++j) {
        if (j != axis) transverse = b.lo[j] < mid[j] && mid[j] < b.hi[j];
      }
      if (!transverse) continue;
      plus = plus || (b.lo[axis] <= c && c < b.hi[axis]);
      minus = minus || (b.lo[axis] < c && c <= b.hi[axis]);
    }
    if (plus == minus) throw std::invalid_argument("flow_cont: gamma[" + std::to_string(gi) + "] is not on the boundary");
    Rational sum = 0;
    for (const FieldCell& cell : sigma.cells) {
      const RBox& b = cell.box;
      bool meets = plus ? (b.lo[axis] <= c && c < b.hi[axis]) : (b.lo[axis] < c && c <= b.hi[axis]);
      if (!meets) continue;
      Rational area = 1;
      for (int j = 0; j < b.dim() && area != 0; ++j) {
        if (j == axis) continue;
        Rational lo = std::max(b.lo[j], g.lo[j]), hi = std::min(b.hi[j], g.hi[j]);
        area = lo < hi ? Rational(area * (hi - lo)) : Rational(0);
      }
      sum += cell.value[axis] * area;
    }
    total += plus ? sum : Rational(-sum);
  }
  return total;
}

Rational flow_cont(const ContinuousField& sigma, const DomainSpec& spec) { return flow_cont(sigma, spec, spec.gamma1); }

std::string DivergenceReport::summary() const {
  std::ostringstream os;
  os << "interior " << (interior_ok ? "ok" : "violated") << " (" << interior_violations.size() << ")"
     << ", lateral " << (lateral_ok ? "ok" : "violated") << " (" << lateral_violations.size() << ")"
     << ", support " << (support_ok ? "ok" : "violated") << " (" << support_violations.size() << ")";
  return os.str();
}

DivergenceReport check_divergence_free(const ContinuousField& sigma, const DomainSpec& spec) {
  const int d = sigma.d;
  std::vector<const RBox*> boxes;
  for (const FieldCell& c : sigma.cells) boxes.push_back(&c.box);
  for (const RBox& b : spec.region) boxes.push_back(&b);
  for (const RBox& b : spec.gamma1) boxes.push_back(&b);
  for (const RBox& b : spec.gamma2) boxes.push_back(&b);
  // Pad by one cell on every side so that outer faces are interfaces too.
  RBox pad;
  Grid probe(d, boxes);
  for (int j = 0; j < d; ++j) {
    pad.lo.push_back(probe.bp[j].front() - 1);
    pad.hi.push_back(probe.bp[j].back() + 1);
  }
  boxes.push_back(&pad);
  Grid grid(d, boxes);
  auto val = rasterize(sigma, grid);
  std::vector<char> inside(grid.size);
  for (size_t flat = 0; flat < grid.size; ++flat) inside[flat] = open_contains(spec.region, grid.center(flat));

  DivergenceReport rep;
  for (size_t flat = 0; flat < grid.size; ++flat) {
    if (inside[flat] || val[flat].empty()) continue;
    bool nonzero = false;
    for (const Rational& q : val[flat]) nonzero = nonzero || q != 0;
    if (!nonzero) continue;
    RBox b = grid.cell_box(flat);
    rep.support_ok = false;
    rep.support_violations.push_back(FieldFace{-1, b.lo, b.hi, Rational(0)});
  }
  for (int a = 0; a < d; ++a) {
    for (size_t flat = 0; flat < grid.size; ++flat) {
      auto idx = grid.index(flat);
      if (idx[a] == 0) continue;
      size_t prev = flat - grid.stride[a];
      Rational jump = component(val[flat], a) - component(val[prev], a);
      if (jump == 0) continue;
      RBox b = grid.cell_box(flat);
      FieldFace face{a, b.lo, b.hi, jump};
      face.hi[a] = face.lo[a];
      if (inside[flat] && inside[prev]) {
        rep.interior_ok = false;
        rep.interior_violations.push_back(face);
      } else if (inside[flat] != inside[prev]) {
        if (!face_in_gamma(face, spec)) {
          rep.lateral_ok = false;
          rep.lateral_violations.push_back(face);
        }
      }
    }
  }
  return rep;
}

ContinuousField mollify(const ContinuousField& sigma, int p) {
  if (p < 1) throw std::invalid_argument("mollify: p must be >= 1");
  const int d = sigma.d;
  ContinuousField out;
  out.d = d;
  out.M = sigma.M;
  if (sigma.cells.empty()) return out;

  constexpr int kNodes = 8;
  std::vector<std::vector<double>> nodes;
  std::vector<double> weights;
  {
    std::vector<int> k(d, 0);
    double total = 0;
    while (true) {
      std::vector<double> y(d);
      double r2 = 0;
      for (int j = 0; j < d; ++j) {
        double u = -1.0 + (k[j] + 0.5) * 2.0 / kNodes;  // in units of 1/p
        y[j] = u / p;
        r2 += u * u;
      }
      double w = bump(r2);
      if (w > 0) {
        nodes.push_back(y);
        weights.push_back(w);
        total += w;
      }
      int j = d - 1;
      while (j >= 0 && ++k[j] >= kNodes) {
        k[j] = 0;
        --j;
      }
      if (j < 0) break;
    }
    for (double& w : weights) w /= total;
  }

  std::vector<double> lo(d, std::numeric_limits<double>::infinity()), hi(d, -std::numeric_limits<double>::infinity());
  std::vector<std::vector<double>> clo, chi, cval;
  for (const FieldCell& c : sigma.cells) {
    std::vector<double> a(d), b(d), v(d);
    for (int j = 0; j < d; ++j) {
      a[j] = c.box.lo[j].convert_to<double>();
      b[j] = c.box.hi[j].convert_to<double>();
      v[j] = c.value[j].convert_to<double>();
      lo[j] = std::min(lo[j], a[j]);
      hi[j] = std::max(hi[j], b[j]);
    }
    clo.push_back(a);
    chi.push_back(b);
    cval.push_back(v);
  }
  const int res = 4 * p;
  std::vector<long long> ilo(d), ihi(d);
  for (int j = 0; j < d; ++j) {
    ilo[j] = static_cast<long long>(std::floor((lo[j] - 1.0 / p) * res));
    ihi[j] = static_cast<long long>(std::ceil((hi[j] + 1.0 / p) * res));
  }
  auto sample = [&](const std::vector<double>& q, std::vector<double>& acc, double w) {
    for (size_t c = 0; c < clo.size(); ++c) {
      bool in = true;
      for (int j = 0; j < d && in; ++j) in = clo[c][j] <= q[j] && q[j] < chi[c][j];
      if (in) {
        for (int j = 0; j < d; ++j) acc[j] += w * cval[c][j];
        return;
      }
    }
  };
  const double M = sigma.M.convert_to<double>();
  std::vector<long long> i(ilo);
  std::vector<double> centre(d), q(d);
  while (true) {
    for (int j = 0; j < d; ++j) centre[j] = (static_cast<double>(i[j]) + 0.5) / res;
    std::vector<double> acc(d, 0.0);
    for (size_t nd = 0; nd < nodes.size(); ++nd) {
      for (int j = 0; j < d; ++j) q[j] = centre[j] - nodes[nd][j];
      sample(q, acc, weights[nd]);
    }
    bool nonzero = false;
    for (int j = 0; j < d; ++j) {
      acc[j] = std::clamp(acc[j], -M, M);
      nonzero = nonzero || acc[j] != 0.0;
    }
    if (nonzero) {
      FieldCell cell;
      for (int j = 0; j < d; ++j) {
        cell.box.lo.push_back(Rational(i[j], res));
        cell.box.hi.push_back(Rational(i[j] + 1, res));
        cell.value.push_back(Rational(acc[j]));
      }
      out.cells.push_back(std::move(cell));
    }
    int j = d - 1;
    while (j >= 0 && ++i[j] >= ihi[j]) {
      i[j] = ilo[j];
      --j;
    }
    if (j < 0) break;
  }
  return out;
}

double rate_integral(const ContinuousField& sigma, const std::function<double(const std::vector<double>&)>& rate) {
  double total = 0;
  for (const FieldCell& c : sigma.cells) {
    std::vector<double> v(sigma.d);
    for (int j = 0; j < sigma.d; ++j) v[j] = c.value[j].convert_to<double>();
    double r = rate(v);
    double vol = c.box.volume().convert_to<double>();
    if (vol == 0) continue;
    total += r * vol;
  }
  return total;
}

}  // namespace fpp
