#include "fpp/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace fpp {

namespace {

uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Visit every integer point of the inclusive box [lo, hi] in lexicographic order.
void for_each_point(int d, const std::vector<int64_t>& lo, const std::vector<int64_t>& hi,
                    const std::function<void(const Vertex&)>& fn) {
  for (int j = 0; j < d; ++j) {
    if (lo[j] > hi[j]) return;
  }
  Vertex x;
  for (int j = 0; j < d; ++j) x[j] = lo[j];
  while (true) {
    fn(x);
    int j = d - 1;
    while (j >= 0) {
      if (++x[j] <= hi[j]) break;
      x[j] = lo[j];
      --j;
    }
    if (j < 0) return;
  }
}

int degenerate_axis(const RBox& b) {
  int axis = -1;
  for (int j = 0; j < b.dim(); ++j) {
    if (b.lo[j] == b.hi[j]) {
      if (axis >= 0) return -2;
      axis = j;
    } else if (b.lo[j] > b.hi[j]) {
      return -3;
    }
  }
  return axis;
}

Rational closed_box_gap(const RBox& a, const RBox& b) {
  Rational gap = 0;
  for (int j = 0; j < a.dim(); ++j) {
    gap = std::max(gap, Rational(b.lo[j] - a.hi[j]));
    gap = std::max(gap, Rational(a.lo[j] - b.hi[j]));
  }
  return gap;
}

}  // namespace

Vertex shifted(Vertex x, int axis, int64_t delta) {
  x[axis] += delta;
  return x;
}

size_t VertexHash::operator()(const Vertex& v) const {
  uint64_t h = 0x51ed270b27ULL;
  for (int j = 0; j < kMaxDim; ++j) h = mix64(h ^ static_cast<uint64_t>(v.c[j]));
  return static_cast<size_t>(h);
}

size_t EdgeHash::operator()(const EdgeId& e) const {
  return static_cast<size_t>(mix64(VertexHash{}(e.x) ^ static_cast<uint64_t>(e.axis + 1)));
}

Rational RBox::volume() const {
  Rational v = 1;
  for (int j = 0; j < dim(); ++j) v *= std::max(Rational(0), Rational(hi[j] - lo[j]));
  return v;
}

RBox make_box(const std::vector<Rational>& lo, const std::vector<Rational>& hi) {
  if (lo.size() != hi.size()) throw std::invalid_argument("box corners differ in dimension");
  return RBox{lo, hi};
}

RBox unit_cube_box(int d) {
  return RBox{std::vector<Rational>(d, Rational(-1, 2)), std::vector<Rational>(d, Rational(1, 2))};
}

void DomainSpec::validate() const {
  if (d < 2 || d > kMaxDim) throw std::invalid_argument("domain: d must be in [2," + std::to_string(kMaxDim) + "]");
  if (region.empty()) throw std::invalid_argument("domain.region: at least one box required");
  for (size_t b = 0; b < region.size(); ++b) {
    if (region[b].dim() != d) throw std::invalid_argument("domain.region[" + std::to_string(b) + "]: wrong dimension");
    for (int j = 0; j < d; ++j) {
      if (!(region[b].lo[j] < region[b].hi[j]))
        throw std::invalid_argument("domain.region[" + std::to_string(b) + "]: empty side on axis " + std::to_string(j + 1));
    }
  }
  auto check_faces = [&](const std::vector<RBox>& faces, const char* name) {
    if (faces.empty()) throw std::invalid_argument(std::string("domain.") + name + ": at least one face required");
    for (size_t f = 0; f < faces.size(); ++f) {
      std::string where = std::string("domain.") + name + "[" + std::to_string(f) + "]";
      if (faces[f].dim() != d) throw std::invalid_argument(where + ": wrong dimension");
      int axis = degenerate_axis(faces[f]);
      if (axis < 0) throw std::invalid_argument(where + ": must be degenerate along exactly one axis");
      bool on_boundary = false;
      for (const RBox& box : region) {
        if (faces[f].lo[axis] != box.lo[axis] && faces[f].lo[axis] != box.hi[axis]) continue;
        bool inside = true;
        for (int j = 0; j < d; ++j) {
          if (j == axis) continue;
          if (faces[f].lo[j] < box.lo[j] || faces[f].hi[j] > box.hi[j]) inside = false;
        }
        if (inside) on_boundary = true;
      }
      if (!on_boundary) throw std::invalid_argument(where + ": not on the boundary of a region box");
    }
  };
  check_faces(gamma1, "gamma1");
  check_faces(gamma2, "gamma2");
  for (const RBox& a : gamma1) {
    for (const RBox& b : gamma2) {
      if (closed_box_gap(a, b) <= 0) throw std::invalid_argument("domain: gamma1 and gamma2 must be at positive distance");
    }
  }
}

DomainSpec unit_square_spec(int d) {
  DomainSpec spec;
  spec.d = d;
  spec.region.push_back(RBox{std::vector<Rational>(d, 0), std::vector<Rational>(d, 1)});
  RBox left{std::vector<Rational>(d, 0), std::vector<Rational>(d, 1)};
  left.hi[0] = 0;
  RBox right{std::vector<Rational>(d, 0), std::vector<Rational>(d, 1)};
  right.lo[0] = 1;
  spec.gamma1.push_back(left);
  spec.gamma2.push_back(right);
  return spec;
}

LatticeDomain::LatticeDomain(int d, int64_t n, std::vector<Vertex> vertices, const std::vector<Vertex>& sources,
                             const std::vector<Vertex>& sinks)
    : d_(d), n_(n), vertices_(std::move(vertices)) {
  std::sort(vertices_.begin(), vertices_.end());
  vertices_.erase(std::unique(vertices_.begin(), vertices_.end()), vertices_.end());
  flags_.assign(vertices_.size(), 0);
  index_.reserve(vertices_.size() * 2);
  for (size_t i = 0; i < vertices_.size(); ++i) index_.emplace(vertices_[i], static_cast<int>(i));
  for (size_t i = 0; i < vertices_.size(); ++i) {
    for (int j = 0; j < d_ && !(flags_[i] & kBoundary); ++j) {
      for (int delta : {-1, 1}) {
        if (!index_.count(shifted(vertices_[i], j, delta))) flags_[i] |= kBoundary;
      }
    }
  }
  for (const Vertex& x : sources) {
    int i = index_of(x);
    if (i < 0) throw std::invalid_argument("source vertex outside the vertex set");
    flags_[i] |= kSource;
  }
  for (const Vertex& x : sinks) {
    int i = index_of(x);
    if (i < 0) throw std::invalid_argument("sink vertex outside the vertex set");
    if (flags_[i] & kSource) throw std::invalid_argument("vertex " + format_vertex(x, d_) + " is both source and sink");
    flags_[i] |= kSink;
  }
}

int LatticeDomain::index_of(const Vertex& x) const {
  auto it = index_.find(x);
  return it == index_.end() ? -1 : it->second;
}

bool LatticeDomain::is_terminal(const Vertex& x) const {
  int i = index_of(x);
  return i >= 0 && is_terminal(i);
}

std::vector<Vertex> LatticeDomain::boundary() const {
  std::vector<Vertex> out;
  for (size_t i = 0; i < vertices_.size(); ++i) {
    if (flags_[i] & kBoundary) out.push_back(vertices_[i]);
  }
  return out;
}

std::vector<Vertex> LatticeDomain::sources() const {
  std::vector<Vertex> out;
  for (size_t i = 0; i < vertices_.size(); ++i) {
    if (flags_[i] & kSource) out.push_back(vertices_[i]);
  }
  return out;
}

std::vector<Vertex> LatticeDomain::sinks() const {
  std::vector<Vertex> out;
  for (size_t i = 0; i < vertices_.size(); ++i) {
    if (flags_[i] & kSink) out.push_back(vertices_[i]);
  }
  return out;
}

bool LatticeDomain::edge_allowed(const EdgeId& e) const {
  int a = index_of(e.x);
  if (a < 0) return false;
  int b = index_of(e.head());
  if (b < 0) return false;
  return !(is_terminal(a) && is_terminal(b));
}

std::vector<EdgeId> LatticeDomain::edges() const {
  std::vector<EdgeId> out;
  for (const Vertex& x : vertices_) {
    for (int j = 0; j < d_; ++j) {
      EdgeId e{x, j};
      if (edge_allowed(e)) out.push_back(e);
    }
  }
  return out;
}

bool within_one_step(const Vertex& x, int d, int64_t n, const RBox& box) {
  for (int j = 0; j < d; ++j) {
    Rational X = x[j];
    if (!(n * box.lo[j] - X < 1)) return false;
    if (!(X - n * box.hi[j] < 1)) return false;
  }
  return true;
}

LatticeDomain discretize_domain(const DomainSpec& spec, int64_t n) {
  spec.validate();
  if (n < 1) throw std::invalid_argument("discretize_domain: n must be >= 1");
  const int d = spec.d;
  std::vector<int64_t> lo(d), hi(d);
  for (int j = 0; j < d; ++j) {
    Rational l = spec.region[0].lo[j], h = spec.region[0].hi[j];
    for (const RBox& b : spec.region) {
      l = std::min(l, b.lo[j]);
      h = std::max(h, b.hi[j]);
    }
    lo[j] = floor_to_ll(n * l);
    hi[j] = ceil_to_ll(n * h);
  }
  std::vector<Vertex> omega;
  for_each_point(d, lo, hi, [&](const Vertex& x) {
    for (const RBox& b : spec.region) {
      if (within_one_step(x, d, n, b)) {
        omega.push_back(x);
        return;
      }
    }
  });
  if (omega.empty()) throw std::invalid_argument("discretize_domain: empty lattice domain at n=" + std::to_string(n));
  LatticeDomain base(d, n, omega, {}, {});
  auto near_any = [&](const Vertex& x, const std::vector<RBox>& faces) {
    for (const RBox& f : faces) {
      if (within_one_step(x, d, n, f)) return true;
    }
    return false;
  };
  std::vector<Vertex> g1, g2;
  for (const Vertex& x : base.boundary()) {
    bool n1 = near_any(x, spec.gamma1), n2 = near_any(x, spec.gamma2);
    if (n1 && !n2) g1.push_back(x);
    if (n2 && !n1) g2.push_back(x);
  }
  return LatticeDomain(d, n, base.vertices(), g1, g2);
}

// ---------------------------------------------------------------------------
// Cylinders

int CylinderSpec::normal_axis() const {
  return degenerate_axis(A);
}

bool CylinderSpec::exact() const {
  int j = normal_axis();
  if (j < 0) return false;
  for (int k = 0; k < A.dim(); ++k) {
    if (k == j) {
      if (std::fabs(v[k]) != 1.0) return false;
    } else if (v[k] != 0.0) {
      return false;
    }
  }
  return true;
}

void CylinderSpec::validate() const {
  int d = A.dim();
  if (d < 2 || d > kMaxDim) throw std::invalid_argument("cylinder: bad dimension");
  int j = degenerate_axis(A);
  if (j == -3) throw std::invalid_argument("cylinder: A has lo > hi");
  if (j < 0) throw std::invalid_argument("cylinder: A must be degenerate along exactly one axis (degenerate A)");
  if (h <= 0) throw std::invalid_argument("cylinder: h must be positive");
  if (static_cast<int>(v.size()) != d) throw std::invalid_argument("cylinder: v has wrong dimension");
  double norm = 0;
  for (double c : v) norm += c * c;
  if (std::fabs(std::sqrt(norm) - 1.0) > 1e-9) throw std::invalid_argument("cylinder: v must be a unit vector");
  if (std::fabs(v[j]) < 1e-12) throw std::invalid_argument("cylinder: v is parallel to A");
}

namespace {

bool exact_member(const CylinderSpec& cyl, int j, const Vertex& x, int64_t n) {
  const int d = cyl.A.dim();
  Rational t = Rational(x[j], n) - cyl.A.lo[j];
  if (t < 0) t = -t;
  if (t > cyl.h) return false;
  for (int k = 0; k < d; ++k) {
    if (k == j) continue;
    Rational X = x[k];
    if (X < n * cyl.A.lo[k]) return false;
    if (cyl.half_open_base ? !(X < n * cyl.A.hi[k]) : X > n * cyl.A.hi[k]) return false;
  }
  return true;
}

struct FloatCyl {
  int d = 0, j = 0;
  std::vector<double> lo, hi, v;
  double h = 0;
  bool half_open = false;

  explicit FloatCyl(const CylinderSpec& c) : d(c.A.dim()), j(c.normal_axis()), v(c.v), half_open(c.half_open_base) {
    for (int k = 0; k < d; ++k) {
      lo.push_back(c.A.lo[k].convert_to<double>());
      hi.push_back(c.A.hi[k].convert_to<double>());
    }
    h = c.h.convert_to<double>();
  }

  bool contains(const std::vector<double>& p) const {
    double t = (p[j] - lo[j]) / v[j];
    if (std::fabs(t) > h + kTiltTolerance) return false;
    for (int k = 0; k < d; ++k) {
      if (k == j) continue;
      double q = p[k] - t * v[k];
      if (q < lo[k] - kTiltTolerance) return false;
      if (half_open ? q >= hi[k] - kTiltTolerance : q > hi[k] + kTiltTolerance) return false;
    }
    return true;
  }
};

}  // namespace

bool cylinder_contains(const CylinderSpec& cyl, const Vertex& x, int64_t n) {
  if (cyl.exact()) return exact_member(cyl, cyl.normal_axis(), x, n);
  std::vector<double> p(cyl.A.dim());
  for (int k = 0; k < cyl.A.dim(); ++k) p[k] = static_cast<double>(x[k]) / static_cast<double>(n);
  return FloatCyl(cyl).contains(p);
}

bool cylinder_contains_point(const CylinderSpec& cyl, const std::vector<double>& p) {
  return FloatCyl(cyl).contains(p);
}

CylinderSets cylinder_sets(const CylinderSpec& cyl, int64_t n) {
  cyl.validate();
  if (n < 1) throw std::invalid_argument("cylinder_sets: n must be >= 1");
  const int d = cyl.A.dim();
  const int j = cyl.normal_axis();
  const bool exact = cyl.exact();
  FloatCyl fc(cyl);

  std::vector<int64_t> lo(d), hi(d);
  for (int k = 0; k < d; ++k) {
    double a = std::min(fc.lo[k], fc.hi[k]) - fc.h * std::fabs(fc.v[k]);
    double b = std::max(fc.lo[k], fc.hi[k]) + fc.h * std::fabs(fc.v[k]);
    lo[k] = static_cast<int64_t>(std::floor(a * n)) - 1;
    hi[k] = static_cast<int64_t>(std::ceil(b * n)) + 1;
  }
  auto member = [&](const Vertex& x) {
    if (exact) return exact_member(cyl, j, x, n);
    std::vector<double> p(d);
    for (int k = 0; k < d; ++k) p[k] = static_cast<double>(x[k]) / static_cast<double>(n);
    return fc.contains(p);
  };

  CylinderSets out;
  out.exact = exact;
  for_each_point(d, lo, hi, [&](const Vertex& x) {
    if (member(x)) out.vertices.push_back(x);
  });
  std::sort(out.vertices.begin(), out.vertices.end());
  std::unordered_map<Vertex, int, VertexHash> in;
  for (size_t i = 0; i < out.vertices.size(); ++i) in.emplace(out.vertices[i], static_cast<int>(i));

  // Does the lattice segment [x, x + delta e_axis] meet A + shift * h * v?
  auto segment_hits = [&](const Vertex& x, int axis, int delta, int shift) {
    if (exact) {
      Rational off = cyl.h * (cyl.v[j] > 0 ? shift : -shift);
      for (int k = 0; k < d; ++k) {
        Rational blo = cyl.A.lo[k], bhi = cyl.A.hi[k];
        if (k == j) {
          blo += off;
          bhi += off;
        }
        Rational a = x[k], b = x[k];
        if (k == axis) (delta > 0 ? b : a) += delta;
        if (a > n * bhi || b < n * blo) return false;
      }
      return true;
    }
    for (int k = 0; k < d; ++k) {
      double blo = fc.lo[k] + shift * fc.h * fc.v[k];
      double bhi = fc.hi[k] + shift * fc.h * fc.v[k];
      double a = static_cast<double>(x[k]) / n, b = a;
      if (k == axis) (delta > 0 ? b : a) += static_cast<double>(delta) / n;
      if (a > bhi + kTiltTolerance || b < blo - kTiltTolerance) return false;
    }
    return true;
  };

  for (const Vertex& x : out.vertices) {
    bool boundary = false, top = false, bottom = false;
    for (int axis = 0; axis < d; ++axis) {
      for (int delta : {-1, 1}) {
        if (in.count(shifted(x, axis, delta))) continue;
        boundary = true;
        if (segment_hits(x, axis, delta, +1)) top = true;
        if (segment_hits(x, axis, delta, -1)) bottom = true;
      }
    }
    if (!boundary) continue;
    if (top) out.top.push_back(x);
    if (bottom) out.bottom.push_back(x);
    int side = 0;
    if (exact) {
      Rational s = Rational(x[j]) - n * cyl.A.lo[j];
      side = s > 0 ? 1 : (s < 0 ? -1 : 0);
      if (cyl.v[j] < 0) side = -side;
    } else {
      double dot = 0;
      for (int k = 0; k < d; ++k) {
        double z = k == j ? fc.lo[k] : 0.5 * (fc.lo[k] + fc.hi[k]);
        dot += (static_cast<double>(x[k]) / n - z) * fc.v[k];
      }
      side = dot > kTiltTolerance ? 1 : (dot < -kTiltTolerance ? -1 : 0);
    }
    if (side > 0) out.upper_half.push_back(x);
    if (side < 0) out.lower_half.push_back(x);
  }
  for (const Vertex& x : out.top) {
    if (std::binary_search(out.bottom.begin(), out.bottom.end(), x))
      throw std::invalid_argument("cylinder_sets: h too small, top and bottom sets overlap at n=" + std::to_string(n));
  }
  out.top_bottom = LatticeDomain(d, n, out.vertices, out.top, out.bottom);
  out.halves = LatticeDomain(d, n, out.vertices, out.upper_half, out.lower_half);
  return out;
}

// ---------------------------------------------------------------------------
// Faces and edge sets

Rational Face::area() const {
  Rational a = 1;
  for (size_t k = 0; k < lo.size(); ++k) {
    if (static_cast<int>(k) != axis) a *= hi[k] - lo[k];
  }
  return a;
}

std::string Face::describe() const {
  std::ostringstream os;
  os << "x" << axis + 1 << "=" << coord;
  for (size_t k = 0; k < lo.size(); ++k) {
    if (static_cast<int>(k) == axis) continue;
    os << " x" << k + 1 << "[" << lo[k] << "," << hi[k] << ")";
  }
  return os.str();
}

std::vector<EdgeId> boundary_edge_set(int axis, int sign, const Face& A, int64_t n) {
  if (A.axis != axis) throw std::invalid_argument("boundary_edge_set: face is not orthogonal to e_" + std::to_string(axis + 1));
  if (sign != 1 && sign != -1) throw std::invalid_argument("boundary_edge_set: sign must be +1 or -1");
  const int d = static_cast<int>(A.lo.size());
  std::vector<int64_t> lo(d), hi(d);
  int64_t xi = ceil_to_ll(n * A.coord) - (sign > 0 ? 1 : 0);
  for (int k = 0; k < d; ++k) {
    if (k == axis) {
      lo[k] = hi[k] = xi;
    } else {
      lo[k] = ceil_to_ll(n * A.lo[k]);
      hi[k] = ceil_to_ll(n * A.hi[k]) - 1;
    }
  }
  std::vector<EdgeId> out;
  for_each_point(d, lo, hi, [&](const Vertex& x) { out.push_back(EdgeId{x, axis}); });
  return out;
}

std::vector<Face> face_partition(int d, int axis, int sign, int m) {
  if (m < 1) throw std::invalid_argument("face_partition: m must be >= 1");
  std::vector<Face> out;
  std::vector<int64_t> lo(d, 0), hi(d, m - 1);
  lo[axis] = hi[axis] = 0;
  for_each_point(d, lo, hi, [&](const Vertex& cell) {
    Face f;
    f.axis = axis;
    f.coord = Rational(sign, 2);
    f.lo.assign(d, 0);
    f.hi.assign(d, 0);
    for (int k = 0; k < d; ++k) {
      if (k == axis) {
        f.lo[k] = f.hi[k] = f.coord;
      } else {
        f.lo[k] = Rational(-1, 2) + Rational(cell[k], m);
        f.hi[k] = f.lo[k] + Rational(1, m);
      }
    }
    out.push_back(f);
  });
  return out;
}

std::vector<EdgeId> sparse_edge_set(int d, int K, const std::vector<int64_t>& lo, const std::vector<int64_t>& hi) {
  if (K < 1) throw std::invalid_argument("sparse_edge_set: K must be >= 1");
  auto on_grid = [K](int64_t c) { return ((c % K) + K) % K == 0; };
  std::vector<EdgeId> out;
  for_each_point(d, lo, hi, [&](const Vertex& w) {
    for (int axis = 0; axis < d; ++axis) {
      bool ok = true;
      for (int k = 1; k < d && ok; ++k) {
        if (k != axis && !on_grid(w[k])) ok = false;
      }
      if (ok) out.push_back(EdgeId{w, axis});
    }
  });
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<EdgeId> sparse_edge_set(int d, int K, int64_t n) {
  std::vector<int64_t> lo(d, 1), hi(d, n);
  lo[0] = 0;
  hi[0] = n - 1;
  return sparse_edge_set(d, K, lo, hi);
}

bool in_unit_cube(const Vertex& x, int d, int64_t n) {
  for (int j = 0; j < d; ++j) {
    if (2 * x[j] < -n || 2 * x[j] >= n) return false;
  }
  return true;
}

std::vector<Vertex> cube_vertices(int d, int64_t n) {
  int64_t a = -(n / 2);  // ceil(-n/2)
  int64_t b = (n + 1) / 2 - 1;  // ceil(n/2) - 1
  std::vector<Vertex> out;
  for_each_point(d, std::vector<int64_t>(d, a), std::vector<int64_t>(d, b), [&](const Vertex& x) { out.push_back(x); });
  return out;
}

std::vector<EdgeId> cube_edges(int d, int64_t n) {
  std::vector<EdgeId> out;
  for (const Vertex& x : cube_vertices(d, n)) {
    for (int j = 0; j < d; ++j) out.push_back(EdgeId{x, j});
  }
  return out;
}

Region::Region(std::vector<RBox> half_open_boxes) : boxes_(std::move(half_open_boxes)) {
  if (boxes_.empty()) throw std::invalid_argument("region: at least one box required");
  for (const RBox& b : boxes_) {
    if (b.dim() != boxes_.front().dim()) throw std::invalid_argument("region: mixed dimensions");
  }
}

Region Region::unit_cube(int d) {
  return Region({unit_cube_box(d)});
}

bool Region::contains(const Vertex& x, int64_t n) const {
  for (const RBox& b : boxes_) {
    bool in = true;
    for (int j = 0; j < b.dim() && in; ++j) {
      Rational X = x[j];
      if (X < n * b.lo[j] || !(X < n * b.hi[j])) in = false;
    }
    if (in) return true;
  }
  return false;
}

std::vector<Vertex> Region::vertices(int64_t n) const {
  const int dd = d();
  std::vector<Vertex> out;
  for (const RBox& b : boxes_) {
    std::vector<int64_t> lo(dd), hi(dd);
    for (int j = 0; j < dd; ++j) {
      lo[j] = ceil_to_ll(n * b.lo[j]);
      hi[j] = ceil_to_ll(n * b.hi[j]) - 1;
    }
    for_each_point(dd, lo, hi, [&](const Vertex& x) { out.push_back(x); });
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string format_vertex(const Vertex& x, int d) {
  std::string s;
  for (int j = 0; j < d; ++j) {
    if (j) s += ' ';
    s += std::to_string(x[j]);
  }
  return s;
}

void write_vertices(std::ostream& os, const std::vector<Vertex>& xs, int d) {
  for (const Vertex& x : xs) os << format_vertex(x, d) << '\n';
}

void write_edges(std::ostream& os, const std::vector<EdgeId>& es, int d) {
  for (const EdgeId& e : es) os << format_vertex(e.x, d) << ' ' << e.axis + 1 << '\n';
}

}  // namespace fpp
