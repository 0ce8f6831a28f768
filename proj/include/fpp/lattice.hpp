#pragma once

#include "fpp/scalar.hpp"

#include <array>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace fpp {

constexpr int kMaxDim = 4;

// Lattice point of Z^d/n stored as n*x.
struct Vertex {
  std::array<int64_t, kMaxDim> c{};

  int64_t& operator[](int i) { return c[i]; }
  int64_t operator[](int i) const { return c[i]; }
  auto operator<=>(const Vertex&) const = default;
};

Vertex shifted(Vertex x, int axis, int64_t delta);

// Edge <x, x + e_axis/n>; axis is 0-based in memory, 1-based in files.
struct EdgeId {
  Vertex x;
  int axis = 0;

  Vertex head() const { return shifted(x, axis, 1); }
  auto operator<=>(const EdgeId&) const = default;
};

struct VertexHash {
  size_t operator()(const Vertex& v) const;
};
struct EdgeHash {
  size_t operator()(const EdgeId& e) const;
};

// Axis box with rational corners. Closed or half-open depending on context.
struct RBox {
  std::vector<Rational> lo, hi;

  int dim() const { return static_cast<int>(lo.size()); }
  Rational volume() const;
};

RBox make_box(const std::vector<Rational>& lo, const std::vector<Rational>& hi);
RBox unit_cube_box(int d);  // [-1/2, 1/2)^d

struct DomainSpec {
  int d = 2;
  std::vector<RBox> region;  // open boxes
  std::vector<RBox> gamma1;  // (d-1)-faces, one degenerate axis each
  std::vector<RBox> gamma2;

  void validate() const;
};

// Unit square (0,1)^d with source on {x_1 = 0} and sink on {x_1 = 1}.
DomainSpec unit_square_spec(int d);

enum VertexFlag : uint8_t { kBoundary = 1, kSource = 2, kSink = 4 };

class LatticeDomain {
 public:
  LatticeDomain() = default;
  // Boundary flags are recomputed from the vertex set; sources/sinks are given.
  LatticeDomain(int d, int64_t n, std::vector<Vertex> vertices, const std::vector<Vertex>& sources,
                const std::vector<Vertex>& sinks);

  int d() const { return d_; }
  int64_t n() const { return n_; }
  const std::vector<Vertex>& vertices() const { return vertices_; }
  size_t size() const { return vertices_.size(); }

  int index_of(const Vertex& x) const;
  bool contains(const Vertex& x) const { return index_of(x) >= 0; }
  uint8_t flags(int idx) const { return flags_[idx]; }
  bool is_boundary(int idx) const { return flags_[idx] & kBoundary; }
  bool is_source(int idx) const { return flags_[idx] & kSource; }
  bool is_sink(int idx) const { return flags_[idx] & kSink; }
  bool is_terminal(int idx) const { return flags_[idx] & (kSource | kSink); }
  bool is_terminal(const Vertex& x) const;

  std::vector<Vertex> boundary() const;
  std::vector<Vertex> sources() const;
  std::vector<Vertex> sinks() const;

  // Both endpoints in Omega_n and not both in the source/sink union.
  bool edge_allowed(const EdgeId& e) const;
  std::vector<EdgeId> edges() const;

 private:
  int d_ = 0;
  int64_t n_ = 1;
  std::vector<Vertex> vertices_;
  std::vector<uint8_t> flags_;
  std::unordered_map<Vertex, int, VertexHash> index_;
};

LatticeDomain discretize_domain(const DomainSpec& spec, int64_t n);

// d_inf(X/n, closed box) < 1/n, evaluated exactly.
bool within_one_step(const Vertex& x, int d, int64_t n, const RBox& box);

// cyl(A, h, v) = {a + t v : a in A, |t| <= h}; A is degenerate along exactly one axis.
struct CylinderSpec {
  RBox A;
  Rational h;
  std::vector<double> v;
  bool half_open_base = false;  // transverse extents [lo, hi) instead of [lo, hi]

  int normal_axis() const;
  bool exact() const;  // v = +-e_normal
  void validate() const;
};

constexpr double kTiltTolerance = 1e-9;

bool cylinder_contains(const CylinderSpec& cyl, const Vertex& x, int64_t n);
bool cylinder_contains_point(const CylinderSpec& cyl, const std::vector<double>& p);

struct CylinderSets {
  std::vector<Vertex> vertices;
  std::vector<Vertex> top, bottom;            // T, B
  std::vector<Vertex> upper_half, lower_half;  // T', B'
  LatticeDomain top_bottom;                    // sources T, sinks B
  LatticeDomain halves;                        // sources T', sinks B'
  bool exact = true;
};

CylinderSets cylinder_sets(const CylinderSpec& cyl, int64_t n);

// (d-1)-face orthogonal to e_axis at x_axis = coord, transverse extents [lo_k, hi_k).
struct Face {
  int axis = 0;
  Rational coord;
  std::vector<Rational> lo, hi;  // full length d; entries at `axis` ignored

  Rational area() const;
  std::string describe() const;
};

std::vector<EdgeId> boundary_edge_set(int axis, int sign, const Face& A, int64_t n);
std::vector<Face> face_partition(int d, int axis, int sign, int m);

// E_K^d restricted to left endpoints in the inclusive integer box [lo, hi], scale 1.
std::vector<EdgeId> sparse_edge_set(int d, int K, const std::vector<int64_t>& lo, const std::vector<int64_t>& hi);
// Paper-scale box [0,n) x [1,n]^{d-1}.
std::vector<EdgeId> sparse_edge_set(int d, int K, int64_t n);

// Vertices / edges of the unit cube [-1/2,1/2)^d at scale n (edges by left endpoint).
bool in_unit_cube(const Vertex& x, int d, int64_t n);
std::vector<Vertex> cube_vertices(int d, int64_t n);
std::vector<EdgeId> cube_edges(int d, int64_t n);

// Membership predicate over Z^d/n backed by half-open rational boxes.
class Region {
 public:
  Region() = default;
  explicit Region(std::vector<RBox> half_open_boxes);
  static Region unit_cube(int d);

  int d() const { return boxes_.empty() ? 0 : boxes_.front().dim(); }
  const std::vector<RBox>& boxes() const { return boxes_; }
  bool contains(const Vertex& x, int64_t n) const;
  // Lattice points of the region at scale n, sorted.
  std::vector<Vertex> vertices(int64_t n) const;

 private:
  std::vector<RBox> boxes_;
};

std::string format_vertex(const Vertex& x, int d);
void write_vertices(std::ostream& os, const std::vector<Vertex>& xs, int d);
void write_edges(std::ostream& os, const std::vector<EdgeId>& es, int d);

}  // namespace fpp
