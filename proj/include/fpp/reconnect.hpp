#pragma once

#include "fpp/lattice.hpp"
#include "fpp/stream.hpp"

#include <string>
#include <vector>

namespace fpp {

// ---------------------------------------------------------------------------------------------------------------
// Decomposition into oriented paths

template <class S>
struct OrientedPath {
  std::vector<Vertex> vertices;  // x_1, ..., x_{r+1}
  S weight{0};
};

// Peels self-avoiding terminal-to-terminal paths off f. Throws std::invalid_argument when the node law fails off
// the terminals and std::runtime_error when a circulation is left over.
template <class S>
std::vector<OrientedPath<S>> decompose(const Stream<S>& f, const LatticeDomain& L);

// sum_gamma p(gamma) * (unit stream of gamma)
template <class S>
Stream<S> path_sum(const std::vector<OrientedPath<S>>& paths, int d, int64_t n);

// ---------------------------------------------------------------------------------------------------------------
// Mixing. All mixing streams live on Z^d (scale 1); axis 0 is the flow direction and the transverse index
// y in {1..n}^{d-1} addresses the lines <(x, y), (x+1, y)>.

// Values on {1..n}^k, first coordinate slowest.
template <class S>
struct Family {
  int k = 1;
  int64_t n = 0;
  std::vector<S> values;

  Family() = default;
  Family(int dims, int64_t side, const S& fill = S{0});

  size_t size() const { return values.size(); }
  S& operator[](size_t i) { return values[i]; }
  const S& operator[](size_t i) const { return values[i]; }
  size_t index(const std::vector<int64_t>& y) const;
  std::vector<int64_t> point(size_t idx) const;  // 1-based coordinates
  S sum() const;
};

// Invariant checks of the planar mix after each rerouting step.
struct Mix2dTrace {
  int steps = 0;
  int checks = 0;
  std::vector<std::string> failures;
  bool ok() const { return failures.empty(); }
};

// Planar mix on [0,n) x [1,n]. Source i reroutes through column n - rank(i), rank among the above-mean sources,
// and the uniform outputs sit on the edges <(n-1, j), (n, j)>.
template <class S>
Stream<S> mix2d(const std::vector<S>& f_in, const S& M, Mix2dTrace* trace = nullptr);

// Mix on [0,m) x [1,n]^{d-1}: inputs on x_1 = 0 edges, outputs on x_1 = m-1 edges. Needs m >= 2(d-1)n, or
// m >= (d-1)n when every output equals the input mean.
template <class S>
Stream<S> mix(const Family<S>& f_in, const Family<S>& f_out, int64_t m, const S& M);

// Mix on the K-sublattice. f_in and f_out are indexed by the coarse points y' in {1..floor(n/K)}^{d-1}; the fine line is K y'.
template <class S>
Stream<S> mix_sparse(const Family<S>& f_in, const Family<S>& f_out, int64_t n, int K, const S& M);

// Mix with one-sided input bounds on [0,(d-1)n) x [1,n]^{d-1} with uniform outputs.
template <class S>
Stream<S> mix_precise(const Family<S>& f_in, const S& M, const S& eps);

// Checks the prefix condition of mix_precise; returns -1 when it holds, else the first failing level.
template <class S>
int precise_prefix_failure(const Family<S>& f_in, const S& eps);

// Postconditions shared by the mixing routines.
template <class S>
struct MixSpec {
  int64_t length = 0;          // support [0, length) along axis 0
  int64_t n = 0;               // transverse range [1, n]
  int K = 1;                   // support restricted to E_K^d when K > 1
  Family<S> inputs, outputs;   // on the K-sublattice when K > 1 (coarse indices)
  S axis_lo{0}, axis_hi{0};    // bounds on the axis-0 components
  S transverse_bound{0};       // bound on |f(e)| for transverse edges
  double support_cap = -1;     // |support| <= support_cap when >= 0
};

struct MixReport {
  std::vector<std::string> failures;
  size_t support = 0;
  bool ok() const { return failures.empty(); }
};

template <class S>
MixReport verify_mix(const Stream<S>& f, const MixSpec<S>& spec);

// ---------------------------------------------------------------------------------------------------------------
// Quantization, face fluxes and face balancing

// sign(t) sqrt(eps) floor(|t| / sqrt(eps))
double quantize(double t, double eps);

double mesoscopic_alpha(int d);                                   // 1 / (2(3d+1))
int mesoscopic_m(double eps, int d);                              // floor(eps^-alpha)
int balance_K(double eps, int d, double kappa = 1.0);             // floor((1 / (2 kappa eps^{alpha/2}))^{1/(d-1)})
double well_behaved_damping(double eps, int d);                   // 1 - eps^{alpha/4}

// Face cells of an axis-parallel cube Q: each face split into m^{d-1} cells, in face_partition order.
std::vector<Face> cube_face_cells(const RBox& Q, int axis, int sign, int m);

// psi_i^sign per face cell, slot 2*axis + (sign > 0).
template <class S>
struct FaceFluxes {
  int d = 2;
  int m = 1;
  std::vector<std::vector<S>> v;

  FaceFluxes() = default;
  FaceFluxes(int dim, int cells_per_side);
  static int slot(int axis, int sign) { return 2 * axis + (sign > 0 ? 1 : 0); }
  std::vector<S>& face(int axis, int sign) { return v[slot(axis, sign)]; }
  const std::vector<S>& face(int axis, int sign) const { return v[slot(axis, sign)]; }
  S total(int sign) const;
};

template <class S>
FaceFluxes<S> measure_face_fluxes(const Stream<S>& f, const RBox& Q, int m);

// damping * (s v . e_i) * H^{d-1}(cell) * n^{d-1} for every cell.
template <class S>
FaceFluxes<S> well_behaved_targets(const RBox& Q, int m, int64_t n, const std::vector<S>& sv, const S& damping);

// Exact for Rational, 1e-9 relative for double.
template <class S>
bool is_well_behaved(const Stream<S>& f, const RBox& Q, int m, const std::vector<S>& sv, const S& damping);

// Face balancing: a residual stream inside Q whose face fluxes are beta - lambda. Throws std::invalid_argument when
// the + and - totals of beta - lambda differ, K < 2(d-1), or a cell with nonzero correction has no sublattice line.
template <class S>
Stream<S> balance_faces(const FaceFluxes<S>& lambda, const FaceFluxes<S>& beta, const RBox& Q, int64_t n, int K);

template <class S>
Stream<S> balance_faces(const Stream<S>& f, const FaceFluxes<S>& beta, const RBox& Q, int K);

// ---------------------------------------------------------------------------------------------------------------
// Corridor gluing

// QB = QA + gap e_l for one axis l. Each face cell of QA on its + side is joined to the facing cell of QB with
// one mix; the result equals fA on QA, fB on QB, and lives on the single box spanned by QA and QB.
// Inputs are the exit edges of A, outputs the net outflow of B at its entry vertices; per-cell sums must agree.
// Throws std::invalid_argument naming the cell otherwise, or when the corridor is shorter than 2(d-1)n' + 1
// layers for n' lattice lines per cell side.
template <class S>
Stream<S> glue_adjacent(const Stream<S>& fA, const Stream<S>& fB, const RBox& QA, const RBox& QB, int m, const S& M);

RBox glue_region(const RBox& QA, const RBox& QB);

}  // namespace fpp
