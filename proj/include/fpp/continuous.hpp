#pragma once

#include "fpp/lattice.hpp"
#include "fpp/measure.hpp"

#include <functional>
#include <string>
#include <vector>

namespace fpp {

struct FieldCell {
  RBox box;  // half-open
  std::vector<Rational> value;
};

// Piecewise-constant vector field on disjoint half-open boxes; zero elsewhere.
struct ContinuousField {
  int d = 2;
  std::vector<FieldCell> cells;
  Rational M = 1;

  void validate() const;
  std::vector<Rational> value_at(const std::vector<Rational>& p) const;
  VectorMeasure measure() const;  // sigma * Lebesgue
  ContinuousField scaled(const Rational& c) const;
};

ContinuousField constant_field(const RBox& box, const std::vector<Rational>& v, const Rational& M);

// a*f + b*g on the common refinement of both meshes.
ContinuousField combine(const ContinuousField& f, const Rational& a, const ContinuousField& g, const Rational& b);

// L1 norm of f - g, exact on the common refinement; the Euclidean norm of each cell value is taken in double.
double l1_distance(const ContinuousField& f, const ContinuousField& g);

// -int_{Gamma1} sigma . n_Omega, using the trace from the inside of the region.
Rational flow_cont(const ContinuousField& sigma, const DomainSpec& spec, const std::vector<RBox>& gamma);
Rational flow_cont(const ContinuousField& sigma, const DomainSpec& spec);

struct FieldFace {
  int axis = 0;
  std::vector<Rational> lo, hi;  // lo[axis] == hi[axis]
  Rational jump;                 // normal component after minus before
};

struct DivergenceReport {
  bool interior_ok = true;  // normal component continuous across interfaces inside the region
  bool lateral_ok = true;   // sigma . n = 0 on the boundary outside Gamma1 and Gamma2
  bool support_ok = true;   // sigma = 0 outside the region
  std::vector<FieldFace> interior_violations, lateral_violations, support_violations;

  bool ok() const { return interior_ok && lateral_ok && support_ok; }
  std::string summary() const;
};

DivergenceReport check_divergence_free(const ContinuousField& sigma, const DomainSpec& spec);

// sigma * K_p sampled at cell centres of a mesh of side 1/(4p), K_p(x) = p^d eta(p x) with eta the normalised
// bump exp(-1/(1-|x|^2)). Midpoint quadrature with 8 nodes per axis across the kernel support; weights are
// normalised to sum 1. Components are clipped to [-M, M].
ContinuousField mollify(const ContinuousField& sigma, int p);

// sum over cells of I(value) * volume.
double rate_integral(const ContinuousField& sigma, const std::function<double(const std::vector<double>&)>& rate);

}  // namespace fpp
