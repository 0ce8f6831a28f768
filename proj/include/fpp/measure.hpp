#pragma once

#include "fpp/lattice.hpp"

#include <limits>
#include <string>
#include <vector>

namespace fpp {

struct Atom {
  std::vector<Rational> point;
  std::vector<double> weight;
};

// Constant vector density on a half-open box.
struct DensityBox {
  RBox box;
  std::vector<double> value;
};

struct VectorMeasure {
  int d = 2;
  std::vector<Atom> atoms;
  std::vector<DensityBox> densities;

  void validate() const;
  bool empty() const { return atoms.empty() && densities.empty(); }
  VectorMeasure scaled(double c) const;
  VectorMeasure restricted(const RBox& half_open) const;
  double total_variation() const;
};

VectorMeasure operator+(const VectorMeasure& a, const VectorMeasure& b);
VectorMeasure operator-(const VectorMeasure& a, const VectorMeasure& b);

// Constant density v on a half-open box.
VectorMeasure density_measure(const RBox& box, const std::vector<double>& v);

std::vector<double> box_mass(const VectorMeasure& m, const RBox& half_open);

struct DistanceOptions {
  int K_max = 12;
  double rel_gap = 0.02;       // stop when upper - lower <= rel_gap * upper
  double abs_gap = 1e-12;
  size_t max_cells = 40000;    // evaluated parameter cells
  size_t batch = 32;           // cells refined per round; fixed so results do not depend on threads
  int threads = 1;
  double stop_below = -std::numeric_limits<double>::infinity();  // stop once upper <= this
  double stop_above = std::numeric_limits<double>::infinity();   // stop once lower >= this
};

struct DistanceBracket {
  double lower = 0;
  double upper = 0;
  int K_max = 12;
  std::string grid;
  size_t cells = 0;
  bool converged = false;
  double tv = 0;  // TV(mu - nu)
  std::vector<double> argmax_x;
  double argmax_lambda = 1;

  double gap() const { return upper - lower; }
};

DistanceBracket distance(const VectorMeasure& mu, const VectorMeasure& nu, const DistanceOptions& opts = {});

// Truncated sum sum_{k<=K} 2^-k sum_Q |(mu-nu)(Q)| at one (x, lambda); a lower bound for the distance.
double truncated_sum_at(const VectorMeasure& mu, const VectorMeasure& nu, const std::vector<double>& x, double lambda,
                        int K_max);

// Tables for a fixed signed measure sigma on the grid of its breakpoints.
// Atom positions are frozen at construction; weights may be replaced.
class DistanceEngine {
 public:
  explicit DistanceEngine(const VectorMeasure& sigma);

  int d() const { return d_; }
  double tv() const { return tv_dens_ + tv_atoms_; }
  double tv_density() const { return tv_dens_; }
  size_t atom_count() const { return atom_node_.size(); }

  // Replace the weights of the atoms, in construction order.
  void set_atom_weights(const std::vector<std::vector<double>>& w);

  // sigma([lo, hi)) for double coordinates.
  std::vector<double> mass(const double* lo, const double* hi) const;

  // Exact level sum S_k at a point, and the level sum bound over a parameter cell.
  double level_sum(const double* x, double lambda, int k) const;
  double level_bound(const double* x0, const double* x1, double l0, double l1, int k) const;

  double truncated_sum(const double* x, double lambda, int K) const;
  double cell_upper(const double* x0, const double* x1, double l0, double l1, int K) const;

 private:
  struct AxisFactor {
    int count = 0;
    int node[4];
    double w[4];
    int cnt_lo = 0, cnt_hi = 0;
    bool atoms = false;
  };

  void build_atom_tables();
  void density_factor(int axis, double lo, double hi, double scale, AxisFactor& f) const;
  void interval_factor(int axis, int t, double length, AxisFactor& f) const;
  void atom_factor(int axis, double lo, double hi, AxisFactor& f) const;
  double contract_abs(const std::vector<double>& table, const AxisFactor* f) const;
  void contract_vec(const std::vector<double>& table, const AxisFactor* f, double* out) const;
  double atom_abs(const AxisFactor* f) const;
  void atom_vec(const AxisFactor* f, double* out) const;
  double level_bound_impl(const double* x0, const double* x1, double l0, double l1, int k) const;

  int d_ = 2;
  std::vector<std::vector<double>> bp_;  // breakpoints per axis
  std::vector<size_t> node_stride_;     // strides over (nb) nodes
  std::vector<size_t> atom_stride_;     // strides over (nb + 1) prefix indices
  std::vector<double> dens_vec_;        // prefix of density, d components per node
  std::vector<double> dens_abs_;        // prefix of |density|
  std::vector<double> atom_vec_;        // prefix of atoms
  std::vector<double> atom_abs_;        // prefix of |atoms| after merging coincident ones
  std::vector<size_t> atom_node_;       // flat node index per atom
  std::vector<std::vector<double>> atom_w_;
  double tv_dens_ = 0;
  double tv_atoms_ = 0;
  double lo_ = 0, hi_ = 0;  // per-axis support hull, min/max over axes
};

}  // namespace fpp
