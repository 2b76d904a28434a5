#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <vector>

namespace fdlab {

using SpMat = Eigen::SparseMatrix<double>;

// Outer-boundary side masks for assigning Gamma_in / Gamma_out.
enum Side : unsigned {
  kLeft = 1u,
  kRight = 2u,
  kBottom = 4u,
  kTop = 8u,
  kAllSides = 15u,
};

struct DomainSpec {
  int dim = 1;
  int nx = 64, ny = 1;        // cells per axis; nodes are nx+1 (ny+1)
  double lx = 1.0, ly = 1.0;
  // axis-aligned obstacle box in physical coordinates; empty when ox0 >= ox1
  double ox0 = 1.0, ox1 = 0.0, oy0 = 1.0, oy1 = 0.0;
  // free-form obstacle override (x, y) -> inside; wins over the box if set
  std::function<bool(double, double)> mask_fn;
  unsigned gamma_in = kLeft;
  unsigned gamma_out = kRight;
};

// Structured interval / rectangle with an interior obstacle mask. The fluid
// region is the set of interior nodes outside the obstacle; its edge
// connectivity is verified at construction by flood fill. The solution is
// pinned to zero on obstacle nodes, so they never become unknowns.
struct GridDomain {
  int dim = 1;
  int nx = 0, ny = 0;
  double hx = 0.0, hy = 0.0;
  std::vector<char> obstacle;      // per node, 1 inside the obstacle
  std::vector<int> gamma_in;       // outer boundary node ids
  std::vector<int> gamma_out;
  std::vector<int> fluid;          // unknown node ids, lexicographic
  std::vector<int> unknown_of;     // node id -> unknown index, -1 otherwise

  int node_count() const { return (nx + 1) * (dim == 2 ? ny + 1 : 1); }
  int node(int i, int j = 0) const { return j * (nx + 1) + i; }
  double x_of(int id) const { return (id % (nx + 1)) * hx; }
  double y_of(int id) const { return dim == 2 ? (id / (nx + 1)) * hy : 0.0; }
  bool on_outer(int id) const;
  double cell_volume() const { return dim == 2 ? hx * hy : hx; }
  // tangential measure carried by one boundary node (1 in 1D, the cell width
  // along the side in 2D)
  double boundary_weight(int id) const;

  // pack a full-grid field to the unknown vector / scatter it back; boundary
  // and obstacle values of the full field are left to the caller (obstacle
  // nodes are forced to zero on unpack)
  Eigen::VectorXd pack(const std::vector<double>& full) const;
  std::vector<double> unpack(const Eigen::VectorXd& u,
                             const std::vector<double>& boundary_full) const;
};

GridDomain build_domain(const DomainSpec& spec);

struct CoefficientField {
  std::vector<double> a;     // diffusion, per node
  std::vector<double> rho;   // density, per node
  std::vector<double> q;     // potential, per node
  std::vector<double> bx, by;  // drift components; empty when absent

  bool has_drift() const { return !bx.empty(); }
  // a > 0, q >= 0, rho bounded away from 0; reports offending node ids
  void validate(const GridDomain& dom) const;

  static CoefficientField constant(const GridDomain& dom, double a,
                                   double rho, double q);
  static CoefficientField from_functions(
      const GridDomain& dom,
      const std::function<double(double, double)>& a,
      const std::function<double(double, double)>& rho,
      const std::function<double(double, double)>& q);
};

// -div(a grad u) + B.grad u + q u on the fluid unknowns, centered second
// order, harmonic-mean face diffusion, Dirichlet rows eliminated. The
// boundary_coupling matrix maps outer-boundary nodal values to the interior
// right-hand side (it already carries the sign, rhs += coupling * g), and
// obstacle neighbors contribute their zero value, i.e. nothing.
struct DiscreteOperator {
  GridDomain dom;
  CoefficientField cf;           // kept for flux evaluation downstream
  int n = 0;                     // unknown count
  SpMat stiffness;               // symmetric part: -div(a grad) + q
  SpMat drift;                   // B.grad, zero-size when B absent
  Eigen::VectorXd mass;          // diagonal rho on unknowns
  SpMat boundary_coupling;       // n x border.size()
  std::vector<int> border;       // outer boundary node ids, fixed order
  bool has_drift = false;

  // (stiffness + drift) u - coupling * g, with g sampled on border order
  Eigen::VectorXd apply(const Eigen::VectorXd& u,
                        const Eigen::VectorXd& g) const;
  int border_index(int node_id) const;
};

DiscreteOperator assemble(const GridDomain& dom, const CoefficientField& cf);

// Outward a du/dnu at the requested outer-boundary nodes from the 3-point
// one-sided stencil (second order). Corner nodes are rejected in 2D.
std::vector<double> boundary_flux(const GridDomain& dom,
                                  const CoefficientField& cf,
                                  const std::vector<double>& field,
                                  const std::vector<int>& where);

// Flux in the discrete variational (summation by parts) sense,
// a_face (u_G - u_P) / h; first order pointwise but exactly adjoint to the
// assembled operator, which is what the spectral identities need.
std::vector<double> variational_flux(const GridDomain& dom,
                                     const CoefficientField& cf,
                                     const std::vector<double>& field,
                                     const std::vector<int>& where);

}  // namespace fdlab
