#pragma once

#include <Eigen/Dense>
#include <functional>
#include <utility>
#include <vector>

#include "fdlab/domain.hpp"
#include "fdlab/input.hpp"

namespace fdlab {

// First m generalized eigenpairs of (stiffness, mass), normalized in the
// volume-weighted rho inner product <u,v> = h^d sum rho u v. Flux traces are
// the variational boundary fluxes of the eigenvectors on the full outer
// border, which keeps the discrete Green identities exact.
struct SpectralDecomposition {
  std::vector<double> eigenvalues;     // ascending, positive
  Eigen::MatrixXd eigenvectors;        // n x m
  Eigen::MatrixXd flux_traces;         // border.size() x m
  int count = 0;
  std::vector<std::pair<int, int>> clusters;  // [begin,end) index ranges

  // carried over from the operator for projections
  Eigen::VectorXd mass;
  double vol = 0.0;                    // h^d
  std::vector<int> border;
  Eigen::VectorXd border_weights;      // tangential measure per border node
  std::vector<int> gamma_in, gamma_out;

  int border_index(int node_id) const;
  // <field, phi_k>_rho over unknowns (basis coefficients of a field)
  Eigen::VectorXd project_rho(const Eigen::VectorXd& u) const;
  // plain L2 projection h^d phi^T u (the source term enters with this one
  // when rho is not constant)
  Eigen::VectorXd project_plain(const Eigen::VectorXd& u) const;
  // b_k = sum_{G in gamma_in} profile(G) fluxtrace_k(G) w_G, the boundary
  // pairing that drives the Dirichlet input
  Eigen::VectorXd boundary_pairing(const std::vector<double>& profile) const;
};

enum class EigMethod { automatic, dense, lanczos };

// B = 0 only; the drift case lives entirely in the Laplace module.
SpectralDecomposition eigensolve(const DiscreteOperator& op, int m,
                                 EigMethod method = EigMethod::automatic);

// Stationary solve (stiffness + drift) u = coupling * g + f.
Eigen::VectorXd elliptic_solve(const DiscreteOperator& op,
                               const Eigen::VectorXd& g_border,
                               const Eigen::VectorXd& f = Eigen::VectorXd());

// Exact Parseval split of ||G||_rho^2 for the lift G of the boundary profile:
// head = sum_{k<=m} (b_k/lambda_k)^2, tail = ||G||_rho^2 - head. The tail is
// the part of the boundary coupling the retained modes cannot see.
std::pair<double, double> coupling_tail(const DiscreteOperator& op,
                                        const SpectralDecomposition& dec,
                                        const std::vector<double>& profile);

struct TimeTrace {
  std::vector<double> times;
  std::vector<int> observation_nodes;
  std::vector<std::vector<double>> values;  // [time][node]
};

struct ForwardRun {
  TimeTrace trace;
  Eigen::MatrixXd modal;     // m x nt coefficient histories
  Eigen::MatrixXd nodal;     // node_count x nt when requested, else empty
  double tail_head_ratio = 0.0;
  bool truncation_warning = false;
};

struct ForwardOptions {
  bool store_nodal = false;
  double quad_abs = 1e-12;
  double quad_rel = 1e-10;
};

// Spectral solution of the Dirichlet problem driven by the staircase input.
// component selects one input component (1-based) or all of them with 0.
// Modal coefficients follow the Duhamel form: c_k(t) is minus the boundary
// pairing times the convolution of the relaxation kernel with d_j psi_j.
ForwardRun forward_dirichlet(const DiscreteOperator& op,
                             const SpectralDecomposition& dec,
                             const ExcitationSchedule& sch, int component,
                             double alpha, const std::vector<double>& times,
                             const std::vector<int>& obs_nodes,
                             const ForwardOptions& opt = {});

// Source problem rho d_t^alpha u + A u = sigma(t) f with initial state u0
// (for 1 < alpha < 2 the extra initial condition d_t u(0) = 0 is implied by
// the representation). sigma is given with its support interval.
ForwardRun forward_source(const DiscreteOperator& op,
                          const SpectralDecomposition& dec,
                          const std::function<double(double)>& sigma,
                          double sig_lo, double sig_hi,
                          const std::vector<double>& f_full,
                          const std::vector<double>& u0_full, double alpha,
                          const std::vector<double>& times,
                          const std::vector<int>& obs_nodes,
                          const ForwardOptions& opt = {});

// Convolution of the relaxation kernel tau^(alpha-1) E_aa(-lambda tau^alpha)
// with a signal that is supp_lo/supp_hi supported and holds the constant
// plateau for arguments >= supp_hi. Used by both forward paths; exposed for
// oracle tests.
double duhamel(double alpha, double lambda,
               const std::function<double(double)>& signal, double supp_lo,
               double supp_hi, double plateau, double t, double quad_abs,
               double quad_rel);

}  // namespace fdlab
