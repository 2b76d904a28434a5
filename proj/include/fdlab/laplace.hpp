#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <functional>
#include <vector>

#include "fdlab/domain.hpp"
#include "fdlab/spectral.hpp"

namespace fdlab {

// Laplace transforms of boundary traces sampled on a positive p-grid.
// p_floor records the smallest admissible p for the generating problem
// (0 in the self-adjoint case, the drift coercivity bound otherwise).
struct LaplaceSamples {
  std::vector<double> p_values;        // strictly increasing, positive
  std::vector<int> nodes;              // observation node ids
  Eigen::MatrixXd values;              // p x node
  Eigen::MatrixXd tail_bounds;         // certified truncation bound per entry
  double p_floor = 0.0;
};

struct TransformOptions {
  // truncation certificate: the bound must stay below this fraction of the
  // transform magnitude, else the transform refuses
  double certify_rel = 1e-12;
  // extend the integral past the horizon by a power-law fit of the last
  // half-decade of samples instead of the plain decay envelope
  bool power_tail = false;
};

// Quadrature of e^(-pt) trace(t) over the sampled horizon via exact cubic
// spline moments, with a certified bound on the discarded tail.
LaplaceSamples transform(const TimeTrace& trace,
                         const std::vector<double>& p_values,
                         const TransformOptions& opt = {});

// Smallest admissible p for the Laplace-domain problem: zero without drift,
// ((max|B|^2 + 1) / min rho)^(1/alpha) with it.
double p_floor(const DiscreteOperator& op, double alpha);

// (A + rho p^alpha) V = C g + source, factored once for a fixed p so many
// boundary data can be pushed through (the DtN map evaluates this way).
class ResolventFactor {
 public:
  ResolventFactor(const DiscreteOperator& op, double alpha, double p);
  Eigen::VectorXd solve(const Eigen::VectorXd& g_border,
                        const Eigen::VectorXd& source = Eigen::VectorXd()) const;
  double p() const { return p_; }

 private:
  const DiscreteOperator* op_;
  double p_;
  Eigen::SparseLU<SpMat> lu_;
};

// one-shot resolvent solve
Eigen::VectorXd resolvent_solve(const DiscreteOperator& op, double alpha,
                                double p, const Eigen::VectorXd& g_border,
                                const Eigen::VectorXd& source = Eigen::VectorXd());

// boundary flux of a Laplace-domain field (boundary values restored from the
// Dirichlet data before the one-sided stencil is applied)
std::vector<double> resolvent_flux(const DiscreteOperator& op,
                                   const Eigen::VectorXd& V,
                                   const Eigen::VectorXd& g_border,
                                   const std::vector<int>& where);

// Sector contour through the resolvent: a circle of radius delta around the
// origin joined to two rays at angle +-theta1, counterclockwise, shifted by
// r1. delta = 0 picks 1/z per call (nudged off the pole radius when the
// symbol has poles in the sector).
struct ContourSpec {
  double r1 = 0.0;
  double theta1 = 2.35619449019234492885;  // 3 pi / 4
  double delta = 0.0;
  double quad_abs = 1e-13;
  double quad_rel = 1e-11;
  void validate() const;
};

// (1/2 pi i) int_gamma e^(zp) / (p^alpha + lambda) dp: the per-mode scalar
// realization of the solution operator. Agrees with relaxation_kernel.
double contour_kernel(const ContourSpec& spec, double alpha, double lambda,
                      double z);

// Data entering the Laplace-domain characterization of a forward run:
// Dirichlet values per Gamma_in input index, source modulation with packed
// shape, and packed initial state. Null / empty members mean absent.
struct WeakForm {
  std::function<double(double, int)> bvalue;
  std::function<double(double)> sigma;
  Eigen::VectorXd fhat;
  Eigen::VectorXd u0;
};

// Relative residual of (A + rho p^alpha) U(p) = C ghat + sigmahat fhat +
// p^(alpha-1) rho u0 per requested p, with U(p) transformed from the full
// nodal history. The history must be settled by its horizon (inputs past
// their last bridge) for the analytic tail to be valid.
std::vector<double> weak_solution_residual(const DiscreteOperator& op,
                                           double alpha,
                                           const std::vector<double>& times,
                                           const Eigen::MatrixXd& nodal,
                                           const WeakForm& wf,
                                           const std::vector<double>& p_values,
                                           const TransformOptions& opt = {});

}  // namespace fdlab
