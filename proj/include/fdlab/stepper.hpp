#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "fdlab/domain.hpp"
#include "fdlab/input.hpp"
#include "fdlab/spectral.hpp"

namespace fdlab {

// Marching solver for the memory equation with 0 < alpha <= 1, used as an
// independent check on the spectral path. The Caputo derivative is
// discretized by the classical L1 formula on an arbitrary increasing mesh
// (piecewise linear reconstruction under the t^(-alpha) kernel); alpha = 1
// collapses to backward Euler.
struct SteppingPlan {
  double alpha = 0.5;
  std::vector<double> times;  // t_0 = 0 < t_1 < ... < t_N

  static SteppingPlan uniform(double alpha, double dt, double horizon);
  // t_n = horizon (n/N)^(2/alpha): the grading that compensates the weak
  // solution singularity at t = 0 and restores the 2 - alpha rate
  static SteppingPlan graded(double alpha, double horizon, int steps);

  void validate() const;
  int levels() const { return static_cast<int>(times.size()); }

  // L1 row at level n: w[j] multiplies u^(j+1) - u^j for j < n. The weights
  // are positive and grow toward the current level on any increasing mesh
  // (the memory of the kernel fades monotonically); a violation throws.
  std::vector<double> history_weights(int n) const;
};

struct StepperOptions {
  bool store_nodal = false;
};

struct StepperRun {
  TimeTrace trace;        // boundary fluxes at every level
  Eigen::MatrixXd nodal;  // node_count x levels when requested, else empty
};

// Staircase Dirichlet drive from quiescent start. component = 0 runs the
// full schedule, otherwise the single component.
StepperRun step_dirichlet(const DiscreteOperator& op, const SteppingPlan& plan,
                          const ExcitationSchedule& sch, int component,
                          const std::vector<int>& obs_nodes,
                          const StepperOptions& opt = {});

// Source drive sigma(t) f with initial state u0, homogeneous boundary data.
// Unlike the spectral path this one accepts a drift term.
StepperRun step_source(const DiscreteOperator& op, const SteppingPlan& plan,
                       const std::function<double(double)>& sigma,
                       const std::vector<double>& f_full,
                       const std::vector<double>& u0_full,
                       const std::vector<int>& obs_nodes,
                       const StepperOptions& opt = {});

}  // namespace fdlab
