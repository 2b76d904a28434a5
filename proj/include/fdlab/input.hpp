#pragma once

#include <utility>
#include <vector>

namespace fdlab {

// Boundary excitation built as a staircase of smooth steps: component k
// switches on during the bridge interval [t_{2k-2}, t_{2k-1}] and then holds
// its plateau c_k. The switch times accumulate geometrically toward tau2, so
// on (0, t_{2k}) only the first k components are active. Component 1 is the
// special one: its plateau is zero, so it is a compactly supported bump with
// unit time integral (before the d_1 weight), and its boundary profile eta_1
// keeps one sign.
struct ScheduleSpec {
  double tau1 = 0.25;
  double tau2 = 1.0;
  int components = 1;          // K
  int profile_nodes = 1;       // number of boundary nodes carrying the input
  double plateau = 1.0;        // c_k for k >= 2 (c_1 is always 0)

  void validate() const;
};

class ExcitationSchedule {
 public:
  explicit ExcitationSchedule(const ScheduleSpec& spec);

  int components() const { return k_; }
  int profile_nodes() const { return static_cast<int>(chi_.size()); }
  double tau1() const { return tau1_; }
  double tau2() const { return tau2_; }

  // t_j = tau2 - (tau2 - tau1) * 2^(-j), j >= 0
  double step_time(int j) const;

  // plateau value c_k; c_1 = 0
  double plateau(int k) const;

  // weight d_k = 2^(-k) / (1 + W3 norm estimate of psi_k)
  double weight(int k) const;

  // psi_k(t): 0 up to t_{2k-2}, c_k from t_{2k-1} on, mollifier bridge in
  // between; k = 1 is the unit-mass bump on [t_0, t_1]
  double psi(int k, double t) const;

  // profile eta_k at a Gamma_in node, unit discrete norm; eta_1 >= 0
  double eta(int k, int node) const;

  // cutoff chi at a Gamma_in node: 1 on the central stretch, smooth rolloff
  double chi(int node) const;

  // full input at (t, node): sum_k d_k psi_k(t) chi eta_k
  double value(double t, int node) const;
  // single component d_k psi_k(t) chi eta_k
  double component_value(int k, double t, int node) const;

  // (0, t_{2k}): the window where components > k have not yet switched on;
  // k = 0 gives the quiescent window (0, tau1)
  std::pair<double, double> window_of(int k) const;

  // sup-norm estimate of max(|psi_k|, |psi_k'|, |psi_k''|, |psi_k'''|),
  // sampled across the bridge
  double w3_norm(int k) const;

 private:
  int k_ = 0;
  double tau1_ = 0.0, tau2_ = 0.0;
  double bump_scale_ = 1.0;          // normalizes the k=1 bump to unit mass
  std::vector<double> plateaus_;     // c_1..c_K
  std::vector<double> weights_;      // d_1..d_K
  std::vector<double> w3_;           // cached norm estimates
  std::vector<double> chi_;          // cutoff per node
  std::vector<std::vector<double>> eta_;  // K unit profiles
};

}  // namespace fdlab
