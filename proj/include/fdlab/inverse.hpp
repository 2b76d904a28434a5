#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fdlab/domain.hpp"
#include "fdlab/input.hpp"
#include "fdlab/laplace.hpp"
#include "fdlab/spectral.hpp"

namespace fdlab {

// Laplace transform of the k-th input component's time signal d_k psi_k(t):
// quadrature over the bridge plus the exact plateau tail c_k e^(-p t)/p.
double input_signal_transform(const ExcitationSchedule& sch, int k, double p);

// Order recovery from the late-time flux tail. The power branch fits
// log|flux| against log t, so the slope is -(1 + alpha); the exponential
// branch fits log|flux| against t. Both are two-parameter fits on the same
// points, so the residual sums compare directly (equal-complexity Akaike
// rule) and the better one decides the branch. amplitude is the prefactor
// of t^(-1-alpha) in the fitted channel norm; the elliptic cross-check
// against the lifted stationary profile is left to the caller.
struct AlphaFit {
  double alpha_hat = 0.0;
  double ci_half = 0.0;      // 95% half width from the slope standard error
  double amplitude = 0.0;    // 0 on the exponential branch
  double r2_power = 0.0;
  double r2_exp = 0.0;
  double rss = 0.0;          // residual sum of the winning fit
  bool exponential = false;
  int points = 0;
};

// trace: Gamma_out flux response to the first (compact bump) component.
// The fit runs on the per-time l2 norm across the observation channels for
// t in [t_lo, t_hi]. tau2 > 0 enforces t_lo >= 10 tau2 (the empirical start
// of the asymptotic regime); samples below noise_floor are rejected.
AlphaFit recover_alpha(const TimeTrace& trace, double t_lo, double t_hi,
                       double tau2 = 0.0, double noise_floor = 1e-13);

// Discrete sign structure of the stationary comparison profile. The first
// component's boundary shape chi eta_1 keeps one sign; it is flipped to be
// non-positive, lifted to G by the stationary solve, and w solves the same
// operator with load rho G. The classical picture is w < 0 inside the fluid
// and outward flux a dnu w > 0 on the outer boundary; violations are
// reported, not thrown, since they indicate a too-coarse discretization.
struct HopfCheck {
  std::vector<int> where;         // outer boundary nodes (2D corners skipped)
  std::vector<double> flux;       // a dnu w there
  double w_max_interior = 0.0;    // should be < 0
  double flux_min = 0.0;          // should be > 0
  bool interior_negative = false;
  bool flux_positive = false;
  std::string note;
};

// chi_eta holds the boundary shape on the gamma_in nodes, in gamma_in
// order; the schedule overload fills it with the first component's profile.
HopfCheck hopf_check(const DiscreteOperator& op,
                     const std::vector<double>& chi_eta);
HopfCheck hopf_check(const DiscreteOperator& op, const ExcitationSchedule& sch);

// Pole fit of Laplace-domain flux samples: after dividing out the input
// transform, the data follows sum_k R_k(x) / (p^alpha + lambda_k), a
// rational function of s = p^alpha with real negative poles. The poles are
// the nonlinear unknowns; the residues are projected out linearly (variable
// projection). Starts come from AAA rational approximation per channel plus
// geometric knots of the s-grid, refined by Levenberg-Marquardt in log s.
struct SpectralFit {
  std::vector<double> lambda;     // ascending
  Eigen::MatrixXd residues;       // n_modes x channels
  double rel_residual = 0.0;      // ||data - model||_F / ||data||_F
  double cond = 0.0;              // basis condition at the optimum
  bool clustered = false;         // poles could not be separated
  std::vector<std::pair<int, int>> cluster_ranges;  // [begin,end) in lambda
  std::string note;
};

// input_hat divides the data rows (pass {} when the samples already sit in
// resolvent normalization); it must not vanish on the p-grid. n_modes <= 5:
// the basis conditioning degrades fast beyond that at this sampling scale.
// The optimizer carries a few buffer poles above the band so the spectral
// tail of the data does not bias the returned modes; rel_residual refers to
// the full internal model.
SpectralFit fit_spectral_data(const LaplaceSamples& samples, double alpha,
                              int n_modes = 3,
                              const std::function<double(double)>& input_hat = {});

// Which internal family the trace determines. With both unknown the source
// modulation must vanish on an initial window, so the early trace isolates
// the initial state and the source is fit on the remainder.
enum class SourceSplit {
  ic_only,      // source contribution absent from the trace
  source_only,  // initial state contribution absent
  time_split,   // sigma supported past sig_lo, fit in two stages
};

struct SourceRecovery {
  std::vector<double> ic_modes;      // <u0, phi_k> in the rho inner product
  std::vector<double> source_modes;  // plain L2 coefficients of f
  double ic_residual = 0.0;
  double source_residual = 0.0;
  double cond = 0.0;                 // worst design matrix condition kept
  int modes_used = 0;
  std::string note;
};

// Linear mode inversion of a source-problem flux trace against the known
// eigenpair responses: initial-state columns decay with the Mittag-Leffler
// factor, source columns carry the sigma convolution. Design matrices with
// condition beyond 1e8 are truncated mode by mode with a note.
SourceRecovery recover_sources(const DiscreteOperator& op,
                               const SpectralDecomposition& dec,
                               const TimeTrace& trace, double alpha,
                               const std::function<double(double)>& sigma,
                               double sig_lo, double sig_hi, SourceSplit split,
                               int n_modes = 5);

// Axis-aligned candidate obstacle box; x0 >= x1 (or y0 >= y1) stands for
// the empty obstacle.
struct ObstacleBox {
  double x0 = 1.0, x1 = 0.0, y0 = 1.0, y1 = 0.0;
};

struct ObstacleScanResult {
  std::vector<ObstacleBox> candidates;
  std::vector<double> objective;     // NaN where skipped
  std::vector<std::string> notes;    // skip reasons, empty otherwise
  int best = -1;                     // argmin over the evaluated candidates
  double best_objective = 0.0;
};

// Laplace-domain flux mismatch scan: each candidate box replaces the
// obstacle in the base spec, the resolvent is solved at the truth sample
// p-values with boundary data d_1 psihat_1(p) chi eta_1, and the objective
// is the boundary-weighted squared flux mismatch on the truth nodes summed
// over p. The coefficient field is sampled on the shared outer grid, so one
// field serves every candidate. Candidates touching the outer boundary are
// skipped with a note. The landscape itself is the deliverable; no descent.
ObstacleScanResult obstacle_scan(const DomainSpec& base,
                                 const CoefficientField& cf, double alpha,
                                 const ExcitationSchedule& sch,
                                 const std::vector<ObstacleBox>& candidates,
                                 const LaplaceSamples& truth);

struct DtnComparison {
  std::vector<double> p_values;
  Eigen::MatrixXd per_probe;             // p x probes
  std::vector<double> max_discrepancy;   // per p, over probes
};

// Partial Dirichlet-to-Neumann comparison: push each probe (values on the
// shared gamma_in list) through both resolvents and record the weighted l2
// flux discrepancy on gamma_out per p. With drift present the whole p-grid
// must sit above the coercivity floor of both operators.
DtnComparison dtn_compare(const DiscreteOperator& opA,
                          const DiscreteOperator& opB, double alpha,
                          const std::vector<double>& p_grid,
                          const std::vector<std::vector<double>>& probes);

struct WindowVerdict {
  double trace_norm = 0.0;    // sup over the window and channels
  double caputo_norm = 0.0;   // same for the L1 Caputo of the difference
  double tol = 0.0;
  bool distinguished = false;
  std::string note;
};

// Memory rigidity probe: sup norms of the trace difference and of its
// L1-discretized Caputo derivative on a late window (win_lo, win_hi) that
// must be disjoint from the input support (win_lo >= support_end). The
// Caputo history runs from t = 0, which is the point: with alpha < 1 the
// window still sees sources injected long before it.
WindowVerdict window_rigidity_experiment(const TimeTrace& a,
                                         const TimeTrace& b, double win_lo,
                                         double win_hi, double alpha,
                                         double support_end, double tol);

// One bundle per reconstruction run; each member carries its own residuals
// and diagnostics. validate() checks the recovered order is admissible.
struct InverseReport {
  AlphaFit alpha;
  SpectralFit spectral;
  SourceRecovery sources;
  ObstacleScanResult obstacle;
  void validate() const;
};

}  // namespace fdlab
