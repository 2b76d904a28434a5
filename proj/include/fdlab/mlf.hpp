#pragma once

#include <stdexcept>

namespace fdlab {

// Two-parameter Mittag-Leffler indices E_{beta1,beta2}.
struct MLParams {
  double beta1;
  double beta2;
  void validate() const {
    if (!(beta1 > 0.0) || !(beta2 > 0.0))
      throw std::invalid_argument("MLParams: both indices must be positive");
  }
};

// Fractional relaxation kernel query: t^(alpha-1) E_{alpha,alpha}(-lambda t^alpha).
struct KernelQuery {
  double alpha;
  double lambda;
  double t;
  void validate() const {
    if (!(alpha > 0.0 && alpha < 2.0))
      throw std::invalid_argument("KernelQuery: alpha must lie in (0,2)");
    if (!(lambda > 0.0))
      throw std::invalid_argument("KernelQuery: lambda must be positive");
    if (!(t > 0.0))
      throw std::invalid_argument("KernelQuery: t must be positive");
  }
};

// Which evaluation path ml_eval takes. The switch is internal; this is
// exposed so tests and reports can record path coverage.
enum class MLRegime {
  zero_arg,      // z == 0, single Gamma term
  exponential,   // beta1 == beta2 == 1 closed form
  series,        // power series, cancellation within budget
  integral,      // real-line integral representation (0 < beta1 < 1, z < 0)
  contour,       // parabolic Bromwich contour plus pole residues (beta1 > 1)
  asymptotic,    // algebraic expansion, plus pole-pair residue for beta1 > 1
};

MLRegime ml_regime(const MLParams& params, double z);

// E_{beta1,beta2}(z) on the real line. Relative accuracy target 1e-10 away
// from zeros of E. Throws std::overflow_error when the value exceeds double
// range (large positive z). The one unsupported corner is beta1 == 1 with
// beta2 != 1 on the mid negative axis (contour regime): the resolvent pole
// sits on the branch cut there and ml_eval throws std::domain_error; no
// caller in this codebase hits that corner.
double ml_eval(const MLParams& params, double z);

// t^(alpha-1) E_{alpha,alpha}(-lambda t^alpha); exp(-lambda t) at alpha = 1.
// Positivity is a theorem for alpha <= 1 (complete monotonicity) and is
// enforced; for 1 < alpha < 2 the kernel oscillates and no sign is asserted.
double relaxation_kernel(const KernelQuery& q);

// Closed-form Laplace transform of the relaxation kernel: 1/(p^alpha + lambda).
double kernel_laplace(double alpha, double lambda, double p);

// Leading late-time flux model -t^(-1-alpha)/Gamma(-alpha) * amplitude.
// Returns exactly 0 at alpha = 1 (1/Gamma(-1) = 0 convention).
double asymptotic_flux_model(double alpha, double amplitude, double t);

}  // namespace fdlab
