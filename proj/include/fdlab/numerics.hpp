#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fdlab {

// Gamma function on the real line, Lanczos approximation (g=7, n=9) with
// Euler reflection for x < 0.5. Poles at 0, -1, -2, ... raise domain_error;
// use rgamma() when the reciprocal (which is entire) is wanted.
double gamma_fn(double x);

// log|Gamma(x)| for x > 0.
double log_gamma(double x);

// 1/Gamma(x), entire: returns exactly 0 at the poles x = 0, -1, -2, ...
double rgamma(double x);

// sin(pi x) with argument reduction done in exact integer arithmetic, so the
// zeros at integers are exact. Needed by the reflection formulas.
double sin_pi(double x);

struct QuadResult {
  double value = 0.0;
  double abserr = 0.0;
  int evals = 0;
  bool converged = true;
};

// Adaptive Gauss-Kronrod 7/15 on [a,b], recursive bisection. The error
// estimate per panel is |K15 - G7|. Tolerances combine as
// max(abs_tol, rel_tol*|I|).
QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                     double abs_tol = 1e-12, double rel_tol = 1e-10,
                     int max_depth = 48);

// Golden-section minimizer on [a,b] for unimodal f; returns argmin.
double golden_min(const std::function<double(double)>& f, double a, double b,
                  double tol = 1e-10);

struct LinFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;  // coefficient of determination
  double rss = 0.0; // residual sum of squares
};

LinFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

// Natural cubic spline through (t_i, y_i), t strictly increasing.
class CubicSpline {
 public:
  CubicSpline() = default;
  CubicSpline(std::vector<double> t, std::vector<double> y);
  double operator()(double x) const;
  // integral of s(t)*exp(-p*t) over the full knot range, evaluated from the
  // exact per-interval polynomial moments (stable small-ph series switch)
  double laplace_integral(double p) const;
  const std::vector<double>& knots() const { return t_; }

 private:
  std::vector<double> t_, y_, c1_, c2_, c3_;  // per-interval poly coeffs
};

// moments M_j(h;p) = int_0^h tau^j exp(-p tau) dtau for j = 0..3
void exp_moments(double p, double h, double m[4]);

// FNV-1a 64-bit, used for output checksums in replay/determinism checks.
std::uint64_t fnv1a(const void* data, std::size_t n);
std::uint64_t fnv1a_file(const std::string& path);

}  // namespace fdlab
