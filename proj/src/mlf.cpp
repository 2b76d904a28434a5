#include "fdlab/mlf.hpp"

#include <cmath>
#include <complex>
#include <limits>

#include "fdlab/numerics.hpp"

namespace fdlab {

namespace {

constexpr int kSeriesCap = 220;

// log of the largest series term magnitude, max_k |z|^k / Gamma(b1 k + b2).
// Cheap prescan used to predict cancellation loss before summing: for z < 0
// the sum is O(1) while terms can be astronomically large.
double series_log_max_term(double b1, double b2, double az) {
  if (az == 0.0) return -log_gamma(b2);
  double lz = std::log(az), best = -log_gamma(b2);
  for (int k = 1; k <= kSeriesCap; ++k) {
    double m = k * lz - log_gamma(b1 * k + b2);
    if (m > best) best = m;
    // terms are unimodal in k; once clearly past the peak, stop scanning
    if (m < best - 40.0) break;
  }
  return best;
}

// Kahan-compensated power series. Terms via logs so no intermediate
// overflow; signs alternate for z < 0.
double series_sum(double b1, double b2, double z) {
  double az = std::fabs(z);
  double sum = rgamma(b2), comp = 0.0;
  if (az == 0.0) return sum;
  double lz = std::log(az);
  int since_peak = 0;
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= kSeriesCap * 40; ++k) {
    double lt = k * lz - log_gamma(b1 * k + b2);
    double term = std::exp(lt);
    if (z < 0.0 && (k & 1)) term = -term;
    double y = term - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    double at = std::fabs(term);
    if (at == 0.0) return sum;  // underflow; every later term is smaller still
    if (at < prev) ++since_peak; else since_peak = 0;
    prev = at;
    if (at < 1e-18 * (std::fabs(sum) + 1e-300) && since_peak > 3) return sum;
  }
  throw std::runtime_error("ml_eval: series did not converge");
}

// Real-line integral representation for 0 < b1 < 1, z = -x < 0
// (Gorenflo/Loutchko/Luchko form):
//   E(-x) = int_0^inf K(r) dr,
//   K(r) = (1/(pi b1)) r^((1-b2)/b1) exp(-r^(1/b1))
//          * [r sin(pi(1-b2)) + x sin(pi(1-b2+b1))]
//          / (r^2 + 2 r x cos(pi b1) + x^2),
// valid here for b2 < 1 + b1.
double integral_rep(double b1, double b2, double x) {
  const double s1 = sin_pi(1.0 - b2);
  const double s2 = sin_pi(1.0 - b2 + b1);
  const double c = std::cos(M_PI * b1);
  auto K = [&](double r) -> double {
    double e = -std::pow(r, 1.0 / b1);
    if (e < -745.0) return 0.0;
    double num = r * s1 + x * s2;
    double den = r * r + 2.0 * r * x * c + x * x;
    return std::pow(r, (1.0 - b2) / b1) * std::exp(e) * num /
           (M_PI * b1 * den);
  };
  double rmax = std::pow(745.0, b1);
  // the denominator can pinch near r = x as b1 -> 1; keep that region in
  // its own panels
  double total = 0.0;
  double cuts[4] = {0.0, 0.5 * x, 2.0 * x, rmax};
  if (cuts[1] > rmax) { cuts[1] = 0.5 * rmax; cuts[2] = 0.75 * rmax; }
  else if (cuts[2] > rmax) { cuts[2] = 0.5 * (cuts[1] + rmax); }
  for (int i = 0; i < 3; ++i) {
    if (cuts[i + 1] <= cuts[i]) continue;
    QuadResult q = integrate(K, cuts[i], cuts[i + 1], 1e-14, 1e-11, 40);
    total += q.value;
  }
  return total;
}

// Algebraic expansion E(z) ~ -sum_{k>=1} z^{-k}/Gamma(b2 - b1 k) for large
// negative z, truncated at the smallest term (at most 60). Exact zeros from
// Gamma poles are skipped by the decrease guard (they carry no information
// about the tail). For 1 < b1 < 2 the conjugate pole pair of the resolvent
// contributes (2/b1) Re[e^{s} s^{1-b2}], s = x^{1/b1} e^{i pi/b1}, which
// decays like exp(-x^{1/b1} |cos(pi/b1)|) and must be kept.
double asymptotic_neg(double b1, double b2, double z) {
  double x = -z;
  double zi = 1.0 / z;
  double pw = 1.0, sum = 0.0, prev_mag = std::numeric_limits<double>::infinity();
  int used = 0;
  for (int k = 1; k <= 60; ++k) {
    pw *= zi;
    const double a = b2 - b1 * k;
    const double r = std::round(a);
    // Gamma pole up to roundoff (b2 - b1 k rarely lands on -6.0 exactly):
    // the collapsed term carries no tail information, skip it without
    // tripping the guard
    if (r <= 0.0 && std::fabs(a - r) < 1e-9 * std::max(1.0, std::fabs(a)))
      continue;
    double term = -pw * rgamma(a);
    if (term == 0.0) continue;
    double mag = std::fabs(term);
    if (mag >= prev_mag && used >= 5) break;  // divergent tail reached
    sum += term;
    prev_mag = mag;
    ++used;
    if (mag < 1e-17 * std::fabs(sum)) break;
  }
  if (b1 > 1.0) {
    std::complex<double> s =
        std::pow(x, 1.0 / b1) *
        std::exp(std::complex<double>(0.0, M_PI / b1));
    std::complex<double> res =
        std::exp(s) * std::pow(s, 1.0 - b2);
    sum += (2.0 / b1) * res.real();
  }
  return sum;
}

// Bromwich inversion of s^{b1-b2}/(s^{b1} - z) at t = 1 on the left-opening
// parabola s(u) = mu (1 + iu)^2 (Trefethen/Weideman style), for 1 < b1 < 2
// between the series and asymptotic windows. The resolvent poles
// s = x^{1/b1} e^{+-i pi/b1} are kept outside the contour by shrinking it
// (factor 2 in the mapped plane, mu = R cos^2(theta/2)/4), so their residues
// are added explicitly and the trapezoid sees a pole-free integrand: the
// sampled part decays like e^{-mu u^2} and converges geometrically in the
// step. Small mu keeps e^{Re s} <= e^mu near 1, so no roundoff blow-up.
double contour_neg(double b1, double b2, double x) {
  double R = std::pow(x, 1.0 / b1);
  double theta = M_PI / b1;  // pole angle, in (pi/2, pi)
  double cth = std::cos(0.5 * theta);
  double mu = 0.25 * R * cth * cth;
  // strip half-width ~0.75 (pole images sit at distance 1): step for 1e-17
  // discretization error, truncation when the Gaussian factor reaches e^-39
  double h = 2.0 * M_PI * 0.75 / 39.0;
  int n = static_cast<int>(std::ceil(std::sqrt(39.0 / mu + 1.0) / h));
  std::complex<double> acc(0.0, 0.0);
  for (int j = 0; j <= n; ++j) {
    double u = j * h;
    std::complex<double> w(1.0, u);
    std::complex<double> s = mu * w * w;
    std::complex<double> g =
        std::exp(s) * std::pow(s, b1 - b2) / (std::pow(s, b1) + x) * w;
    acc += (j == 0) ? 0.5 * g : g;
  }
  double val = (2.0 * mu * h / M_PI) * acc.real();
  std::complex<double> sp =
      R * std::exp(std::complex<double>(0.0, theta));
  val += (2.0 / b1) * (std::exp(sp) * std::pow(sp, 1.0 - b2)).real();
  return val;
}

}  // namespace

MLRegime ml_regime(const MLParams& params, double z) {
  params.validate();
  if (z == 0.0) return MLRegime::zero_arg;
  if (params.beta1 == 1.0 && params.beta2 == 1.0) return MLRegime::exponential;
  if (z > 0.0) return MLRegime::series;
  double az = std::fabs(z);
  double b1 = params.beta1;
  // Cancellation prescan: on the negative axis the sum is O(1) while the
  // terms need not be, and e^lmax of headroom is lost outright. Keep the
  // series only while that loss stays below ~e^6 (~3 digits).
  double lmax = series_log_max_term(b1, params.beta2, az);
  if (lmax <= 6.0) return MLRegime::series;
  if (b1 < 1.0)
    return az >= 50.0 ? MLRegime::asymptotic : MLRegime::integral;
  // the asymptotic tail reaches ~e^-30 at its smallest term once
  // |z|^(1/b1) >= 30; below that the contour carries the mid range
  return az >= std::pow(30.0, b1) ? MLRegime::asymptotic : MLRegime::contour;
}

double ml_eval(const MLParams& params, double z) {
  MLRegime r = ml_regime(params, z);
  double b1 = params.beta1, b2 = params.beta2;
  switch (r) {
    case MLRegime::zero_arg:
      return rgamma(b2);
    case MLRegime::exponential:
      if (z > 709.0) throw std::overflow_error("ml_eval: exp overflow");
      return std::exp(z);
    case MLRegime::series: {
      if (z > 0.0) {
        // leading growth e^{z^{1/b1}}; refuse what double cannot hold
        double lead = std::pow(z, 1.0 / b1);
        if (lead > 708.0) throw std::overflow_error("ml_eval: ML overflow");
      }
      return series_sum(b1, b2, z);
    }
    case MLRegime::integral:
      // the integral form needs b2 < 1 + b1; walk b2 down with
      // E_{b1,b2}(z) = (E_{b1,b2-b1}(z) - 1/Gamma(b2-b1)) / z first
      if (b2 >= 1.0 + b1 - 1e-12)
        return (ml_eval({b1, b2 - b1}, z) - rgamma(b2 - b1)) / z;
      return integral_rep(b1, b2, -z);
    case MLRegime::contour:
      if (b1 == 1.0)
        throw std::domain_error(
            "ml_eval: beta1 = 1 with beta2 != 1 is unsupported on the mid "
            "negative axis (resolvent pole on the branch cut)");
      return contour_neg(b1, b2, -z);
    case MLRegime::asymptotic:
      return asymptotic_neg(b1, b2, z);
  }
  throw std::logic_error("ml_eval: unreachable");
}

double relaxation_kernel(const KernelQuery& q) {
  q.validate();
  if (q.alpha < 1.0 && q.t == 0.0)
    throw std::domain_error("relaxation_kernel: unbounded at t=0 for alpha<1");
  if (q.alpha == 1.0) return std::exp(-q.lambda * q.t);
  double za = -q.lambda * std::pow(q.t, q.alpha);
  double v = std::pow(q.t, q.alpha - 1.0) *
             ml_eval({q.alpha, q.alpha}, za);
  if (q.alpha < 1.0 && !(v > 0.0))
    throw std::logic_error(
        "relaxation_kernel: positivity violated (alpha<=1 kernel is "
        "completely monotone); evaluation error");
  return v;
}

double kernel_laplace(double alpha, double lambda, double p) {
  if (!(alpha > 0.0 && alpha < 2.0))
    throw std::invalid_argument("kernel_laplace: alpha outside (0,2)");
  if (!(lambda > 0.0))
    throw std::invalid_argument("kernel_laplace: lambda must be positive");
  if (!(p > 0.0)) throw std::domain_error("kernel_laplace: requires p > 0");
  return 1.0 / (std::pow(p, alpha) + lambda);
}

double asymptotic_flux_model(double alpha, double amplitude, double t) {
  if (!(alpha > 0.0 && alpha < 2.0))
    throw std::invalid_argument("asymptotic_flux_model: alpha outside (0,2)");
  if (!(t > 0.0))
    throw std::domain_error("asymptotic_flux_model: requires t > 0");
  if (alpha == 1.0) return 0.0;  // 1/Gamma(-1) = 0 by convention
  return -std::pow(t, -1.0 - alpha) * rgamma(-alpha) * amplitude;
}

}  // namespace fdlab
