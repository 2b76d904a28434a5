#include "fdlab/input.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fdlab/numerics.hpp"

namespace fdlab {

namespace {

// exp(-1/s) glue, extended by 0; the basis of every C-infinity switch here
double moll(double s) {
  if (s <= 0.0) return 0.0;
  return std::exp(-1.0 / s);
}

// monotone 0 -> 1 bridge with all derivatives vanishing at both ends,
// symmetric about s = 1/2
double bridge(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  double a = moll(s);
  return a / (a + moll(1.0 - s));
}

// compactly supported bump on (0,1)
double bump(double s) {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  return std::exp(-1.0 / (s * (1.0 - s)));
}

}  // namespace

void ScheduleSpec::validate() const {
  if (!(tau1 > 0.0)) throw std::invalid_argument("schedule: tau1 must be positive");
  if (!(tau2 > tau1)) throw std::invalid_argument("schedule: tau2 must exceed tau1");
  if (components < 1 || components > 8)
    throw std::invalid_argument("schedule: component count outside [1,8]");
  if (profile_nodes < 1) throw std::invalid_argument("schedule: empty input boundary");
  if (plateau < 0.0) throw std::invalid_argument("schedule: negative plateau");
}

ExcitationSchedule::ExcitationSchedule(const ScheduleSpec& spec) {
  spec.validate();
  k_ = spec.components;
  tau1_ = spec.tau1;
  tau2_ = spec.tau2;

  plateaus_.assign(k_ + 1, spec.plateau);
  plateaus_[0] = 0.0;  // unused slot, components are 1-based
  plateaus_[1] = 0.0;  // the probe component returns to zero

  // unit time integral for the probe bump: scale 1 / (L * int_0^1 bump)
  double l0 = step_time(1) - step_time(0);
  QuadResult mass = integrate([](double s) { return bump(s); }, 0.0, 1.0,
                              1e-14, 1e-12);
  bump_scale_ = 1.0 / (l0 * mass.value);

  int m = spec.profile_nodes;
  chi_.resize(m);
  for (int i = 0; i < m; ++i) {
    if (m <= 4) {
      chi_[i] = 1.0;
      continue;
    }
    double s = (i + 0.5) / m;
    // flat on the central 60 percent, smooth rolloff to the ends
    if (s < 0.2) chi_[i] = bridge(s / 0.2);
    else if (s > 0.8) chi_[i] = bridge((1.0 - s) / 0.2);
    else chi_[i] = 1.0;
  }

  eta_.resize(k_ + 1);
  for (int k = 1; k <= k_; ++k) {
    std::vector<double>& v = eta_[k];
    v.resize(m);
    if (k == 1) {
      // one-signed profile; a bump when there is room, constant otherwise
      for (int i = 0; i < m; ++i)
        v[i] = (m <= 2) ? 1.0 : bump((i + 1.0) / (m + 1.0));
    } else {
      int mode = (k - 1) % m;
      for (int i = 0; i < m; ++i)
        v[i] = std::cos(mode * M_PI * (i + 0.5) / m);
    }
    double nrm = 0.0;
    for (double x : v) nrm += x * x;
    nrm = std::sqrt(nrm);
    for (double& x : v) x /= nrm;
  }

  w3_.assign(k_ + 1, 0.0);
  weights_.assign(k_ + 1, 0.0);
  for (int k = 1; k <= k_; ++k) {
    w3_[k] = w3_norm(k);
    weights_[k] = std::pow(2.0, -k) / (1.0 + w3_[k]);
  }
}

double ExcitationSchedule::step_time(int j) const {
  if (j < 0) throw std::out_of_range("step_time: negative index");
  return tau2_ - (tau2_ - tau1_) * std::pow(2.0, -j);
}

double ExcitationSchedule::plateau(int k) const {
  if (k < 1 || k > k_) throw std::out_of_range("plateau: component index");
  return plateaus_[k];
}

double ExcitationSchedule::weight(int k) const {
  if (k < 1 || k > k_) throw std::out_of_range("weight: component index");
  return weights_[k];
}

double ExcitationSchedule::psi(int k, double t) const {
  if (k < 1 || k > k_) throw std::out_of_range("psi: component index");
  double lo = step_time(2 * k - 2);
  double hi = step_time(2 * k - 1);
  if (k == 1) return bump_scale_ * bump((t - lo) / (hi - lo));
  return plateaus_[k] * bridge((t - lo) / (hi - lo));
}

double ExcitationSchedule::eta(int k, int node) const {
  if (k < 1 || k > k_) throw std::out_of_range("eta: component index");
  return eta_[k].at(node);
}

double ExcitationSchedule::chi(int node) const { return chi_.at(node); }

double ExcitationSchedule::component_value(int k, double t, int node) const {
  return weights_[k] * psi(k, t) * chi_.at(node) * eta_[k][node];
}

double ExcitationSchedule::value(double t, int node) const {
  double s = 0.0;
  for (int k = 1; k <= k_; ++k) s += component_value(k, t, node);
  return s;
}

std::pair<double, double> ExcitationSchedule::window_of(int k) const {
  if (k < 0 || k > k_) throw std::out_of_range("window_of: component index");
  return {0.0, step_time(2 * k)};
}

double ExcitationSchedule::w3_norm(int k) const {
  if (k < 1 || k > k_) throw std::out_of_range("w3_norm: component index");
  if (k <= static_cast<int>(w3_.size()) - 1 && w3_[k] > 0.0) return w3_[k];
  // sample the bridge interval and difference numerically; the transitions
  // are where all the derivative mass lives
  double lo = step_time(2 * k - 2);
  double hi = step_time(2 * k - 1);
  const int n = 4096;
  double h = (hi - lo) / n;
  std::vector<double> f(n + 5);
  for (int i = 0; i < n + 5; ++i) f[i] = psi(k, lo + (i - 2) * h);
  double mx = 0.0;
  for (int i = 2; i < n + 3; ++i) {
    double d1 = (f[i + 1] - f[i - 1]) / (2 * h);
    double d2 = (f[i + 1] - 2 * f[i] + f[i - 1]) / (h * h);
    double d3 = (f[i + 2] - 2 * f[i + 1] + 2 * f[i - 1] - f[i - 2]) /
                (2 * h * h * h);
    mx = std::max({mx, std::fabs(f[i]), std::fabs(d1), std::fabs(d2),
                   std::fabs(d3)});
  }
  return mx;
}

}  // namespace fdlab
