#include "fdlab/laplace.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "fdlab/numerics.hpp"

namespace fdlab {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Truncation certificate for int_H^inf e^(-pt) y(t) dt. The plain route
// bounds |y| beyond the horizon by its envelope over the last fifth of the
// samples. The power route fits c t^s on the last half of the horizon and
// integrates the fit, so slowly decaying traces certify too; its bound
// carries the asymptotic-series remainder plus the worst fit deviation seen
// inside the window. Whichever route bounds tighter wins.
struct TailCert {
  double add = 0.0;    // contribution joined to the transform value
  double bound = 0.0;  // certified bound on what is still unaccounted for
};

TailCert tail_certificate(const std::vector<double>& t,
                          const std::vector<double>& y, double p,
                          bool power_tail) {
  const int nt = static_cast<int>(t.size());
  const double H = t.back();
  const int i0 = std::max(0, nt - std::max(2, nt / 5));
  double env = 0.0;
  for (int i = i0; i < nt; ++i) env = std::max(env, std::abs(y[i]));
  const TailCert plain{0.0, env * std::exp(-p * H) / p};
  if (!power_tail || p * H < 8.0) return plain;

  std::vector<double> lt, lv;
  int sign = 0;
  for (int i = 0; i < nt; ++i) {
    if (t[i] < 0.5 * H) continue;
    if (y[i] == 0.0 || t[i] <= 0.0) return plain;
    const int s = y[i] > 0.0 ? 1 : -1;
    if (sign == 0) sign = s;
    if (s != sign) return plain;
    lt.push_back(std::log(t[i]));
    lv.push_back(std::log(std::abs(y[i])));
  }
  if (lt.size() < 8) return plain;
  const LinFit fit = linear_fit(lt, lv);
  if (!(fit.r2 >= 0.995)) return plain;
  const double s = fit.slope;
  const double c = sign * std::exp(fit.intercept);
  double dev = 0.0;
  for (std::size_t i = 0; i < lt.size(); ++i)
    dev = std::max(dev, std::abs(std::expm1(lv[i] - (fit.intercept + s * lt[i]))));

  const double x = p * H;
  const double base = c * std::pow(H, s) * std::exp(-x) / p;
  double series = 1.0, term = 1.0;
  for (int k = 0; k < 3; ++k) {
    term *= (s - k) / x;
    series += term;
  }
  const double rem = std::abs(term * (s - 3.0) / x);
  const double tail = base * series;
  const TailCert powered{tail, std::abs(base) * rem + std::abs(tail) * dev};
  return powered.bound < plain.bound ? powered : plain;
}

void check_p_grid(const std::vector<double>& p_values) {
  if (p_values.empty())
    throw std::invalid_argument("laplace: empty p grid");
  for (std::size_t i = 0; i < p_values.size(); ++i) {
    if (!(p_values[i] > 0.0))
      throw std::invalid_argument("laplace: p grid must be positive");
    if (i > 0 && !(p_values[i] > p_values[i - 1]))
      throw std::invalid_argument("laplace: p grid must be strictly increasing");
  }
}

[[noreturn]] void tail_refuse(double bound, double rel, double value, double p,
                              int node) {
  std::ostringstream os;
  os << "laplace transform: tail bound " << bound << " exceeds " << rel
     << " of |" << value << "| at p=" << p << " (node " << node << ")";
  throw std::runtime_error(os.str());
}

// transform of an input signal that is constant past the horizon. Panelled so
// that a feature much narrower than the horizon cannot slip between the
// quadrature nodes of a single adaptive pass.
double input_transform(const std::function<double(double)>& f, double p,
                       double H) {
  double acc = 0.0, t0 = 0.0;
  while (t0 < H) {
    const double t1 = std::min(H, t0 + (t0 < 8.0 ? 0.25 : 1.0));
    const auto g = [&](double t) { return std::exp(-p * t) * f(t); };
    acc += integrate(g, t0, t1, 1e-14, 1e-12).value;
    t0 = t1;
  }
  return acc + f(H) * std::exp(-p * H) / p;
}

}  // namespace

LaplaceSamples transform(const TimeTrace& trace,
                         const std::vector<double>& p_values,
                         const TransformOptions& opt) {
  check_p_grid(p_values);
  const int nt = static_cast<int>(trace.times.size());
  const int nn = static_cast<int>(trace.observation_nodes.size());
  if (nt < 8) throw std::invalid_argument("laplace transform: too few samples");
  for (int i = 1; i < nt; ++i)
    if (!(trace.times[i] > trace.times[i - 1]))
      throw std::invalid_argument("laplace transform: times must increase");
  if (static_cast<int>(trace.values.size()) != nt)
    throw std::invalid_argument("laplace transform: trace shape mismatch");

  LaplaceSamples out;
  out.p_values = p_values;
  out.nodes = trace.observation_nodes;
  const int np = static_cast<int>(p_values.size());
  out.values.setZero(np, nn);
  out.tail_bounds.setZero(np, nn);
  std::vector<double> y(nt);
  for (int j = 0; j < nn; ++j) {
    for (int i = 0; i < nt; ++i) {
      if (static_cast<int>(trace.values[i].size()) != nn)
        throw std::invalid_argument("laplace transform: trace shape mismatch");
      y[i] = trace.values[i][j];
    }
    const CubicSpline sp(trace.times, y);
    for (int ip = 0; ip < np; ++ip) {
      const double p = p_values[ip];
      const TailCert cert = tail_certificate(trace.times, y, p, opt.power_tail);
      const double val = sp.laplace_integral(p) + cert.add;
      const bool ok = (val == 0.0 && cert.bound == 0.0) ||
                      cert.bound <= opt.certify_rel * (std::abs(val) + cert.bound);
      if (!ok) tail_refuse(cert.bound, opt.certify_rel, val, p, trace.observation_nodes[j]);
      out.values(ip, j) = val;
      out.tail_bounds(ip, j) = cert.bound;
    }
  }
  return out;
}

double p_floor(const DiscreteOperator& op, double alpha) {
  if (!(alpha > 0.0 && alpha < 2.0))
    throw std::invalid_argument("p_floor: alpha must lie in (0,2)");
  if (!op.has_drift) return 0.0;
  double rho0 = std::numeric_limits<double>::infinity();
  double b2 = 0.0;
  for (int id : op.dom.fluid) {
    rho0 = std::min(rho0, op.cf.rho[id]);
    const double bx = op.cf.bx[id];
    const double by = op.cf.by.empty() ? 0.0 : op.cf.by[id];
    b2 = std::max(b2, bx * bx + by * by);
  }
  return std::pow((b2 + 1.0) / rho0, 1.0 / alpha);
}

ResolventFactor::ResolventFactor(const DiscreteOperator& op, double alpha,
                                 double p)
    : op_(&op), p_(p) {
  if (!(alpha > 0.0 && alpha < 2.0))
    throw std::invalid_argument("resolvent: alpha must lie in (0,2)");
  if (!(p > 0.0)) throw std::invalid_argument("resolvent: p must be positive");
  const double floor = p_floor(op, alpha);
  if (p <= floor) {
    std::ostringstream os;
    os << "resolvent: p=" << p << " is below the drift coercivity bound "
       << floor;
    throw std::invalid_argument(os.str());
  }
  SpMat sys = op.stiffness;
  if (op.has_drift) sys = SpMat(sys + op.drift);
  const double pa = std::pow(p, alpha);
  SpMat shift(op.n, op.n);
  shift.setIdentity();
  for (int i = 0; i < op.n; ++i) shift.coeffRef(i, i) = pa * op.mass[i];
  sys = SpMat(sys + shift);
  sys.makeCompressed();
  lu_.compute(sys);
  if (lu_.info() != Eigen::Success)
    throw std::runtime_error("resolvent: factorization failed");
}

Eigen::VectorXd ResolventFactor::solve(const Eigen::VectorXd& g_border,
                                       const Eigen::VectorXd& source) const {
  const DiscreteOperator& op = *op_;
  if (g_border.size() != static_cast<Eigen::Index>(op.border.size()))
    throw std::invalid_argument("resolvent: boundary data size mismatch");
  Eigen::VectorXd rhs = op.boundary_coupling * g_border;
  if (source.size() != 0) {
    if (source.size() != op.n)
      throw std::invalid_argument("resolvent: source size mismatch");
    rhs += source;
  }
  return lu_.solve(rhs);
}

Eigen::VectorXd resolvent_solve(const DiscreteOperator& op, double alpha,
                                double p, const Eigen::VectorXd& g_border,
                                const Eigen::VectorXd& source) {
  return ResolventFactor(op, alpha, p).solve(g_border, source);
}

std::vector<double> resolvent_flux(const DiscreteOperator& op,
                                   const Eigen::VectorXd& V,
                                   const Eigen::VectorXd& g_border,
                                   const std::vector<int>& where) {
  if (g_border.size() != static_cast<Eigen::Index>(op.border.size()))
    throw std::invalid_argument("resolvent_flux: boundary data size mismatch");
  std::vector<double> bfull(op.dom.node_count(), 0.0);
  for (std::size_t i = 0; i < op.border.size(); ++i)
    bfull[op.border[i]] = g_border[static_cast<Eigen::Index>(i)];
  const std::vector<double> field = op.dom.unpack(V, bfull);
  return boundary_flux(op.dom, op.cf, field, where);
}

void ContourSpec::validate() const {
  if (!(theta1 > 0.5 * kPi && theta1 < kPi))
    throw std::invalid_argument("contour: theta1 must lie in (pi/2, pi)");
  if (delta < 0.0)
    throw std::invalid_argument("contour: delta must be nonnegative");
  if (!(quad_abs > 0.0) || !(quad_rel > 0.0))
    throw std::invalid_argument("contour: quadrature tolerances must be positive");
}

double contour_kernel(const ContourSpec& spec, double alpha, double lambda,
                      double z) {
  spec.validate();
  if (!(alpha > 0.0 && alpha < 2.0))
    throw std::invalid_argument("contour_kernel: alpha must lie in (0,2)");
  if (!(lambda > 0.0))
    throw std::invalid_argument("contour_kernel: lambda must be positive");
  if (!(z > 0.0))
    throw std::invalid_argument("contour_kernel: z must be positive");

  const double th = spec.theta1;
  using cd = std::complex<double>;
  const cd ray_dir = std::exp(cd(0.0, th));

  // pole pair of the symbol, on the principal sheet only for alpha >= 1
  const bool poles = alpha >= 1.0;
  const cd pstar =
      poles ? std::pow(lambda, 1.0 / alpha) * std::exp(cd(0.0, kPi / alpha))
            : cd(0.0, 0.0);
  const double pole_ang =
      poles ? std::atan2(std::imag(pstar), std::real(pstar) - spec.r1) : 0.0;
  const double pole_rad = poles ? std::abs(pstar - spec.r1) : 0.0;

  double delta = spec.delta > 0.0 ? spec.delta : 1.0 / z;
  if (spec.delta <= 0.0 && poles && pole_ang < th) {
    // keep the automatic arc clear of the pole radius
    const double ratio = pole_rad / delta;
    if (ratio > 0.5 && ratio < 2.0) delta = 0.5 * pole_rad;
  }

  // conjugate symmetry folds the lower half of the contour onto the upper,
  // leaving 1/pi times the imaginary parts
  auto arc = [&](double phi) {
    const cd e = std::exp(cd(0.0, phi));
    const cd p = spec.r1 + delta * e;
    const cd dp = cd(0.0, delta) * e;
    return std::imag(std::exp(z * p) / (std::pow(p, alpha) + lambda) * dp);
  };
  auto ray = [&](double r) {
    const cd p = spec.r1 + r * ray_dir;
    return std::imag(std::exp(z * p) / (std::pow(p, alpha) + lambda) * ray_dir);
  };
  // cut the rays where e^{zp} has fallen 16 decades below its arc peak
  const double rmax =
      std::max(2.0 * delta, (z * delta + 40.0) / (z * -std::cos(th)));
  double val = (integrate(arc, 0.0, th, spec.quad_abs, spec.quad_rel).value +
                integrate(ray, delta, rmax, spec.quad_abs, spec.quad_rel).value) /
               kPi;

  if (poles) {
    // The contour encloses {|arg| > theta1} together with the delta disk.
    // A pole outside both pieces is no longer surrounded and its residue
    // enters by hand; a pole sitting on the contour itself is rejected.
    if (std::abs(pole_ang - th) < 1e-10 * th && pole_rad >= delta * (1.0 - 1e-12))
      throw std::runtime_error(
          "contour_kernel: resolvent pole sits on the ray, move theta1");
    if (pole_ang < th) {
      if (std::abs(pole_rad - delta) < 1e-8 * std::max(pole_rad, delta))
        throw std::runtime_error(
            "contour_kernel: resolvent pole sits on the delta arc, change delta");
      if (pole_rad > delta)
        val += 2.0 * std::real(std::exp(z * pstar) * std::pow(pstar, 1.0 - alpha)) /
               alpha;
    }
  }
  return val;
}

std::vector<double> weak_solution_residual(const DiscreteOperator& op,
                                           double alpha,
                                           const std::vector<double>& times,
                                           const Eigen::MatrixXd& nodal,
                                           const WeakForm& wf,
                                           const std::vector<double>& p_values,
                                           const TransformOptions& opt) {
  if (!(alpha > 0.0 && alpha < 2.0))
    throw std::invalid_argument("weak residual: alpha must lie in (0,2)");
  check_p_grid(p_values);
  const int nt = static_cast<int>(times.size());
  if (nt < 8) throw std::invalid_argument("weak residual: too few time levels");
  for (int i = 1; i < nt; ++i)
    if (!(times[i] > times[i - 1]))
      throw std::invalid_argument("weak residual: times must increase");
  if (nodal.rows() != op.dom.node_count() || nodal.cols() != nt)
    throw std::invalid_argument("weak residual: nodal history shape mismatch");
  if (wf.fhat.size() != 0 && wf.fhat.size() != op.n)
    throw std::invalid_argument("weak residual: source shape size mismatch");
  if (wf.u0.size() != 0 && wf.u0.size() != op.n)
    throw std::invalid_argument("weak residual: initial state size mismatch");
  const double floor = p_floor(op, alpha);
  if (op.has_drift && p_values.front() <= floor) {
    std::ostringstream os;
    os << "weak residual: p=" << p_values.front()
       << " is below the drift coercivity bound " << floor;
    throw std::invalid_argument(os.str());
  }

  const int np = static_cast<int>(p_values.size());
  const double H = times.back();

  // transform the unknowns' histories, one spline per node
  Eigen::MatrixXd U(op.n, np);
  std::vector<double> tail_sq(np, 0.0);
  std::vector<double> y(nt);
  for (int k = 0; k < op.n; ++k) {
    const int id = op.dom.fluid[k];
    for (int i = 0; i < nt; ++i) y[i] = nodal(id, i);
    const CubicSpline sp(times, y);
    for (int ip = 0; ip < np; ++ip) {
      const TailCert cert = tail_certificate(times, y, p_values[ip], false);
      U(k, ip) = sp.laplace_integral(p_values[ip]);
      tail_sq[ip] += cert.bound * cert.bound;
    }
  }
  for (int ip = 0; ip < np; ++ip) {
    const double un = U.col(ip).norm();
    const double tb = std::sqrt(tail_sq[ip]);
    if (!(un == 0.0 && tb == 0.0) && tb > opt.certify_rel * un)
      tail_refuse(tb, opt.certify_rel, un, p_values[ip], -1);
  }

  // Gamma_in index of each border slot, -1 off the input side
  std::vector<int> gslot(op.border.size(), -1);
  for (std::size_t i = 0; i < op.border.size(); ++i) {
    for (std::size_t g = 0; g < op.dom.gamma_in.size(); ++g)
      if (op.dom.gamma_in[g] == op.border[i]) {
        gslot[i] = static_cast<int>(g);
        break;
      }
  }

  SpMat sys = op.stiffness;
  if (op.has_drift) sys = SpMat(sys + op.drift);

  std::vector<double> out(np, 0.0);
  for (int ip = 0; ip < np; ++ip) {
    const double p = p_values[ip];
    const double pa = std::pow(p, alpha);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(op.n);
    if (wf.bvalue) {
      Eigen::VectorXd ghat =
          Eigen::VectorXd::Zero(static_cast<Eigen::Index>(op.border.size()));
      for (std::size_t i = 0; i < op.border.size(); ++i) {
        if (gslot[i] < 0) continue;
        const int g = gslot[i];
        ghat[static_cast<Eigen::Index>(i)] = input_transform(
            [&](double t) { return wf.bvalue(t, g); }, p, H);
      }
      rhs += op.boundary_coupling * ghat;
    }
    if (wf.sigma && wf.fhat.size() != 0)
      rhs += input_transform(wf.sigma, p, H) * wf.fhat;
    if (wf.u0.size() != 0)
      rhs += std::pow(p, alpha - 1.0) *
             op.mass.cwiseProduct(wf.u0).eval();
    const Eigen::VectorXd lhs =
        sys * U.col(ip) + pa * op.mass.cwiseProduct(U.col(ip)).eval();
    const double num = (lhs - rhs).norm();
    const double den = rhs.norm();
    out[ip] = den == 0.0
                  ? (num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity())
                  : num / den;
  }
  return out;
}

}  // namespace fdlab
