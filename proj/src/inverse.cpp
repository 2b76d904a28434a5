#include "fdlab/inverse.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>

#include "fdlab/mlf.hpp"
#include "fdlab/numerics.hpp"
#include "fdlab/stepper.hpp"

namespace fdlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double channel_norm(const std::vector<double>& row) {
  double s = 0.0;
  for (double v : row) s += v * v;
  return std::sqrt(s);
}

}  // namespace

double input_signal_transform(const ExcitationSchedule& sch, int k, double p) {
  if (k < 1 || k > sch.components())
    throw std::invalid_argument("input transform: component out of range");
  if (!(p > 0.0))
    throw std::invalid_argument("input transform: p must be positive");
  const double lo = sch.step_time(2 * k - 2);
  const double hi = sch.step_time(2 * k - 1);
  const auto g = [&](double t) { return std::exp(-p * t) * sch.psi(k, t); };
  double acc = integrate(g, lo, hi, 1e-14, 1e-12).value;
  acc += sch.plateau(k) * std::exp(-p * hi) / p;
  return sch.weight(k) * acc;
}

AlphaFit recover_alpha(const TimeTrace& trace, double t_lo, double t_hi,
                       double tau2, double noise_floor) {
  if (!(t_lo > 0.0) || !(t_hi > t_lo))
    throw std::invalid_argument("alpha recovery: bad fit window");
  if (tau2 > 0.0 && t_lo < 10.0 * tau2 * (1.0 - 1e-12))
    throw std::invalid_argument(
        "alpha recovery: the fit window must start past ten switch horizons "
        "(t_lo >= 10 tau2)");
  if (trace.times.size() != trace.values.size())
    throw std::invalid_argument("alpha recovery: trace shape mismatch");

  std::vector<double> ts, vs;
  for (size_t i = 0; i < trace.times.size(); ++i) {
    const double t = trace.times[i];
    if (t < t_lo || t > t_hi) continue;
    const double v = channel_norm(trace.values[i]);
    if (v > noise_floor) {
      ts.push_back(t);
      vs.push_back(v);
    }
  }
  if (ts.size() < 4) {
    double t_last = 0.0;
    for (size_t i = 0; i < trace.times.size(); ++i)
      if (channel_norm(trace.values[i]) > noise_floor)
        t_last = trace.times[i];
    std::ostringstream os;
    os << "alpha recovery: only " << ts.size()
       << " samples above the noise floor " << noise_floor << " on [" << t_lo
       << ", " << t_hi << "]";
    if (t_last > 0.0)
      os << "; last usable time is t = " << t_last
         << ", close the window below it or extend the horizon";
    else
      os << "; the trace never rises above the floor";
    throw std::runtime_error(os.str());
  }

  const int n = static_cast<int>(ts.size());
  std::vector<double> logt(n), logv(n);
  for (int i = 0; i < n; ++i) {
    logt[i] = std::log(ts[i]);
    logv[i] = std::log(vs[i]);
  }
  const LinFit pow_fit = linear_fit(logt, logv);
  const LinFit exp_fit = linear_fit(ts, logv);

  AlphaFit out;
  out.points = n;
  out.r2_power = pow_fit.r2;
  out.r2_exp = exp_fit.r2;
  // both branches spend two parameters on the same points, so the Akaike
  // comparison reduces to the residual sums
  if (exp_fit.rss < pow_fit.rss) {
    out.exponential = true;
    out.alpha_hat = 1.0;
    out.amplitude = 0.0;
    out.rss = exp_fit.rss;
    return out;
  }
  out.alpha_hat = -pow_fit.slope - 1.0;
  out.amplitude = std::exp(pow_fit.intercept);
  out.rss = pow_fit.rss;
  if (n > 2) {
    double mean = 0.0;
    for (double x : logt) mean += x;
    mean /= n;
    double sxx = 0.0;
    for (double x : logt) sxx += (x - mean) * (x - mean);
    if (sxx > 0.0)
      out.ci_half = 1.96 * std::sqrt(pow_fit.rss / (n - 2) / sxx);
  }
  return out;
}

HopfCheck hopf_check(const DiscreteOperator& op,
                     const std::vector<double>& chi_eta) {
  const GridDomain& dom = op.dom;
  if (chi_eta.size() != dom.gamma_in.size())
    throw std::invalid_argument("hopf check: profile does not match gamma_in");

  // the bump shape keeps one sign; flip it if needed so the input is
  // non-positive, which is the normalization the sign structure wants
  double lo = 0.0, hi = 0.0;
  for (double v : chi_eta) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (lo == 0.0 && hi == 0.0)
    throw std::invalid_argument("hopf check: identically zero input");
  if (lo < 0.0 && hi > 0.0)
    throw std::invalid_argument("hopf check: the profile must keep one sign");
  const double flip = hi > 0.0 ? -1.0 : 1.0;

  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<int>(op.border.size()));
  for (size_t i = 0; i < dom.gamma_in.size(); ++i)
    g[op.border_index(dom.gamma_in[i])] = flip * chi_eta[i];

  const Eigen::VectorXd G = elliptic_solve(op, g);
  const Eigen::VectorXd load = op.mass.cwiseProduct(G);
  const Eigen::VectorXd w = elliptic_solve(
      op, Eigen::VectorXd::Zero(static_cast<int>(op.border.size())), load);

  HopfCheck out;
  out.where = op.border;
  const std::vector<double> w_full =
      dom.unpack(w, std::vector<double>(dom.node_count(), 0.0));
  out.flux = boundary_flux(dom, op.cf, w_full, out.where);

  out.w_max_interior = w.maxCoeff();
  out.interior_negative = out.w_max_interior < 0.0;
  out.flux_min = *std::min_element(out.flux.begin(), out.flux.end());
  out.flux_positive = out.flux_min > 0.0;
  if (!out.interior_negative || !out.flux_positive) {
    std::ostringstream os;
    int bad_w = 0, bad_f = 0;
    for (int i = 0; i < w.size(); ++i) bad_w += w[i] >= 0.0;
    for (double f : out.flux) bad_f += f <= 0.0;
    os << "sign structure violated (" << bad_w << " interior nodes, " << bad_f
       << " boundary nodes); the discretization is likely too coarse";
    out.note = os.str();
  }
  return out;
}

HopfCheck hopf_check(const DiscreteOperator& op, const ExcitationSchedule& sch) {
  if (sch.profile_nodes() != static_cast<int>(op.dom.gamma_in.size()))
    throw std::invalid_argument(
        "hopf check: schedule profile does not match gamma_in");
  std::vector<double> chi_eta(op.dom.gamma_in.size());
  for (size_t i = 0; i < chi_eta.size(); ++i)
    chi_eta[i] =
        sch.chi(static_cast<int>(i)) * sch.eta(1, static_cast<int>(i));
  return hopf_check(op, chi_eta);
}

namespace {

// AAA rational approximation on real samples (Nakatsukasa, Sete, Trefethen,
// SIAM J. Sci. Comput. 40(3), 2018). Returns the poles of the final
// barycentric approximant; they seed the pole fit below.
std::vector<std::complex<double>> aaa_poles(const std::vector<double>& z,
                                            const std::vector<double>& f,
                                            double tol, int mmax) {
  const int n = static_cast<int>(z.size());
  double fmax = 0.0;
  for (double v : f) fmax = std::max(fmax, std::fabs(v));
  if (fmax == 0.0) return {};

  std::vector<char> in_support(n, 0);
  std::vector<double> zt, ft;
  double mean = 0.0;
  for (double v : f) mean += v;
  mean /= n;
  std::vector<double> r(n, mean);
  Eigen::VectorXd w;

  for (int m = 1; m <= std::min(mmax, n - 1); ++m) {
    int jbest = -1;
    double ebest = -1.0;
    for (int i = 0; i < n; ++i) {
      if (in_support[i]) continue;
      const double e = std::fabs(f[i] - r[i]);
      if (e > ebest) {
        ebest = e;
        jbest = i;
      }
    }
    if (jbest < 0) break;
    in_support[jbest] = 1;
    zt.push_back(z[jbest]);
    ft.push_back(f[jbest]);

    Eigen::MatrixXd loewner(n - m, m);
    int row = 0;
    for (int i = 0; i < n; ++i) {
      if (in_support[i]) continue;
      for (int k = 0; k < m; ++k)
        loewner(row, k) = (f[i] - ft[k]) / (z[i] - zt[k]);
      ++row;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(loewner, Eigen::ComputeThinV);
    w = svd.matrixV().col(m - 1);

    double err = 0.0;
    for (int i = 0; i < n; ++i) {
      if (in_support[i]) continue;
      double num = 0.0, den = 0.0;
      for (int k = 0; k < m; ++k) {
        const double c = w[k] / (z[i] - zt[k]);
        num += c * ft[k];
        den += c;
      }
      r[i] = num / den;
      err = std::max(err, std::fabs(f[i] - r[i]));
    }
    if (err <= tol * fmax) break;
  }

  const int m = static_cast<int>(zt.size());
  if (m < 2) return {};
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m + 1, m + 1);
  Eigen::MatrixXd B = Eigen::MatrixXd::Identity(m + 1, m + 1);
  B(0, 0) = 0.0;
  for (int k = 0; k < m; ++k) {
    A(0, k + 1) = w[k];
    A(k + 1, 0) = 1.0;
    A(k + 1, k + 1) = zt[k];
  }
  Eigen::GeneralizedEigenSolver<Eigen::MatrixXd> ges(A, B);
  std::vector<std::complex<double>> poles;
  const auto alphas = ges.alphas();
  const auto betas = ges.betas();
  for (int i = 0; i < alphas.size(); ++i)
    if (std::fabs(betas[i]) > 1e-13) poles.push_back(alphas[i] / betas[i]);
  return poles;
}

struct Projected {
  Eigen::MatrixXd phi;  // np x K
  Eigen::MatrixXd res;  // K x channels
  double resid = 0.0;
};

Projected varpro_project(const Eigen::VectorXd& s, const Eigen::MatrixXd& data,
                         const Eigen::VectorXd& lam) {
  Projected out;
  const int np = static_cast<int>(s.size());
  const int kk = static_cast<int>(lam.size());
  out.phi.resize(np, kk);
  for (int i = 0; i < np; ++i)
    for (int k = 0; k < kk; ++k) out.phi(i, k) = 1.0 / (s[i] + lam[k]);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(out.phi);
  out.res = qr.solve(data);
  out.resid = (out.phi * out.res - data).norm();
  return out;
}

// Levenberg-Marquardt on the projected residual in log-pole coordinates;
// the residues stay eliminated, so the nonlinear dimension is just the
// pole count. Poles in frozen stay in the projection basis but never move:
// they soak up whatever smooth background the data carries so the free
// poles are not tempted to.
Eigen::VectorXd refine_poles(const Eigen::VectorXd& s,
                             const Eigen::MatrixXd& data,
                             Eigen::VectorXd lam,
                             const Eigen::VectorXd& frozen = Eigen::VectorXd()) {
  const int kk = static_cast<int>(lam.size());
  const int kf = static_cast<int>(frozen.size());
  Eigen::VectorXd mu = lam.array().log();
  const auto eval = [&](const Eigen::VectorXd& m) {
    Eigen::VectorXd l(kk + kf);
    l.head(kk) = m.array().min(40.0).max(-40.0).exp();
    l.tail(kf) = frozen;
    return varpro_project(s, data, l);
  };
  Projected cur = eval(mu);
  double nu = 1e-3;
  const double h = 1e-6;
  const int nres = static_cast<int>(data.size());
  bool done = false;
  for (int iter = 0; iter < 80 && !done; ++iter) {
    Eigen::MatrixXd base = cur.phi * cur.res - data;
    const Eigen::Map<Eigen::VectorXd> rvec(base.data(), nres);
    Eigen::MatrixXd jac(nres, kk);
    for (int k = 0; k < kk; ++k) {
      Eigen::VectorXd mp = mu;
      mp[k] += h;
      const Projected pr = eval(mp);
      Eigen::MatrixXd pb = pr.phi * pr.res - data;
      jac.col(k) = (Eigen::Map<Eigen::VectorXd>(pb.data(), nres) - rvec) / h;
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * rvec;
    bool accepted = false;
    for (int tries = 0; tries < 8; ++tries) {
      Eigen::MatrixXd lhs = jtj;
      for (int k = 0; k < kk; ++k)
        lhs(k, k) += nu * std::max(jtj(k, k), 1e-30);
      const Eigen::VectorXd step = lhs.ldlt().solve(-jtr);
      const Projected cand = eval(mu + step);
      if (cand.resid < cur.resid) {
        mu += step;
        const double gain = cur.resid - cand.resid;
        cur = cand;
        nu = std::max(nu / 3.0, 1e-12);
        accepted = true;
        done = gain < 1e-15 * (cur.resid + 1e-300) || step.norm() < 1e-13;
        break;
      }
      nu *= 4.0;
      if (nu > 1e10) break;
    }
    if (!accepted) break;
  }
  return mu.array().min(40.0).max(-40.0).exp();
}

}  // namespace

SpectralFit fit_spectral_data(const LaplaceSamples& samples, double alpha,
                              int n_modes,
                              const std::function<double(double)>& input_hat) {
  if (n_modes < 1 || n_modes > 5)
    throw std::invalid_argument(
        "spectral fit: mode count must lie in [1, 5], conditioning degrades "
        "fast beyond that");
  const int np = static_cast<int>(samples.p_values.size());
  const int nn = static_cast<int>(samples.nodes.size());
  if (np < 2 * n_modes || nn < 1)
    throw std::invalid_argument("spectral fit: not enough samples");
  if (samples.values.rows() != np || samples.values.cols() != nn)
    throw std::invalid_argument("spectral fit: sample shape mismatch");

  Eigen::VectorXd s(np);
  Eigen::MatrixXd data = samples.values;
  for (int i = 0; i < np; ++i) {
    const double p = samples.p_values[i];
    s[i] = std::pow(p, alpha);
    if (input_hat) {
      const double ih = input_hat(p);
      if (!(std::fabs(ih) > 0.0)) {
        std::ostringstream os;
        os << "spectral fit: input transform vanishes at p = " << p;
        throw std::invalid_argument(os.str());
      }
      data.row(i) /= ih;
    }
  }
  const double dnorm = data.norm();
  if (dnorm == 0.0)
    throw std::invalid_argument("spectral fit: zero data");

  // Pole candidates come from AAA rational approximation per channel
  // (Nakatsukasa, Sete, Trefethen, SIAM J. Sci. Comput. 40, 2018). Real
  // negative AAA poles are sharp estimates of the true poles; each is
  // tagged with its channel, and estimates of the same pole from
  // different channels are merged. Two close poles seen within one
  // channel are kept apart: that is a genuine near-degeneracy, not
  // estimator scatter.
  std::vector<std::pair<double, int>> cand;  // (lambda, channel)
  for (int j = 0; j < nn; ++j) {
    std::vector<double> col(np);
    for (int i = 0; i < np; ++i) col[i] = data(i, j);
    std::vector<double> sv(s.data(), s.data() + np);
    for (const auto& pole : aaa_poles(sv, col, 1e-13, 32)) {
      const double re = pole.real(), im = pole.imag();
      if (re < 0.0 && std::fabs(im) <= 1e-3 * std::max(1.0, std::fabs(re)))
        cand.emplace_back(-re, j);
    }
  }
  std::sort(cand.begin(), cand.end());
  std::vector<std::pair<double, int>> pool;  // (lambda, channels seeing it)
  {
    double acc = 0.0;
    int members = 0;
    std::vector<char> in_group(nn, 0);
    const auto flush = [&]() {
      if (members > 0) pool.emplace_back(acc / members, members);
      acc = 0.0;
      members = 0;
      std::fill(in_group.begin(), in_group.end(), 0);
    };
    for (const auto& c : cand) {
      const bool close =
          members > 0 &&
          c.first - acc / members <= 2e-3 * c.first;
      if (!close || in_group[c.second]) flush();
      acc += c.first;
      ++members;
      in_group[c.second] = 1;
    }
    flush();
  }
  // A genuine eigenvalue is seen by every channel, so with several
  // channels the merged estimate has several members. A pole reported by
  // a single channel is that channel's private stand-in for the slow
  // part of the flux expansion; it stays in the basis but is never
  // returned as a mode.
  std::vector<double> corroborated, lone;
  for (const auto& g : pool) {
    if (nn < 2 || g.second >= 2)
      corroborated.push_back(g.first);
    else
      lone.push_back(g.first);
  }

  const double smin = s[0], smax = s[np - 1];

  Eigen::VectorXd best_lam;       // returned poles, ascending
  Eigen::VectorXd background;     // frozen absorber poles
  Projected best;
  best.resid = std::numeric_limits<double>::infinity();
  int n_ret = 0;

  if (static_cast<int>(corroborated.size()) >= n_modes) {
    // AAA-informed path: project on the whole candidate set plus two
    // knots above the band (the spectral tail of the data looks like a
    // smooth background and needs somewhere to go), rank the
    // corroborated candidates by residue energy, then polish only the
    // selected poles.
    const int nc = static_cast<int>(corroborated.size());
    const int nl = static_cast<int>(lone.size());
    Eigen::VectorXd lam_all(nc + nl + 2);
    for (int k = 0; k < nc; ++k) lam_all[k] = corroborated[k];
    for (int k = 0; k < nl; ++k) lam_all[nc + k] = lone[k];
    lam_all[nc + nl] = 2.0 * smax;
    lam_all[nc + nl + 1] = 8.0 * smax;
    const Projected pr = varpro_project(s, data, lam_all);
    std::vector<int> energetic;
    for (int k = 0; k < nc; ++k) {
      const double energy = pr.res.row(k).norm() * pr.phi.col(k).norm();
      if (energy > 1e-9 * dnorm) energetic.push_back(k);
    }
    n_ret = std::min<int>(n_modes, static_cast<int>(energetic.size()));
    Eigen::VectorXd sel(n_ret);
    for (int k = 0; k < n_ret; ++k) sel[k] = lam_all[energetic[k]];
    // Frozen company for the polish: every unselected candidate and the
    // two knots, so the part of the data the selected modes do not
    // explain has somewhere to go without biasing them. A candidate
    // within a few percent of a selected pole is dropped instead: those
    // are spurious AAA doublets, and freezing one next to a free pole
    // leaves the free pole with nothing to determine it.
    std::vector<double> bg;
    for (int k = 0; k < static_cast<int>(lam_all.size()); ++k) {
      if (std::find(energetic.begin(),
                    energetic.begin() + n_ret, k) !=
          energetic.begin() + n_ret)
        continue;
      bool shadowed = false;
      for (int j = 0; j < n_ret; ++j)
        shadowed = shadowed || std::fabs(lam_all[k] - sel[j]) < 0.05 * sel[j];
      if (!shadowed) bg.push_back(lam_all[k]);
    }
    background.resize(static_cast<int>(bg.size()));
    for (std::size_t k = 0; k < bg.size(); ++k)
      background[static_cast<int>(k)] = bg[k];
    best_lam = refine_poles(s, data, sel, background);
    Eigen::VectorXd joint(n_ret + background.size());
    joint.head(n_ret) = best_lam;
    joint.tail(background.size()) = background;
    best = varpro_project(s, data, joint);
  } else {
    // fallback: free multi-start at geometric s-grid knots with a few
    // extra poles for the background
    const int k_int = std::min(n_modes + 3, np / 2);
    const auto geometric = [&](double scale) {
      Eigen::VectorXd lam(k_int);
      for (int k = 0; k < k_int; ++k)
        lam[k] = scale * smin * std::pow(8.0 * smax / smin, (k + 0.5) / k_int);
      return lam;
    };
    std::vector<Eigen::VectorXd> starts;
    if (!pool.empty()) {
      Eigen::VectorXd lam = geometric(1.0);
      const int take = std::min<int>(static_cast<int>(pool.size()), k_int);
      for (int k = 0; k < take; ++k) lam[k] = pool[k].first;
      starts.push_back(lam);
    }
    starts.push_back(geometric(0.3));
    starts.push_back(geometric(1.0));
    starts.push_back(geometric(3.0));

    Eigen::VectorXd all_lam;
    for (const auto& start : starts) {
      Eigen::VectorXd lam = refine_poles(s, data, start);
      Projected pr = varpro_project(s, data, lam);
      if (pr.resid < best.resid) {
        best = pr;
        all_lam = lam;
      }
    }
    std::vector<int> order(k_int);
    for (int k = 0; k < k_int; ++k) order[k] = k;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return all_lam[a] < all_lam[b]; });
    std::vector<int> kept;
    for (int k : order) {
      const double energy = best.res.row(k).norm() * best.phi.col(k).norm();
      if (energy > 1e-9 * dnorm) kept.push_back(k);
    }
    n_ret = std::min<int>(n_modes, static_cast<int>(kept.size()));
    best_lam.resize(n_ret);
    Eigen::MatrixXd picked(n_ret, nn);
    for (int k = 0; k < n_ret; ++k) {
      best_lam[k] = all_lam[kept[k]];
      picked.row(k) = best.res.row(kept[k]);
    }
    const double resid_keep = best.resid;
    best.res = picked;
    best.resid = resid_keep;
  }

  SpectralFit out;
  out.lambda.resize(n_ret);
  out.residues.resize(n_ret, nn);
  // the selected poles stay sorted under the polish in every case met in
  // practice, but a crossing is cheap to undo
  std::vector<int> order(n_ret);
  for (int k = 0; k < n_ret; ++k) order[k] = k;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return best_lam[a] < best_lam[b]; });
  for (int k = 0; k < n_ret; ++k) {
    out.lambda[k] = best_lam[order[k]];
    out.residues.row(k) = best.res.row(order[k]);
  }
  out.rel_residual = best.resid / dnorm;
  if (n_ret < n_modes) {
    std::ostringstream os;
    os << "only " << n_ret << " poles carried residue energy; ";
    out.note += os.str();
  }

  Eigen::MatrixXd phi_ret(np, n_ret);
  for (int k = 0; k < n_ret; ++k)
    phi_ret.col(k) = (s.array() + out.lambda[k]).inverse();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(phi_ret);
  const auto& sv = svd.singularValues();
  out.cond = sv[sv.size() - 1] > 0.0
                 ? sv[0] / sv[sv.size() - 1]
                 : std::numeric_limits<double>::infinity();

  // cluster report: adjacent poles the data cannot separate are grouped
  int begin = 0;
  for (int k = 1; k <= n_ret; ++k) {
    const bool close =
        k < n_ret && out.lambda[k] - out.lambda[k - 1] <= 1e-4 * out.lambda[k];
    if (!close) {
      if (k - begin > 1) out.cluster_ranges.emplace_back(begin, k);
      begin = k;
    }
  }
  out.clustered = !out.cluster_ranges.empty() || out.cond > 1e8;
  if (out.clustered) {
    std::ostringstream os;
    os << "ill-conditioned pole projection (cond " << out.cond
       << "): treat grouped poles as clusters, not point estimates";
    out.note += os.str();
  }
  return out;
}

namespace {

struct LsqOut {
  Eigen::VectorXd x;
  double rel_residual = 0.0;
  double cond = 0.0;
};

LsqOut lsq_solve(const Eigen::MatrixXd& m, const Eigen::VectorXd& y) {
  LsqOut out;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.x = svd.solve(y);
  const auto& sv = svd.singularValues();
  out.cond = sv[sv.size() - 1] > 0.0
                 ? sv[0] / sv[sv.size() - 1]
                 : std::numeric_limits<double>::infinity();
  const double yn = y.norm();
  out.rel_residual = yn > 0.0 ? (m * out.x - y).norm() / yn : 0.0;
  return out;
}

}  // namespace

SourceRecovery recover_sources(const DiscreteOperator& op,
                               const SpectralDecomposition& dec,
                               const TimeTrace& trace, double alpha,
                               const std::function<double(double)>& sigma,
                               double sig_lo, double sig_hi, SourceSplit split,
                               int n_modes) {
  if (n_modes < 1 || n_modes > dec.count)
    throw std::invalid_argument(
        "source recovery: mode count outside the decomposition");
  const int nt = static_cast<int>(trace.times.size());
  const int nj = static_cast<int>(trace.observation_nodes.size());
  if (nt == 0 || nj == 0 || trace.values.size() != static_cast<size_t>(nt))
    throw std::invalid_argument("source recovery: empty or malformed trace");
  for (const auto& row : trace.values)
    if (row.size() != static_cast<size_t>(nj))
      throw std::invalid_argument("source recovery: ragged trace");
  if (split != SourceSplit::ic_only && !(sig_lo < sig_hi))
    throw std::invalid_argument("source recovery: bad sigma support");

  // eigenmode flux factors at the observation nodes, in the same one-sided
  // stencil the trace was recorded with
  Eigen::MatrixXd bfac(n_modes, nj);
  for (int k = 0; k < n_modes; ++k) {
    const std::vector<double> full = op.dom.unpack(dec.eigenvectors.col(k), {});
    const std::vector<double> bf =
        boundary_flux(op.dom, op.cf, full, trace.observation_nodes);
    for (int j = 0; j < nj; ++j) bfac(k, j) = bf[j];
  }

  Eigen::MatrixXd relax(nt, n_modes);   // E_{alpha,1} factors
  Eigen::MatrixXd duh(nt, n_modes);     // sigma convolution factors
  const bool need_duh = split != SourceSplit::ic_only;
  for (int i = 0; i < nt; ++i) {
    const double t = trace.times[i];
    for (int k = 0; k < n_modes; ++k) {
      const double lam = dec.eigenvalues[k];
      relax(i, k) = ml_eval({alpha, 1.0}, -lam * std::pow(t, alpha));
      duh(i, k) = (need_duh && t > sig_lo)
                      ? duhamel(alpha, lam, sigma, sig_lo, sig_hi, 0.0, t,
                                1e-12, 1e-10)
                      : 0.0;
    }
  }

  const auto stack = [&](const std::vector<int>& rows,
                         const Eigen::MatrixXd& fac, int kk) {
    Eigen::MatrixXd m(static_cast<int>(rows.size()) * nj, kk);
    for (size_t r = 0; r < rows.size(); ++r)
      for (int j = 0; j < nj; ++j)
        for (int k = 0; k < kk; ++k)
          m(static_cast<int>(r) * nj + j, k) = fac(rows[r], k) * bfac(k, j);
    return m;
  };
  const auto stack_data = [&](const std::vector<int>& rows) {
    Eigen::VectorXd y(static_cast<int>(rows.size()) * nj);
    for (size_t r = 0; r < rows.size(); ++r)
      for (int j = 0; j < nj; ++j)
        y[static_cast<int>(r) * nj + j] = trace.values[rows[r]][j];
    return y;
  };

  SourceRecovery out;
  out.modes_used = n_modes;
  std::ostringstream note;

  // solve with mode truncation whenever the design matrix degenerates
  const auto fit_family = [&](const std::vector<int>& rows,
                              const Eigen::MatrixXd& fac,
                              const Eigen::VectorXd& y, double* residual) {
    int kk = n_modes;
    LsqOut sol;
    while (true) {
      sol = lsq_solve(stack(rows, fac, kk), y);
      if (sol.cond <= 1e8 || kk == 1) break;
      --kk;
      note << "design condition " << sol.cond << " beyond 1e8, truncated to "
           << kk << " modes; ";
    }
    out.cond = std::max(out.cond, sol.cond);
    out.modes_used = std::min(out.modes_used, kk);
    *residual = sol.rel_residual;
    return std::vector<double>(sol.x.data(), sol.x.data() + sol.x.size());
  };

  std::vector<int> all(nt), early, late;
  for (int i = 0; i < nt; ++i) {
    all[i] = i;
    (trace.times[i] <= sig_lo ? early : late).push_back(i);
  }

  switch (split) {
    case SourceSplit::ic_only:
      out.ic_modes = fit_family(all, relax, stack_data(all), &out.ic_residual);
      break;
    case SourceSplit::source_only:
      if (late.empty())
        throw std::invalid_argument(
            "source recovery: no samples past the source onset");
      out.source_modes =
          fit_family(late, duh, stack_data(late), &out.source_residual);
      break;
    case SourceSplit::time_split: {
      if (static_cast<int>(early.size()) * nj < n_modes)
        throw std::invalid_argument(
            "source recovery: not enough samples before the source onset");
      if (late.empty())
        throw std::invalid_argument(
            "source recovery: no samples past the source onset");
      out.ic_modes =
          fit_family(early, relax, stack_data(early), &out.ic_residual);
      // subtract the recovered initial-state response, then the remainder is
      // pure source
      Eigen::VectorXd y2 = stack_data(late);
      const int kk = static_cast<int>(out.ic_modes.size());
      Eigen::VectorXd ic(kk);
      for (int k = 0; k < kk; ++k) ic[k] = out.ic_modes[k];
      y2 -= stack(late, relax, kk) * ic;
      out.source_modes = fit_family(late, duh, y2, &out.source_residual);
      break;
    }
  }
  out.note = note.str();
  return out;
}

ObstacleScanResult obstacle_scan(const DomainSpec& base,
                                 const CoefficientField& cf, double alpha,
                                 const ExcitationSchedule& sch,
                                 const std::vector<ObstacleBox>& candidates,
                                 const LaplaceSamples& truth) {
  if (base.dim != 2)
    throw std::invalid_argument("obstacle scan: 2D domains only");
  if (truth.p_values.empty() || truth.nodes.empty() ||
      truth.values.rows() != static_cast<int>(truth.p_values.size()) ||
      truth.values.cols() != static_cast<int>(truth.nodes.size()))
    throw std::invalid_argument("obstacle scan: malformed truth samples");

  ObstacleScanResult out;
  out.candidates = candidates;
  out.objective.assign(candidates.size(), kNaN);
  out.notes.assign(candidates.size(), "");
  out.best_objective = std::numeric_limits<double>::infinity();

  for (size_t c = 0; c < candidates.size(); ++c) {
    const ObstacleBox& box = candidates[c];
    const bool empty_box = !(box.x0 < box.x1) || !(box.y0 < box.y1);
    if (!empty_box && (box.x0 <= 0.0 || box.x1 >= base.lx || box.y0 <= 0.0 ||
                       box.y1 >= base.ly)) {
      out.notes[c] = "candidate touches the outer boundary, skipped";
      continue;
    }
    DomainSpec spec = base;
    spec.mask_fn = nullptr;
    spec.ox0 = empty_box ? 1.0 : box.x0;
    spec.ox1 = empty_box ? 0.0 : box.x1;
    spec.oy0 = empty_box ? 1.0 : box.y0;
    spec.oy1 = empty_box ? 0.0 : box.y1;
    const GridDomain dom = build_domain(spec);
    const DiscreteOperator op = assemble(dom, cf);
    if (sch.profile_nodes() != static_cast<int>(dom.gamma_in.size()))
      throw std::invalid_argument(
          "obstacle scan: schedule profile does not match gamma_in");

    double obj = 0.0;
    for (size_t pi = 0; pi < truth.p_values.size(); ++pi) {
      const double p = truth.p_values[pi];
      const double amp = input_signal_transform(sch, 1, p);
      Eigen::VectorXd g =
          Eigen::VectorXd::Zero(static_cast<int>(op.border.size()));
      for (size_t i = 0; i < dom.gamma_in.size(); ++i)
        g[op.border_index(dom.gamma_in[i])] =
            amp * sch.chi(static_cast<int>(i)) * sch.eta(1, static_cast<int>(i));
      const Eigen::VectorXd v = resolvent_solve(op, alpha, p, g);
      const std::vector<double> flux = resolvent_flux(op, v, g, truth.nodes);
      for (size_t j = 0; j < truth.nodes.size(); ++j) {
        const double d = flux[j] - truth.values(static_cast<int>(pi),
                                                static_cast<int>(j));
        obj += dom.boundary_weight(truth.nodes[j]) * d * d;
      }
    }
    out.objective[c] = obj;
    if (obj < out.best_objective) {
      out.best_objective = obj;
      out.best = static_cast<int>(c);
    }
  }
  return out;
}

DtnComparison dtn_compare(const DiscreteOperator& opA,
                          const DiscreteOperator& opB, double alpha,
                          const std::vector<double>& p_grid,
                          const std::vector<std::vector<double>>& probes) {
  if (opA.dom.gamma_in != opB.dom.gamma_in ||
      opA.dom.gamma_out != opB.dom.gamma_out || opA.border != opB.border)
    throw std::invalid_argument("dtn compare: boundary layouts differ");
  if (p_grid.empty() || probes.empty())
    throw std::invalid_argument("dtn compare: empty p grid or probe set");
  for (const auto& probe : probes)
    if (probe.size() != opA.dom.gamma_in.size())
      throw std::invalid_argument("dtn compare: probe size does not match gamma_in");

  if (opA.has_drift || opB.has_drift) {
    const double floor =
        std::max(p_floor(opA, alpha), p_floor(opB, alpha));
    if (!(p_grid.front() > floor)) {
      std::ostringstream os;
      os << "dtn compare: with drift the p grid must stay above the "
            "coercivity floor p1 = "
         << floor;
      throw std::invalid_argument(os.str());
    }
  }

  const GridDomain& dom = opA.dom;
  const std::vector<int>& where = dom.gamma_out;  // collected without corners

  DtnComparison out;
  out.p_values = p_grid;
  out.per_probe.resize(static_cast<int>(p_grid.size()),
                       static_cast<int>(probes.size()));
  out.max_discrepancy.assign(p_grid.size(), 0.0);

  for (size_t pi = 0; pi < p_grid.size(); ++pi) {
    const ResolventFactor fa(opA, alpha, p_grid[pi]);
    const ResolventFactor fb(opB, alpha, p_grid[pi]);
    for (size_t qi = 0; qi < probes.size(); ++qi) {
      Eigen::VectorXd g =
          Eigen::VectorXd::Zero(static_cast<int>(opA.border.size()));
      for (size_t i = 0; i < dom.gamma_in.size(); ++i)
        g[opA.border_index(dom.gamma_in[i])] = probes[qi][i];
      const std::vector<double> fluxA =
          resolvent_flux(opA, fa.solve(g), g, where);
      const std::vector<double> fluxB =
          resolvent_flux(opB, fb.solve(g), g, where);
      double acc = 0.0;
      for (size_t j = 0; j < where.size(); ++j) {
        const double d = fluxA[j] - fluxB[j];
        acc += dom.boundary_weight(where[j]) * d * d;
      }
      const double disc = std::sqrt(acc);
      out.per_probe(static_cast<int>(pi), static_cast<int>(qi)) = disc;
      out.max_discrepancy[pi] = std::max(out.max_discrepancy[pi], disc);
    }
  }
  return out;
}

WindowVerdict window_rigidity_experiment(const TimeTrace& a,
                                         const TimeTrace& b, double win_lo,
                                         double win_hi, double alpha,
                                         double support_end, double tol) {
  if (a.times != b.times || a.observation_nodes != b.observation_nodes)
    throw std::invalid_argument(
        "rigidity check: traces must share the time grid and channels");
  if (!(win_lo < win_hi))
    throw std::invalid_argument("rigidity check: bad window");
  if (win_lo < support_end)
    throw std::invalid_argument(
        "rigidity check: the window overlaps the input support");
  if (a.times.empty() || a.times.front() != 0.0)
    throw std::invalid_argument(
        "rigidity check: the Caputo history must start at t = 0");

  const int nt = static_cast<int>(a.times.size());
  const int nj = static_cast<int>(a.observation_nodes.size());
  if (a.values.size() != static_cast<size_t>(nt) ||
      b.values.size() != static_cast<size_t>(nt))
    throw std::invalid_argument("rigidity check: malformed trace");
  for (int i = 0; i < nt; ++i)
    if (a.values[i].size() != static_cast<size_t>(nj) ||
        b.values[i].size() != static_cast<size_t>(nj))
      throw std::invalid_argument("rigidity check: ragged trace");
  Eigen::MatrixXd delta(nt, nj);
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < nj; ++j)
      delta(i, j) = a.values[i][j] - b.values[i][j];

  SteppingPlan plan;
  plan.alpha = alpha;
  plan.times = a.times;
  plan.validate();

  WindowVerdict out;
  out.tol = tol;
  for (int n = 1; n < nt; ++n) {
    const double t = a.times[n];
    if (t < win_lo || t > win_hi) continue;
    out.trace_norm =
        std::max(out.trace_norm, delta.row(n).cwiseAbs().maxCoeff());
    const std::vector<double> w = plan.history_weights(n);
    for (int j = 0; j < nj; ++j) {
      double acc = 0.0;
      for (int m = 0; m < n; ++m)
        acc += w[m] * (delta(m + 1, j) - delta(m, j));
      out.caputo_norm = std::max(out.caputo_norm, std::fabs(acc));
    }
  }
  out.distinguished = std::max(out.trace_norm, out.caputo_norm) > tol;
  out.note = out.distinguished ? "distinguished" : "matched within tolerance";
  return out;
}

void InverseReport::validate() const {
  if (alpha.points > 0 && !(alpha.alpha_hat > 0.0 && alpha.alpha_hat < 2.0))
    throw std::domain_error("inverse report: recovered order outside (0, 2)");
  for (size_t k = 1; k < spectral.lambda.size(); ++k)
    if (!(spectral.lambda[k] >= spectral.lambda[k - 1]))
      throw std::domain_error("inverse report: eigenvalue estimates unsorted");
}

}  // namespace fdlab
