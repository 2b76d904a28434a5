#include "fdlab/laplace.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "fdlab/mlf.hpp"
#include "fdlab/numerics.hpp"
#include "fdlab/spectral.hpp"
#include "fdlab/stepper.hpp"

using namespace fdlab;

TEST_SUITE_BEGIN("laplace");

namespace {

constexpr double kPi = 3.14159265358979323846;

DiscreteOperator unit_interval(int nx, double a = 1.0, double rho = 1.0,
                               double q = 0.0) {
  DomainSpec s;
  s.dim = 1;
  s.nx = nx;
  GridDomain d = build_domain(s);
  return assemble(d, CoefficientField::constant(d, a, rho, q));
}

TimeTrace single_node_trace(const std::vector<double>& t,
                            const std::vector<double>& y, int node) {
  TimeTrace tr;
  tr.times = t;
  tr.observation_nodes = {node};
  for (double v : y) tr.values.push_back({v});
  return tr;
}

// quiet start, fine through the active window, coarse over the settled run-out
std::vector<double> layered_times(double t_fine, double h_fine, double horizon,
                                  double h_coarse, int graded_head = 0,
                                  double head_until = 0.0) {
  std::vector<double> t;
  if (graded_head > 0) {
    for (int i = 0; i < graded_head; ++i) {
      const double s = double(i) / graded_head;
      t.push_back(head_until * s * s * s);
    }
  } else {
    t.push_back(0.0);
  }
  const double start = t.back();
  const int nf = static_cast<int>(std::ceil((t_fine - start) / h_fine));
  for (int i = 1; i <= nf; ++i) t.push_back(start + (t_fine - start) * i / nf);
  const int nc = static_cast<int>(std::ceil((horizon - t_fine) / h_coarse));
  for (int i = 1; i <= nc; ++i) t.push_back(t_fine + (horizon - t_fine) * i / nc);
  return t;
}

}  // namespace

TEST_CASE("transform reproduces textbook pairs with certified tails") {
  SUBCASE("plateau trace") {
    std::vector<double> t, y;
    for (int i = 0; i <= 400; ++i) {
      t.push_back(20.0 * i / 400.0);
      y.push_back(1.0);
    }
    const LaplaceSamples out = transform(single_node_trace(t, y, 0), {2.0});
    CHECK(out.values(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::abs(out.values(0, 0) - 0.5) <=
          1.01 * out.tail_bounds(0, 0) + 1e-15);
  }
  SUBCASE("decaying exponential") {
    std::vector<double> t, y;
    for (int i = 0; i <= 10000; ++i) {
      t.push_back(12.0 * i / 10000.0);
      y.push_back(std::exp(-3.0 * t.back()));
    }
    const LaplaceSamples out = transform(single_node_trace(t, y, 0), {1.0});
    CHECK(out.values(0, 0) == doctest::Approx(0.25).epsilon(1e-8));
  }
  SUBCASE("relaxation kernel meets its own symbol") {
    // the kernel blows up at 0 like t^(alpha-1), so the mesh grades hard into
    // the origin; the missed head is O(sqrt(t_1)) and far below tolerance
    std::vector<double> t, y;
    for (int i = 1; i <= 2500; ++i) {
      const double s = double(i) / 2500.0;
      t.push_back(25.0 * std::pow(s, 6));
      y.push_back(relaxation_kernel({0.5, 1.0, t.back()}));
    }
    const LaplaceSamples out = transform(single_node_trace(t, y, 0), {4.0});
    CHECK(out.values(0, 0) ==
          doctest::Approx(kernel_laplace(0.5, 1.0, 4.0)).epsilon(1e-6));
  }
  SUBCASE("zero trace stays zero") {
    std::vector<double> t(50), y(50, 0.0);
    for (int i = 0; i < 50; ++i) t[i] = i * 0.1;
    const LaplaceSamples out = transform(single_node_trace(t, y, 7), {1.0, 3.0});
    CHECK(out.values.cwiseAbs().maxCoeff() == 0.0);
    CHECK(out.tail_bounds.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("short slow trace refuses to certify") {
    std::vector<double> t, y;
    for (int i = 0; i <= 100; ++i) {
      t.push_back(5.0 * i / 100.0);
      y.push_back(std::pow(1.0 + t.back(), -1.5));
    }
    bool threw = false;
    try {
      transform(single_node_trace(t, y, 0), {0.5});
    } catch (const std::runtime_error& e) {
      threw = true;
      CHECK(std::string(e.what()).find("p=0.5") != std::string::npos);
    }
    CHECK(threw);
  }
}

TEST_CASE("power tail extension certifies a slow algebraic decay") {
  std::vector<double> t, y;
  for (int i = 0; i <= 4000; ++i) {
    t.push_back(1.0 + 39.0 * i / 4000.0);
    y.push_back(std::pow(t.back(), -1.7));
  }
  const TimeTrace tr = single_node_trace(t, y, 0);
  const double ref =
      integrate([](double s) { return std::pow(s, -1.7) * std::exp(-0.25 * s); },
                1.0, 200.0, 1e-15, 1e-13)
          .value;

  // plain envelope: fine at a loose threshold, hopeless at a tight one
  TransformOptions loose;
  loose.certify_rel = 1e-5;
  CHECK_NOTHROW(transform(tr, {0.25}, loose));
  TransformOptions tight;
  tight.certify_rel = 1e-8;
  CHECK_THROWS_AS(transform(tr, {0.25}, tight), std::runtime_error);

  // the fitted tail both certifies and recovers the full integral
  TransformOptions powered;
  powered.certify_rel = 1e-8;
  powered.power_tail = true;
  const LaplaceSamples out = transform(tr, {0.25}, powered);
  CHECK(out.values(0, 0) == doctest::Approx(ref).epsilon(1e-7));
  CHECK(out.tail_bounds(0, 0) <= 1e-8 * std::abs(out.values(0, 0)));
}

TEST_CASE("resolvent matches the discrete sinh ladder") {
  const int nx = 512;
  const double h = 1.0 / nx;
  const DiscreteOperator op = unit_interval(nx);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(op.border.size());
  g[op.border_index(0)] = 1.0;

  const double alpha = 0.6;
  for (double p : {1.0, 2.3, 4.0}) {
    const double s = std::pow(p, alpha);
    // cosh(mu h) = 1 + s h^2 / 2 in a cancellation-free form
    const double mu = 2.0 / h * std::asinh(0.5 * h * std::sqrt(s));
    const auto exact = [&](double x) {
      return std::sinh(mu * (1.0 - x)) / std::sinh(mu);
    };
    const Eigen::VectorXd V = resolvent_solve(op, alpha, p, g);
    double worst = 0.0, worst_cont = 0.0;
    for (int k = 0; k < op.n; ++k) {
      const double x = op.dom.x_of(op.dom.fluid[k]);
      worst = std::max(worst, std::abs(V[k] - exact(x)));
      const double cont =
          std::sinh(std::sqrt(s) * (1.0 - x)) / std::sinh(std::sqrt(s));
      worst_cont = std::max(worst_cont, std::abs(V[k] - cont));
    }
    CHECK(worst < 1e-9);
    CHECK(worst_cont < 1e-4);

    const double fx = resolvent_flux(op, V, g, {nx})[0];
    const double fx_exact =
        (3.0 * exact(1.0) - 4.0 * exact(1.0 - h) + exact(1.0 - 2.0 * h)) /
        (2.0 * h);
    CHECK(fx == doctest::Approx(fx_exact).epsilon(1e-8));
    CHECK(fx == doctest::Approx(-std::sqrt(s) / std::sinh(std::sqrt(s)))
                    .epsilon(2e-4));
  }

  SUBCASE("drift pushes the admissible p up") {
    DomainSpec s;
    s.dim = 1;
    s.nx = 64;
    GridDomain d = build_domain(s);
    CoefficientField cf = CoefficientField::constant(d, 1.0, 1.0, 0.0);
    cf.bx.assign(d.node_count(), 3.0);
    const DiscreteOperator opd = assemble(d, cf);
    CHECK(p_floor(opd, 0.5) == doctest::Approx(100.0).epsilon(1e-12));
    Eigen::VectorXd gd = Eigen::VectorXd::Zero(opd.border.size());
    gd[opd.border_index(0)] = 1.0;
    CHECK_THROWS_AS(resolvent_solve(opd, 0.5, 50.0, gd), std::invalid_argument);

    const double p = 150.0;
    const Eigen::VectorXd V = resolvent_solve(opd, 0.5, p, gd);
    SpMat sys = opd.stiffness;
    sys = SpMat(sys + opd.drift);
    const Eigen::VectorXd lhs =
        sys * V + std::pow(p, 0.5) * opd.mass.cwiseProduct(V).eval();
    const Eigen::VectorXd rhs = opd.boundary_coupling * gd;
    CHECK((lhs - rhs).norm() < 1e-10 * rhs.norm());
  }
}

TEST_CASE("contour kernel collapses to the classical exponential") {
  const ContourSpec cs;
  CHECK(contour_kernel(cs, 1.0, 2.0, 1.0) ==
        doctest::Approx(std::exp(-2.0)).epsilon(1e-8));
  CHECK(contour_kernel(cs, 1.0, 5.0, 0.3) ==
        doctest::Approx(std::exp(-1.5)).epsilon(1e-8));
  ContourSpec shifted;
  shifted.r1 = 0.5;
  CHECK(contour_kernel(shifted, 1.0, 2.0, 1.0) ==
        doctest::Approx(std::exp(-2.0)).epsilon(1e-8));
}

TEST_CASE("contour kernel agrees with the series kernel across the grid") {
  const ContourSpec cs;
  for (double alpha : {0.3, 0.5, 0.8, 1.2, 1.5}) {
    for (double lambda : {1.0, 10.0, 100.0}) {
      for (double z : {0.1, 1.0, 5.0}) {
        const double want = relaxation_kernel({alpha, lambda, z});
        const double got = contour_kernel(cs, alpha, lambda, z);
        CHECK(std::abs(got - want) <=
              1e-6 * std::max(std::abs(want), 1e-30) + 1e-13);
      }
    }
  }
}

TEST_CASE("contour choices are immaterial") {
  const double lambda = 3.0, z = 1.3;
  for (double alpha : {0.5, 1.5}) {
    const double want = relaxation_kernel({alpha, lambda, z});
    for (double dscale : {0.5, 1.0, 2.0}) {
      for (double tfrac : {0.60, 0.75, 0.85}) {
        ContourSpec cs;
        cs.delta = dscale / z;
        cs.theta1 = tfrac * kPi;
        const double got = contour_kernel(cs, alpha, lambda, z);
        CHECK(got == doctest::Approx(want).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("per mode magnitude bound holds on refinement") {
  const ContourSpec cs;
  for (double alpha : {0.5, 1.2}) {
    for (double lambda : {1.0, 10.0}) {
      const auto envelope = [&](double z) {
        return std::max(std::pow(z, alpha - 1.0), 1.0);
      };
      double C = 0.0;
      for (int i = 0; i < 60; ++i) {
        const double z =
            0.01 * std::pow(20.0 / 0.01, double(i) / 59.0);
        C = std::max(C, std::abs(contour_kernel(cs, alpha, lambda, z)) /
                            envelope(z));
      }
      C *= 1.05;
      for (int i = 0; i < 301; ++i) {
        const double z =
            0.01 * std::pow(20.0 / 0.01, double(i) / 300.0);
        CHECK(std::abs(contour_kernel(cs, alpha, lambda, z)) <=
              C * envelope(z));
      }
    }
  }
}

TEST_CASE("weak form residual: spectral runs sit near machine level") {
  const int nx = 64;
  const DiscreteOperator op = unit_interval(nx);
  const std::vector<double> pgrid = {1.0, 2.0, 4.0};
  const std::vector<double> times = layered_times(3.0, 0.01, 30.0, 0.1, 120, 0.3);

  SUBCASE("single decaying mode") {
    const SpectralDecomposition dec = eigensolve(op, 1);
    const std::vector<double> zerob(op.dom.node_count(), 0.0);
    const std::vector<double> u0 =
        op.dom.unpack(0.7 * dec.eigenvectors.col(0), zerob);
    ForwardOptions fo;
    fo.store_nodal = true;
    const ForwardRun run = forward_source(
        op, dec, [](double) { return 0.0; }, 0.0, 0.1,
        std::vector<double>(op.dom.node_count(), 0.0), u0, 0.5, times, {nx}, fo);
    WeakForm wf;
    wf.u0 = op.dom.pack(u0);
    const std::vector<double> res =
        weak_solution_residual(op, 0.5, times, run.nodal, wf, pgrid);
    for (double r : res) CHECK(r < 1e-6);
  }

  SUBCASE("modulated source with initial state") {
    const SpectralDecomposition dec = eigensolve(op, 8);
    const std::vector<double> zerob(op.dom.node_count(), 0.0);
    const std::vector<double> f = op.dom.unpack(
        0.8 * dec.eigenvectors.col(1) - 0.5 * dec.eigenvectors.col(4), zerob);
    const std::vector<double> u0 = op.dom.unpack(
        0.7 * dec.eigenvectors.col(0) + 0.1 * dec.eigenvectors.col(2), zerob);
    const auto sigma = [](double t) {
      const double s = (t - 0.2) / 1.0;
      if (s <= 0.0 || s >= 1.0) return 0.0;
      return std::exp(4.0 - 1.0 / (s * (1.0 - s)));
    };
    ForwardOptions fo;
    fo.store_nodal = true;
    const ForwardRun run =
        forward_source(op, dec, sigma, 0.2, 1.2, f, u0, 0.5, times, {nx}, fo);
    WeakForm wf;
    wf.sigma = sigma;
    wf.fhat = op.dom.pack(f);
    wf.u0 = op.dom.pack(u0);
    const std::vector<double> res =
        weak_solution_residual(op, 0.5, times, run.nodal, wf, pgrid);
    for (double r : res) CHECK(r < 1e-5);

    // the L1 march of the same problem carries its time discretization error
    SteppingPlan plan = SteppingPlan::graded(0.5, 30.0, 800);
    StepperOptions so;
    so.store_nodal = true;
    const StepperRun mrun = step_source(op, plan, sigma, f, u0, {nx}, so);
    const std::vector<double> mres =
        weak_solution_residual(op, 0.5, plan.times, mrun.nodal, wf, pgrid);
    for (double r : mres) {
      CHECK(r < 1e-3);
      CHECK(r > 1e-8);  // it is a march, not the exact transform
    }
  }

  SUBCASE("zero data zero residual") {
    Eigen::MatrixXd nodal =
        Eigen::MatrixXd::Zero(op.dom.node_count(), 10);
    std::vector<double> t(10);
    for (int i = 0; i < 10; ++i) t[i] = i * 0.5;
    const std::vector<double> res =
        weak_solution_residual(op, 0.5, t, nodal, WeakForm{}, {1.0});
    CHECK(res[0] == 0.0);
  }
}

TEST_CASE("transform of the forward trace meets the resolvent flux") {
  const int nx = 48;
  const DiscreteOperator op = unit_interval(nx);
  const SpectralDecomposition dec = eigensolve(op, nx - 1);
  ScheduleSpec ss;
  ss.profile_nodes = static_cast<int>(op.dom.gamma_in.size());
  const ExcitationSchedule sch(ss);
  const double alpha = 0.6;
  const std::vector<double> times = layered_times(3.0, 0.01, 30.0, 0.1);
  ForwardOptions fo;
  fo.store_nodal = true;
  const ForwardRun run =
      forward_dirichlet(op, dec, sch, 0, alpha, times, {nx}, fo);

  const std::vector<double> pgrid = {1.0, 2.0, 4.0};
  const LaplaceSamples hat = transform(run.trace, pgrid);
  for (std::size_t ip = 0; ip < pgrid.size(); ++ip) {
    const double p = pgrid[ip];
    Eigen::VectorXd g = Eigen::VectorXd::Zero(op.border.size());
    for (std::size_t i = 0; i < op.dom.gamma_in.size(); ++i) {
      const auto f = [&](double t) {
        return std::exp(-p * t) * sch.value(t, static_cast<int>(i));
      };
      g[op.border_index(op.dom.gamma_in[i])] =
          integrate(f, 0.0, 1.0, 1e-14, 1e-12).value;
    }
    const Eigen::VectorXd V = resolvent_solve(op, alpha, p, g);
    const double fx = resolvent_flux(op, V, g, {nx})[0];
    CHECK(hat.values(static_cast<int>(ip), 0) ==
          doctest::Approx(fx).epsilon(1e-5));
  }

  WeakForm wf;
  wf.bvalue = [&sch](double t, int g) { return sch.value(t, g); };
  const std::vector<double> res =
      weak_solution_residual(op, alpha, times, run.nodal, wf, pgrid);
  for (double r : res) CHECK(r < 1e-5);
}

TEST_CASE("argument checking") {
  const DiscreteOperator op = unit_interval(16);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(op.border.size());

  ContourSpec bad;
  bad.theta1 = 0.3;
  CHECK_THROWS_AS(contour_kernel(bad, 0.5, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(contour_kernel(ContourSpec{}, 4.0 / 3.0, 1.0, 1.0),
                  std::runtime_error);
  ContourSpec on_arc;
  on_arc.delta = 1.0;  // pole radius of lambda = 1
  CHECK_THROWS_AS(contour_kernel(on_arc, 1.5, 1.0, 1.0), std::runtime_error);
  CHECK_THROWS_AS(contour_kernel(ContourSpec{}, 2.0, 1.0, 1.0),
                  std::invalid_argument);

  std::vector<double> t(20), y(20, 0.0);
  for (int i = 0; i < 20; ++i) t[i] = 0.1 * i;
  const TimeTrace tr = single_node_trace(t, y, 0);
  CHECK_THROWS_AS(transform(tr, {2.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(transform(tr, {-1.0}), std::invalid_argument);
  TimeTrace shorttr = tr;
  shorttr.times.resize(4);
  shorttr.values.resize(4);
  CHECK_THROWS_AS(transform(shorttr, {1.0}), std::invalid_argument);

  CHECK_THROWS_AS(resolvent_solve(op, 0.5, 0.0, g), std::invalid_argument);
  CHECK_THROWS_AS(resolvent_solve(op, 2.0, 1.0, g), std::invalid_argument);
  CHECK_THROWS_AS(
      resolvent_solve(op, 0.5, 1.0, Eigen::VectorXd::Zero(3)),
      std::invalid_argument);

  Eigen::MatrixXd nodal = Eigen::MatrixXd::Zero(3, 10);
  std::vector<double> tt(10);
  for (int i = 0; i < 10; ++i) tt[i] = i * 0.1;
  CHECK_THROWS_AS(
      weak_solution_residual(op, 0.5, tt, nodal, WeakForm{}, {1.0}),
      std::invalid_argument);
}

TEST_SUITE_END();
