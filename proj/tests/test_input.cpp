#include "fdlab/input.hpp"

#include <cmath>
#include <utility>

#include "doctest.h"
#include "fdlab/numerics.hpp"

using fdlab::ExcitationSchedule;
using fdlab::ScheduleSpec;

TEST_SUITE_BEGIN("input");

namespace {

ScheduleSpec base_spec(int k, int nodes = 1) {
  ScheduleSpec s;
  s.tau1 = 0.25;
  s.tau2 = 1.0;
  s.components = k;
  s.profile_nodes = nodes;
  return s;
}

}  // namespace

TEST_CASE("spec validation") {
  ScheduleSpec s = base_spec(2);
  CHECK_NOTHROW(ExcitationSchedule{s});
  s.tau2 = 0.2;
  CHECK_THROWS_AS(ExcitationSchedule{s}, std::invalid_argument);
  s = base_spec(0);
  CHECK_THROWS_AS(ExcitationSchedule{s}, std::invalid_argument);
  s = base_spec(2, 0);
  CHECK_THROWS_AS(ExcitationSchedule{s}, std::invalid_argument);
}

TEST_CASE("switch times accumulate geometrically") {
  ExcitationSchedule sch(base_spec(3));
  CHECK(sch.step_time(0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(sch.step_time(1) == doctest::Approx(0.625).epsilon(1e-15));
  CHECK(sch.step_time(2) == doctest::Approx(0.8125).epsilon(1e-15));
  CHECK(sch.step_time(3) == doctest::Approx(0.90625).epsilon(1e-15));
  for (int j = 0; j < 20; ++j) {
    CHECK(sch.step_time(j + 1) > sch.step_time(j));
    CHECK(sch.step_time(j) < 1.0);
  }
  CHECK(sch.step_time(40) == doctest::Approx(1.0).epsilon(1e-11));
}

TEST_CASE("steps vanish before their window and hold the plateau after") {
  ExcitationSchedule sch(base_spec(3));
  for (int k = 2; k <= 3; ++k) {
    double lo = sch.step_time(2 * k - 2);
    double hi = sch.step_time(2 * k - 1);
    CHECK(sch.psi(k, lo) == 0.0);
    CHECK(sch.psi(k, lo - 0.05) == 0.0);
    CHECK(sch.psi(k, hi) == sch.plateau(k));
    CHECK(sch.psi(k, hi + 0.2) == sch.plateau(k));
    CHECK(sch.psi(k, 100.0) == sch.plateau(k));
    // the bridge is symmetric, so the midpoint sits at half the plateau
    CHECK(sch.psi(k, 0.5 * (lo + hi)) ==
          doctest::Approx(0.5 * sch.plateau(k)).epsilon(1e-12));
  }
}

TEST_CASE("probe component is a one-signed unit-mass bump") {
  ExcitationSchedule sch(base_spec(2));
  double lo = sch.step_time(0), hi = sch.step_time(1);
  for (int i = 0; i <= 400; ++i) {
    double t = lo - 0.1 + (hi - lo + 0.2) * i / 400.0;
    CHECK(sch.psi(1, t) >= 0.0);
  }
  CHECK(sch.psi(1, lo) == 0.0);
  CHECK(sch.psi(1, hi) == 0.0);
  CHECK(sch.psi(1, 0.5 * (lo + hi)) > 0.0);
  fdlab::QuadResult mass = fdlab::integrate(
      [&](double t) { return sch.psi(1, t); }, lo, hi, 1e-13, 1e-11);
  CHECK(mass.value == doctest::Approx(1.0).epsilon(1e-9));
  // compact support: widening the quadrature window changes nothing
  fdlab::QuadResult wide = fdlab::integrate(
      [&](double t) { return sch.psi(1, t); }, 0.0, hi + 0.3, 1e-13, 1e-11);
  CHECK(wide.value == doctest::Approx(mass.value).epsilon(1e-9));
}

TEST_CASE("windows are nested and the input starts quiescent") {
  ExcitationSchedule sch(base_spec(3));
  auto w0 = sch.window_of(0);
  CHECK(w0.first == 0.0);
  CHECK(w0.second == doctest::Approx(0.25).epsilon(1e-15));
  auto w1 = sch.window_of(1);
  CHECK(w1.second == doctest::Approx(sch.step_time(2)).epsilon(1e-15));
  for (int k = 0; k < 3; ++k)
    CHECK(sch.window_of(k).second < sch.window_of(k + 1).second);
  CHECK_THROWS_AS(sch.window_of(4), std::out_of_range);
  // nothing moves before tau1
  for (double t : {0.0, 0.1, 0.2499}) CHECK(sch.value(t, 0) == 0.0);
  // on (0, t_{2k}) the components above k are still identically zero
  for (int k = 1; k <= 2; ++k) {
    double end = sch.window_of(k).second;
    for (int j = k + 1; j <= 3; ++j) {
      CHECK(sch.psi(j, 0.999 * end) == 0.0);
      CHECK(sch.psi(j, end) == 0.0);
    }
  }
}

TEST_CASE("probe-only schedule switches off completely") {
  ExcitationSchedule sch(base_spec(1));
  for (double t : {0.63, 0.8, 1.5, 10.0}) CHECK(sch.value(t, 0) == 0.0);
  double mid = 0.5 * (sch.step_time(0) + sch.step_time(1));
  CHECK(sch.value(mid, 0) != 0.0);
}

TEST_CASE("transitions are numerically smooth to third order") {
  ExcitationSchedule sch(base_spec(2));
  for (int k = 1; k <= 2; ++k) {
    double lo = sch.step_time(2 * k - 2);
    double hi = sch.step_time(2 * k - 1);
    double h = (hi - lo) / 4096.0;
    double interior = sch.w3_norm(k);
    CHECK(interior > 0.0);
    CHECK(std::isfinite(interior));
    for (double edge : {lo, hi}) {
      double d1 = (sch.psi(k, edge + h) - sch.psi(k, edge - h)) / (2 * h);
      double d2 = (sch.psi(k, edge + h) - 2 * sch.psi(k, edge) +
                   sch.psi(k, edge - h)) / (h * h);
      double d3 = (sch.psi(k, edge + 2 * h) - 2 * sch.psi(k, edge + h) +
                   2 * sch.psi(k, edge - h) - sch.psi(k, edge - 2 * h)) /
                  (2 * h * h * h);
      // all derivatives die at the junction; scale by the interior sup
      CHECK(std::fabs(d1) <= 1e-8 * interior);
      CHECK(std::fabs(d2) <= 1e-8 * interior);
      CHECK(std::fabs(d3) <= 1e-8 * interior);
    }
  }
}

TEST_CASE("weights keep the weighted norms summable") {
  double prev_sum = 0.0, max_term = 0.0;
  for (int kk = 1; kk <= 5; ++kk) {
    ExcitationSchedule sch(base_spec(kk));
    double sum = 0.0;
    for (int k = 1; k <= kk; ++k) {
      double term = sch.weight(k) * sch.w3_norm(k);
      sum += term;
      max_term = std::max(max_term, term);
      CHECK(sch.weight(k) > 0.0);
      if (k > 1) CHECK(sch.weight(k) < sch.weight(k - 1));
    }
    if (kk > 1) {
      double inc = sum - prev_sum;
      CHECK(inc < std::pow(2.0, -(kk - 1) + 1) * max_term);
    }
    prev_sum = sum;
  }
}

TEST_CASE("profiles are unit vectors and the probe profile keeps one sign") {
  ExcitationSchedule sch(base_spec(4, 12));
  for (int k = 1; k <= 4; ++k) {
    double nrm = 0.0;
    for (int i = 0; i < 12; ++i) nrm += sch.eta(k, i) * sch.eta(k, i);
    CHECK(nrm == doctest::Approx(1.0).epsilon(1e-12));
  }
  double mass = 0.0;
  for (int i = 0; i < 12; ++i) {
    CHECK(sch.eta(1, i) >= 0.0);
    CHECK(sch.chi(i) >= 0.0);
    CHECK(sch.chi(i) <= 1.0);
    mass += sch.chi(i) * sch.eta(1, i);
  }
  CHECK(mass > 0.0);         // chi eta_1 not identically zero
  CHECK(sch.chi(5) == 1.0);  // flat plateau of the cutoff
  CHECK(sch.chi(0) < 1.0);   // rolloff at the edge
  // single-node boundary degenerates to the constant profile
  ExcitationSchedule one(base_spec(3, 1));
  for (int k = 1; k <= 3; ++k) CHECK(one.eta(k, 0) == doctest::Approx(1.0));
}

TEST_CASE("full input is the sum of its components") {
  ExcitationSchedule sch(base_spec(3, 6));
  for (double t : {0.3, 0.7, 0.87, 0.95}) {
    for (int node : {0, 3, 5}) {
      double s = 0.0;
      for (int k = 1; k <= 3; ++k) s += sch.component_value(k, t, node);
      CHECK(sch.value(t, node) == doctest::Approx(s).epsilon(1e-15));
    }
  }
}

TEST_SUITE_END();
