#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "volterra/errors.hpp"
#include "volterra/kernels.hpp"

using namespace volterra;

namespace {

// Gamma(0.75), frozen from the Lanczos oracle.
constexpr double kGamma075 = 1.2254167024651776;

double sup_diff(const ResolventGrid& R, const std::function<double(double)>& f, std::size_t from = 0) {
  double s = 0.0;
  for (std::size_t n = from; n < R.values.size(); ++n)
    s = std::max(s, std::abs(R.values[n](0, 0) - f(R.grid.t(n))));
  return s;
}

}  // namespace

TEST_CASE("eval: constant, exponential and normalized power law") {
  CHECK(eval(Kernel(ScalarKernel::power_law(0.5, false)), 3.7)(0, 0) == 1.0);
  CHECK(eval(Kernel(ScalarKernel::exponential(1.0)), 0.0)(0, 0) == 1.0);
  CHECK(oracle::gamma(0.75) == doctest::Approx(kGamma075).epsilon(1e-13));
  const double v = eval(Kernel(ScalarKernel::power_law(0.25, true)), 1.0)(0, 0);
  CHECK(v == doctest::Approx(1.0 / oracle::gamma(0.75)).epsilon(1e-12));
  CHECK(v == doctest::Approx(1.0 / kGamma075).epsilon(1e-14));
}

TEST_CASE("eval: errors at and below the origin") {
  const Kernel K(ScalarKernel::power_law(0.3));
  CHECK_THROWS_AS(eval(K, 0.0), SingularAtOrigin);
  CHECK_THROWS_AS(eval(K, -1.0), NonPositiveTime);
  CHECK_NOTHROW(eval(Kernel(ScalarKernel::power_law(0.7)), 0.0));
  CHECK_THROWS_AS(ScalarKernel::power_law(1.2), InvalidArgument);
}

TEST_CASE("eval_shifted: definition and semigroup law") {
  const Kernel P(ScalarKernel::power_law(0.3, false));
  CHECK(eval_shifted(P, 0.1, 0.0)(0, 0) == doctest::Approx(std::pow(0.1, -0.2)).epsilon(1e-14));
  const Kernel E(ScalarKernel::exponential(1.0));
  CHECK(eval_shifted(E, 0.4, 0.7)(0, 0) == doctest::Approx(std::exp(-1.1)).epsilon(1e-14));
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.001, 2.0);
  for (int i = 0; i < 200; ++i) {
    const double d1 = u(gen), d2 = u(gen), x = u(gen);
    for (const Kernel& K : {P, E}) {
      // Shifts are stored as offsets, so both sides evaluate the same argument.
      CHECK(eval_shifted(K, d1 + d2, x)(0, 0) == eval_shifted(K.shifted(d1), d2, x)(0, 0));
    }
  }
}

TEST_CASE("derivative: power rule, exponential, tabulated") {
  const double H = 0.35, t = 0.8;
  CHECK(derivative(Kernel(ScalarKernel::power_law(H, false)), t)(0, 0) ==
        doctest::Approx((H - 0.5) * std::pow(t, H - 1.5)).epsilon(1e-14));
  CHECK(derivative(Kernel(ScalarKernel::exponential(2.5)), t)(0, 0) ==
        doctest::Approx(-2.5 * std::exp(-2.5 * t)).epsilon(1e-14));
  CHECK_THROWS_AS(derivative(Kernel(ScalarKernel::power_law(H)), 0.0), SingularAtOrigin);
  std::vector<double> ts, vs;
  for (int i = 0; i <= 200000; ++i) {
    const double s = 0.5 + 1.0 * i / 200000.0;
    ts.push_back(s);
    vs.push_back(std::pow(s, 0.4 - 0.5));
  }
  const ScalarKernel tab = ScalarKernel::tabulated(ts, vs);
  CHECK(std::abs(tab.derivative(1.0) + 0.1) <= 1e-6);
}

TEST_CASE("cell integrals are exact") {
  const ScalarKernel k = ScalarKernel::power_law(0.3, false);
  const double a = 0.01, b = 0.37;
  CHECK(k.integral(a, b) == doctest::Approx((std::pow(b, 0.8) - std::pow(a, 0.8)) / 0.8).epsilon(1e-13));
  CHECK(k.square_integral(0.0, b) == doctest::Approx(oracle::power_sq_integral(0.3, 0.0, b)).epsilon(1e-13));
  const ScalarKernel ks = k.shifted(0.2);
  CHECK(ks.integral(a, b) ==
        doctest::Approx(oracle::simpson([](double s) { return std::pow(s + 0.2, -0.2); }, a, b)).epsilon(1e-10));
}

TEST_CASE("second-kind resolvent: constant kernel") {
  const TimeGrid g{1.0, 4096};
  const double a = 1.3;
  const Matrix am(1, 1, a);
  const Kernel K(ScalarKernel::power_law(0.5, false));
  const ResolventGrid R = resolvent_second_kind(K, am, g);
  CHECK(sup_diff(R, [&](double t) { return a * std::exp(-a * t); }) < 1e-4);
  const ResolventGrid Z = resolvent_second_kind(K, Matrix(1, 1, 0.0), g);
  for (const auto& m : Z.values) CHECK(m(0, 0) == 0.0);
}

TEST_CASE("second-kind resolvent: exponential kernel against Picard iteration") {
  const std::size_t n = 2048;
  const TimeGrid g{2.0, n};
  const Kernel K(ScalarKernel::exponential(1.0));
  const ResolventGrid R = resolvent_second_kind(K, Matrix(1, 1, 1.0), g);
  const auto P = oracle::picard_resolvent([](double t) { return std::exp(-t); }, 1.0, 2.0, n);
  double sp = 0.0;
  for (std::size_t i = 0; i <= n; ++i) sp = std::max(sp, std::abs(R.values[i](0, 0) - P[i]));
  CHECK(sp < 2e-3);
  CHECK(sup_diff(R, [](double t) { return std::exp(-2 * t); }) < 2e-3);
}

TEST_CASE("second-kind resolvent: residual is first order") {
  for (const Kernel& K : {Kernel(ScalarKernel::power_law(0.5, false)), Kernel(ScalarKernel::exponential(1.0))}) {
    const Matrix a(1, 1, 0.8);
    const double r1 = resolvent_residual(K, a, resolvent_second_kind(K, a, TimeGrid{1.0, 1024}));
    const double r2 = resolvent_residual(K, a, resolvent_second_kind(K, a, TimeGrid{1.0, 2048}));
    CHECK(oracle::near_rel(r1 / r2, 2.0, 0.25));
  }
}

TEST_CASE("second-kind resolvent: matrix case and stability guard") {
  const Kernel K({ScalarKernel::power_law(0.5, false), ScalarKernel::exponential(1.0)});
  Matrix a(2, 2);
  a(0, 0) = 0.5;
  a(0, 1) = 0.2;
  a(1, 0) = -0.3;
  a(1, 1) = 0.7;
  const TimeGrid g{1.0, 1024};
  const ResolventGrid R = resolvent_second_kind(K, a, g);
  CHECK(resolvent_residual(K, a, R) < 1e-3);
  CHECK_THROWS_AS(resolvent_second_kind(Kernel(ScalarKernel::power_law(0.5, false)), Matrix(1, 1, 40.0),
                                        TimeGrid{1.0, 16}),
                  GridTooCoarse);
}

TEST_CASE("scalar resolvent: constant and zero kernels") {
  const TimeGrid g{1.0, 1 << 14};
  const double c = 1.0;
  std::vector<double> k(g.size(), c), z(g.size(), 0.0);
  const ResolventGrid r = scalar_resolvent(k, g);
  CHECK(sup_diff(r, [&](double t) { return c * std::exp(c * t); }) < 1e-4);
  const ResolventGrid r0 = scalar_resolvent(z, g);
  for (const auto& m : r0.values) CHECK(m(0, 0) == 0.0);
  k[5] = -1.0;
  CHECK_THROWS_AS(scalar_resolvent(k, g), NegativeKernel);
}

TEST_CASE("scalar resolvent: trapezoid residual is first order") {
  double prev = 0.0;
  for (std::size_t n : {512u, 1024u}) {
    const TimeGrid g{1.0, n};
    std::vector<double> k(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) k[i] = 1.0 + g.t(i);
    const auto kappa = cell_integrals(k, g);
    const double r = scalar_trapezoid_residual(k, kappa, scalar_resolvent(k, g));
    if (prev > 0.0) CHECK(oracle::near_rel(prev / r, 2.0, 0.25));
    prev = r;
  }
}

TEST_CASE("scalar resolvent of the shifted-kernel norm is self-consistent") {
  const Kernel K(ScalarKernel::power_law(0.35));
  const WeightSpec w{0.6, 1.0, 0.35};
  const TimeGrid g{1.0, 1 << 14};
  std::vector<double> k(g.size());
  k[0] = INFINITY;
  for (std::size_t n = 1; n < g.size(); ++n) k[n] = shifted_h1w_norm_sq(K, g.t(n), w);
  // Trapezoid cells except the first, which carries the t^{-0.7} singularity.
  std::vector<double> kappa(g.size(), 0.0);
  const double dt = g.dt();
  kappa[1] = oracle::singular_simpson([&](double t) { return shifted_h1w_norm_sq(K, t, w); }, 0.0, dt, 1e-12);
  for (std::size_t i = 2; i < g.size(); ++i) kappa[i] = 0.5 * dt * (k[i - 1] + k[i]);
  const ResolventGrid r = scalar_resolvent_from_cells(k, kappa, g);
  for (std::size_t n = 1; n < g.size(); ++n) CHECK_MESSAGE(r.values[n](0, 0) >= 0.0, n);
  CHECK(scalar_consistency_residual(k, kappa, r) <= 1e-6);
}

TEST_CASE("gronwall: closed-form instances") {
  const TimeGrid g{1.0, 512};
  std::vector<double> f(g.size()), x(g.size()), zero(g.size(), 0.0), one(g.size(), 1.0);
  for (std::size_t n = 0; n < g.size(); ++n) f[n] = x[n] = 1.0 + std::sin(3.0 * g.t(n));
  const GronwallReport a = verify_gronwall(x, f, zero, g);
  CHECK(a.pass);
  CHECK(a.min_slack == 0.0);
  std::vector<double> e(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) e[n] = std::exp(g.t(n));
  const GronwallReport b = verify_gronwall(e, one, one, g);
  CHECK(b.pass);
  // bound ~ 1 + int_0^t e^s ds = e^t
  CHECK(oracle::near_rel(b.bound.back(), std::exp(1.0), 1e-2));
}

TEST_CASE("gronwall: random instances satisfying the hypothesis always pass") {
  const TimeGrid g{1.0, 200};
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int r = 0; r < 100; ++r) {
    std::vector<double> k(g.size()), x(g.size()), f(g.size());
    const double level = 0.5 + 2.0 * u(gen);
    for (std::size_t n = 0; n < g.size(); ++n) {
      k[n] = level * u(gen);
      x[n] = 2.0 * u(gen) - 0.5;
    }
    const auto kappa = cell_integrals(k, g);
    for (std::size_t n = 0; n < g.size(); ++n) {
      double conv = 0.0;
      for (std::size_t i = 1; i <= n; ++i) conv += kappa[i] * x[n - i + 1];
      f[n] = x[n] - conv + u(gen);
    }
    CHECK(verify_gronwall(x, f, k, g).pass);
  }
}

TEST_CASE("gronwall: violated hypothesis is reported") {
  const TimeGrid g{1.0, 64};
  std::vector<double> x(g.size(), 2.0), f(g.size(), 1.0), k(g.size(), 0.0);
  CHECK_THROWS_AS(verify_gronwall(x, f, k, g), HypothesisViolated);
}

TEST_CASE("assumption checks on the power-law example") {
  const Kernel K(ScalarKernel::power_law(0.3));
  const WeightSpec w{0.5, 1.0, 0.3};
  const KernelConditionReport ok = verify_assumptions(K, w, 2.2, 1.0);
  CHECK(ok.cond1.pass);
  CHECK(ok.cond2.pass);
  CHECK(ok.cond3.pass);
  CHECK(ok.q_low == 2.0);
  CHECK(ok.q_high == doctest::Approx(2.0 / 0.9).epsilon(1e-12));
  const KernelConditionReport bad = verify_assumptions(K, w, 3.0, 1.0);
  CHECK_FALSE(bad.cond1.pass);
  const AdmissibleInterval iv = admissible_q_interval(0.3, 0.5);
  CHECK_FALSE(iv.empty);
  CHECK(iv.high == doctest::Approx(2.0 / 0.9).epsilon(1e-12));
  CHECK(admissible_q_interval(0.2, 0.5).empty);
  CHECK(default_q(0.3, 0.5) == doctest::Approx(0.5 * (2.0 + 2.0 / 0.9)).epsilon(1e-12));
}
