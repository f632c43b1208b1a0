#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "volterra/errors.hpp"
#include "volterra/sve.hpp"

using namespace volterra;

namespace {

// 1 / (2H Gamma(H + 1/2)^2), frozen from the Gamma oracle.
constexpr double kVarH03 = 1.22962133832426142;

double fbm2_variance(double H, double t) {
  const double g = oracle::gamma(H + 0.5);
  return std::pow(t, 2 * H) / (2 * H * g * g);
}

std::vector<double> terminal(const PathEnsemble& e, std::size_t i = 0) {
  std::vector<double> x(e.n_paths);
  for (std::size_t p = 0; p < e.n_paths; ++p) x[p] = e.X(p, e.grid.steps, i);
  return x;
}

}  // namespace

TEST_CASE("Brownian case is exact at the nodes") {
  const Model m = presets::brownian(0.7, 1.0);
  const TimeGrid g{1.0, 50};
  const PathEnsemble e = simulate(m, g, 4000, 17);
  double worst = 0.0;
  for (std::size_t p = 0; p < e.n_paths; ++p) {
    double w = 0.0;
    for (std::size_t n = 0; n <= g.steps; ++n) {
      worst = std::max(worst, std::abs(e.X(p, n) - 0.7 - w));
      if (n < g.steps) w += e.dw(p, n)[0];
    }
  }
  CHECK(worst < 1e-12);
  std::vector<double> sq;
  for (double x : terminal(e)) sq.push_back((x - 0.7) * (x - 0.7));
  const MCEstimate v = estimate(sq);
  CHECK(v.within(1.0, 3.0));
  const MomentReport mr = moment_sup(e, 2.0);
  CHECK(mr.sup.within(0.49 + 1.0, 3.0));
}

TEST_CASE("increments are standard Gaussian with variance dt") {
  const TimeGrid g{2.0, 40};
  const PathEnsemble e = simulate(presets::brownian(), g, 2000, 3);
  std::vector<double> s1, s2;
  for (double w : e.dW) {
    s1.push_back(w);
    s2.push_back(w * w);
  }
  CHECK(estimate(s1).within(0.0, 4.0));
  CHECK(estimate(s2).within(g.dt(), 4.0));
}

TEST_CASE("type-II fBm variance and moments") {
  CHECK(fbm2_variance(0.3, 1.0) == doctest::Approx(kVarH03).epsilon(1e-13));
  const Model m = presets::fbm_type2(0.3, default_beta(0.3));
  const TimeGrid g{1.0, 64};
  const PathEnsemble e = simulate(m, g, 20000, 5);
  const MomentReport m2 = moment_sup(e, 2.0);
  CHECK(m2.per_time.back().within(kVarH03, 3.0));
  CHECK(m2.sup.mean <= kVarH03 + 3.0 * m2.sup.std_error + 1e-12);
  // The variance is increasing, so the sup sits at T.
  CHECK(m2.argmax == g.steps);
  const MomentReport m4 = moment_sup(e, 4.0);
  CHECK(m4.per_time.back().within(3.0 * kVarH03 * kVarH03, 3.0));
  // Every node: the scheme preserves the isometry cell by cell.
  for (std::size_t n = 8; n <= g.steps; n += 8) CHECK(m2.per_time[n].within(fbm2_variance(0.3, g.t(n)), 4.0));
}

TEST_CASE("rough Bergomi log-price mean at small vol-of-vol") {
  const double H = 0.1, v0 = -1.0, nu = 0.05;
  const Model m = presets::rough_bergomi(H, default_beta(H), v0, -0.7, nu);
  const TimeGrid g{1.0, 50};
  const PathEnsemble e = simulate(m, g, 20000, 8);
  // E psi(V_{t_k})^2 = exp(2 v0 + 2 nu^2 Var V_{t_k}); the drift is left-point in each cell.
  double want = 0.0;
  for (std::size_t k = 0; k < g.steps; ++k)
    want += -0.5 * g.dt() * std::exp(2 * v0 + 2 * nu * nu * fbm2_variance(H, g.t(k)));
  const MCEstimate got = estimate(terminal(e, 0));
  CHECK(got.within(want, 3.0));
  // Continuum first-order expansion: -1/2 int_0^1 e^{2 v0} ds.
  CHECK(oracle::near_rel(want, -0.5 * std::exp(2 * v0), 2e-2));
}

TEST_CASE("mollified scheme: coupling, large shift and mean-square distance") {
  const double H = 0.35;
  const Model m = presets::fbm_type2(H, default_beta(H));
  const TimeGrid g{1.0, 64};
  const double delta = 4 * g.dt();
  const PathEnsemble a = simulate(m, g, 20000, 21);
  const PathEnsemble b = simulate_mollified(m, delta, g, 20000, 21);
  CHECK(a.dW == b.dW);
  std::vector<double> d2(a.n_paths);
  for (std::size_t p = 0; p < a.n_paths; ++p) {
    const double d = a.X(p, g.steps) - b.X(p, g.steps);
    d2[p] = d * d;
  }
  // Discrete oracle: sum over cells of (sqrt(A_j) - sqrt(A_j^delta))^2 with exact cell L^2 masses.
  const double c = 1.0 / oracle::gamma(H + 0.5);
  double discrete = 0.0;
  for (std::size_t j = 1; j <= g.steps; ++j) {
    const double lo = g.t(j - 1), hi = g.t(j);
    const double A = c * c * oracle::power_sq_integral(H, lo, hi);
    const double Ad = c * c * oracle::power_sq_integral(H, lo + delta, hi + delta);
    discrete += (std::sqrt(A) - std::sqrt(Ad)) * (std::sqrt(A) - std::sqrt(Ad));
  }
  const double continuum = oracle::singular_simpson(
      [&](double s) {
        const double k = c * (std::pow(s, H - 0.5) - std::pow(s + delta, H - 0.5));
        return k * k;
      },
      0.0, 1.0, 1e-12);
  const MCEstimate est = estimate(d2);
  CHECK(est.within(discrete, 3.0));
  CHECK(oracle::near_rel(discrete, continuum, 0.2));

  const Model ex = m.with_kernel(Kernel(ScalarKernel::exponential(1.0)));
  const PathEnsemble far = simulate_mollified(ex, 30.0, g, 200, 4);
  double worst = 0.0;
  for (double x : far.v) worst = std::max(worst, std::abs(x));
  CHECK(worst < 1e-10);
}

TEST_CASE("Ito formula residuals") {
  const TimeGrid g{1.0, 32};
  SUBCASE("identity without drift is the mild equation") {
    const Model m = presets::fbm_type2(0.3, default_beta(0.3));
    const PathEnsemble e = simulate(m, g, 500, 2);
    const MCEstimate r = ito_formula_residual(m, e, TestFunction::identity(), 0, g.steps);
    CHECK(std::abs(r.mean) < 1e-12);
    CHECK(r.std_error < 1e-12);
  }
  SUBCASE("square, Brownian case") {
    const Model m = presets::brownian(0.3);
    const PathEnsemble e = simulate(m, g, 20000, 9);
    CHECK(ito_formula_residual(m, e, TestFunction::square(), 0, g.steps).within(0.0, 3.0));
  }
  SUBCASE("square, type-II fBm") {
    const Model m = presets::fbm_type2(0.3, default_beta(0.3));
    const PathEnsemble e = simulate(m, g, 20000, 10);
    CHECK(ito_formula_residual(m, e, TestFunction::square(), 0, g.steps).within(0.0, 3.0));
    CHECK(ito_formula_residual(m, e, TestFunction::square(), 8, 24).within(0.0, 3.0));
  }
  SUBCASE("tanh, smooth coefficients: the bias is first order in dt") {
    const Model m = presets::smooth(0.3, default_beta(0.3));
    std::vector<double> r;
    for (std::size_t N : {16u, 64u}) {
      const TimeGrid gn{1.0, N};
      r.push_back(ito_formula_residual(m, simulate(m, gn, 20000, 12), TestFunction::tanh(), 0, N).mean);
    }
    CHECK(oracle::near_rel(r[0] / r[1], 4.0, 0.4));
  }
  SUBCASE("missing lift terms") {
    const Model m = presets::brownian();
    SimOptions o;
    o.store_coefficients = false;
    const PathEnsemble e = simulate(m, g, 10, 1, o);
    CHECK_THROWS_AS(ito_formula_residual(m, e, TestFunction::square(), 0, g.steps), MissingLift);
  }
}

TEST_CASE("determinism across worker counts and reruns") {
  const Model m = presets::smooth(0.3, default_beta(0.3));
  const TimeGrid g{1.0, 40};
  set_threads(1);
  const PathEnsemble a = simulate(m, g, 300, 77);
  set_threads(4);
  const PathEnsemble b = simulate(m, g, 300, 77);
  set_threads(0);
  CHECK(a.v == b.v);
  CHECK(a.dW == b.dW);
  CHECK(a.cA == b.cA);
  const PathEnsemble c = simulate(m, g, 300, 78);
  CHECK(a.v != c.v);
}

TEST_CASE("antithetic pairs negate increments") {
  SimOptions o;
  o.antithetic = true;
  const TimeGrid g{1.0, 16};
  const PathEnsemble e = simulate(presets::brownian(), g, 10, 3, o);
  for (std::size_t k = 0; k < g.steps; ++k) CHECK(e.dw(0, k)[0] == -e.dw(1, k)[0]);
}

TEST_CASE("unstable configuration is detected") {
  const Model m = presets::linear(0.5, 0.5, 1e5, 1.0, 1.0);
  CHECK_THROWS_AS(simulate(m, TimeGrid{100.0, 100}, 4, 1), UnstableConfig);
}
