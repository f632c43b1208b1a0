#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "volterra/errors.hpp"
#include "volterra/lift.hpp"

using namespace volterra;

namespace {

Curve bump(double a, double m, double s) {
  return Curve::analytic(
      1, [=](double x, double* o) { o[0] = a * std::exp(-0.5 * (x - m) * (x - m) / (s * s)); },
      [=](double x, double* o) {
        o[0] = -a * (x - m) / (s * s) * std::exp(-0.5 * (x - m) * (x - m) / (s * s));
      });
}

}  // namespace

TEST_CASE("pure transport without drift and noise") {
  const Model m = presets::gaussian(0.3, default_beta(0.3), 0.0, 0.0)
                      .with_initial(InitialCurve::deterministic(bump(1.5, 0.8, 0.3)));
  const TimeGrid g{1.0, 32};
  const auto nodes = default_lift_nodes(g, 24, 4.0);
  const LiftEnsemble L = simulate_lift(m, g, nodes, 3, 1);
  double worst = 0.0;
  for (std::size_t ti = 0; ti < L.times.size(); ++ti)
    for (std::size_t q = 0; q < nodes.size(); ++q)
      worst = std::max(worst, std::abs(L.value(2, ti, q) - bump(1.5, 0.8, 0.3).value(g.t(L.times[ti]) + nodes[q])));
  CHECK(worst == 0.0);
}

TEST_CASE("lift identity at x = 0 is bitwise for every preset") {
  const TimeGrid g{1.0, 16};
  for (const Model& m : {presets::brownian(0.2), presets::fbm_type2(0.3, default_beta(0.3)),
                         presets::fbm_type1(0.3, default_beta(0.3)), presets::ou_stationary(),
                         presets::rough_bergomi(0.1, default_beta(0.1)),
                         presets::rough_heston(0.3, default_beta(0.3)),
                         presets::smooth(0.3, default_beta(0.3)),
                         presets::linear(0.35, default_beta(0.35), -0.5)}) {
    const LiftEnsemble L = simulate_lift(m, g, default_lift_nodes(g, 12, 2.0), 20, 4);
    bool same = true;
    for (std::size_t p = 0; p < 20; ++p)
      for (std::size_t ti = 0; ti < L.times.size(); ++ti)
        for (std::size_t i = 0; i < m.d(); ++i)
          same = same && L.value(p, ti, 0, i) == L.paths.X(p, L.times[ti], i);
    CHECK_MESSAGE(same, m.name);
  }
}

TEST_CASE("variance of lambda(t, x) follows the Ito isometry") {
  const double H = 0.3;
  const Model m = presets::fbm_type2(H, default_beta(H));
  const TimeGrid g{1.0, 32};
  const auto nodes = default_lift_nodes(g, 16, 3.0);
  const LiftEnsemble L = simulate_lift(m, g, nodes, 20000, 6, {}, {g.steps});
  const double c = 1.0 / oracle::gamma(H + 0.5);
  for (std::size_t q = 0; q < nodes.size(); q += 3) {
    std::vector<double> sq(L.paths.n_paths);
    for (std::size_t p = 0; p < sq.size(); ++p) sq[p] = L.value(p, 0, q) * L.value(p, 0, q);
    const double want = c * c * oracle::power_sq_integral(H, nodes[q], 1.0 + nodes[q]);
    CHECK_MESSAGE(estimate(sq).within(want, 3.0), "x = " << nodes[q]);
  }
}

TEST_CASE("flow restart reproduces the stored lift") {
  const TimeGrid g{1.0, 32};
  const auto nodes = default_lift_nodes(g, 16, 3.0);
  const LiftEnsemble b = simulate_lift(presets::brownian(0.5), g, nodes, 50, 3);
  CHECK(flow_restart_check(b, 0).sup_discrepancy == 0.0);
  CHECK(flow_restart_check(b, 16).sup_discrepancy <= 1e-12);
  const LiftEnsemble r = simulate_lift(presets::rough_bergomi(0.1, default_beta(0.1)), g, nodes, 50, 3);
  CHECK(flow_restart_check(r, 16).sup_discrepancy <= 1e-10);
  SimOptions o;
  o.store_increments = false;
  const LiftEnsemble none = simulate_lift(presets::brownian(0.5), g, nodes, 5, 3, o);
  CHECK_THROWS_AS(flow_restart_check(none, 16), IncrementMissing);
}

TEST_CASE("forward curve: zero drift, constant kernel, power law") {
  const TimeGrid g{1.0, 100};
  const auto nodes = default_lift_nodes(g, 12, 2.0);
  std::vector<std::size_t> times{25, 50, 100};
  SUBCASE("a = 0") {
    const Model m = presets::linear(0.35, default_beta(0.35), 0.0, 1.0, 1.0)
                        .with_initial(InitialCurve::deterministic(bump(1.0, 0.5, 0.4)));
    const LiftEnsemble L = simulate_lift(m, g, nodes, 4000, 2, {}, times);
    for (const auto& row : forward_curve_check(L)) {
      CHECK(row.exact == doctest::Approx(bump(1.0, 0.5, 0.4).value(row.t + row.x)).epsilon(1e-14));
      CHECK(row.mc.within(row.exact, 3.5));
    }
  }
  SUBCASE("K = 1, a = -1, X_0 = 1") {
    const Model m = presets::linear(0.5, 0.5, -1.0, 1.0, 1.0);
    const LiftEnsemble L = simulate_lift(m, g, nodes, 20000, 3, {}, times);
    for (const auto& row : forward_curve_check(L)) {
      // lambda(t, x) = X_t for the constant kernel. The resolvent quadrature is first order.
      CHECK(std::abs(row.exact - std::exp(-row.t)) <= 1e-3);
      CHECK(std::abs(row.mean_X - std::exp(-(row.t + row.x))) <= 1e-3);
      CHECK(row.mc.within(row.exact, 3.0));
    }
  }
  SUBCASE("power law H = 0.35, a = -0.5") {
    const Model m = presets::linear(0.35, default_beta(0.35), -0.5, 1.0, 1.0);
    const LiftEnsemble L = simulate_lift(m, g, nodes, 20000, 4, {}, times);
    double worst = 0.0;
    for (const auto& row : forward_curve_check(L)) worst = std::max(worst, row.mc.z_score(row.exact));
    CHECK(worst <= 3.0);
  }
  SUBCASE("nonlinear drift is refused") {
    const Model m = presets::smooth(0.3, default_beta(0.3));
    const LiftEnsemble L = simulate_lift(m, TimeGrid{1.0, 8}, {0.0, 0.125}, 4, 1);
    CHECK_THROWS_AS(forward_curve_check(L), NonlinearDrift);
  }
}

TEST_CASE("Kolmogorov-Smirnov statistic") {
  std::vector<double> a{0.1, 0.5, -0.3, 2.0, 1.1};
  const KSResult same = ks_two_sample(a, a);
  CHECK(same.statistic == 0.0);
  CHECK(same.p_value == doctest::Approx(1.0));
  std::vector<double> lo, hi;
  for (int i = 0; i < 200; ++i) {
    lo.push_back(i / 200.0);
    hi.push_back(10.0 + i / 200.0);
  }
  const KSResult far = ks_two_sample(lo, hi);
  CHECK(far.statistic == 1.0);
  CHECK(far.p_value < 1e-10);
}

TEST_CASE("Markov property: restarted and continued marginals agree") {
  const TimeGrid g{1.0, 16};
  const std::vector<double> nodes = default_lift_nodes(g, 8, 1.0);
  for (const Model& m : {presets::brownian(0.0), presets::fbm_type2(0.3, default_beta(0.3))}) {
    int accepted = 0;
    for (int r = 0; r < 100; ++r) {
      const LiftEnsemble L = simulate_lift(m, g, nodes, 400, 1000 + r);
      if (markov_statistic(L, 8, 5000 + r).p_value > 0.01) ++accepted;
    }
    CHECK_MESSAGE(accepted >= 95, m.name << ": " << accepted);
  }
}

TEST_CASE("temporal regularity and invariance spot check") {
  const double H = 0.3, beta = default_beta(H);
  const Model m = presets::fbm_type2(H, beta);
  const TimeGrid g{1.0, 64};
  const WeightedSpace space(m.weight, SpaceGrid::standard(1e-4, 1.3, 0.1, 20.0));
  const LiftEnsemble L = simulate_lift(m, g, default_lift_nodes(g, 24, 4.0), 200, 8);
  const double q = default_q(H, beta);
  const HolderReport hr = holder_exponent(L, space, 16, 4);
  CHECK(hr.exponent >= (q - 2.0) / (2.0 * q) - 0.1);

  const Kernel K = m.kernel;
  const Model mk = m.with_initial(InitialCurve::deterministic(kernel_curve(K).shifted(1.0)));
  const LiftEnsemble Lk = simulate_lift(mk, g, default_lift_nodes(g, 24, 4.0), 10, 9);
  const std::vector<double> deltas{g.dt(), 2 * g.dt(), 4 * g.dt()};
  for (const auto& per_path : invariance_norms(Lk, space, deltas))
    for (double n : per_path) CHECK(std::isfinite(n));
}
