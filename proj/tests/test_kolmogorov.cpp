#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "volterra/errors.hpp"
#include "volterra/kolmogorov.hpp"

using namespace volterra;

namespace {

Curve bump(double a, double m, double s) {
  return Curve::analytic(
      1, [=](double x, double* o) { o[0] = a * std::exp(-0.5 * (x - m) * (x - m) / (s * s)); },
      [=](double x, double* o) {
        o[0] = -a * (x - m) / (s * s) * std::exp(-0.5 * (x - m) * (x - m) / (s * s));
      });
}

constexpr double H = 0.35;
const TimeGrid kGrid{1.0, 32};

WeightedSpace space_for(const Model& m) {
  return WeightedSpace(m.weight, SpaceGrid::standard(1e-4, 1.3, 0.1, 20.0));
}

// int_t^T K(T - s)^2 ds for the normalized power law.
double kernel_mass(double tau) {
  const double c = 1.0 / oracle::gamma(H + 0.5);
  return c * c * oracle::power_sq_integral(H, 0.0, tau);
}

double combined_se(const MCEstimate& a, const MCEstimate& b) {
  return std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
}

}  // namespace

TEST_CASE("value function: closed-form cases and terminal condition") {
  const Model m = presets::gaussian(H, default_beta(H), 1.0, 0.0);
  const WeightedSpace sp = space_for(m);
  const Curve y = bump(1.0, 0.4, 0.3), g = bump(1.0, 1.0, 0.5);
  const std::size_t s = 8;
  const double tau = kGrid.T - kGrid.t(s);
  SUBCASE("linear cylinder") {
    const Payoff phi = Payoff::cylinder(ScalarFn::identity, g, sp);
    const double want = sp.inner_h1w(y.shifted(tau), g);
    CHECK(value(m, phi, kGrid, s, y, 4000, 1).within(want, 3.0));
    CHECK(closed_form_value(m, phi, kGrid, s, y).value() == doctest::Approx(want).epsilon(1e-12));
  }
  SUBCASE("pointwise square") {
    const Payoff phi = Payoff::pointwise(ScalarFn::square);
    const double want = y.value(tau) * y.value(tau) + kernel_mass(tau);
    CHECK(value(m, phi, kGrid, s, y, 20000, 2).within(want, 3.0));
    CHECK(closed_form_value(m, phi, kGrid, s, y).value() == doctest::Approx(want).epsilon(1e-12));
  }
  SUBCASE("terminal time") {
    const Payoff phi = Payoff::pointwise(ScalarFn::tanh);
    const MCEstimate u = value(m, phi, kGrid, kGrid.steps, y, 10, 3);
    CHECK(u.mean == std::tanh(y.value(0.0)));
    CHECK(u.std_error == 0.0);
  }
  SUBCASE("non-compliant models are refused") {
    const Model rh = presets::rough_heston(H, default_beta(H));
    CHECK_THROWS_AS(value(rh, Payoff::pointwise(ScalarFn::identity, 2), kGrid, 0, rh.x0.base(), 10, 1),
                    ModelNotCompliant);
  }
}

TEST_CASE("singular gradient") {
  const Curve y = bump(0.5, 0.4, 0.3), g = bump(1.0, 1.0, 0.5);
  const std::vector<double> deltas{8 * kGrid.dt(), 4 * kGrid.dt(), 2 * kGrid.dt(), kGrid.dt()};
  const std::size_t s = 4;
  const double tau = kGrid.T - kGrid.t(s);
  SUBCASE("linear payoff, source-only case: exact") {
    const Model m = presets::gaussian(H, default_beta(H));
    const WeightedSpace sp = space_for(m);
    const Payoff phi = Payoff::cylinder(ScalarFn::identity, g, sp);
    const SweepReport r = singular_gradient(m, phi, kGrid, s, y, Direction::kernel_column(m.kernel, 0.0, 0), deltas, 50, 1);
    for (const auto& row : r.rows) {
      const double want = sp.inner_h1w(kernel_curve(m.kernel, tau + row.delta), g);
      CHECK(row.estimate.mean == doctest::Approx(want).epsilon(1e-9));
    }
    REQUIRE(r.extrapolated.has_value());
  }
  SUBCASE("smooth direction: flat sweep") {
    const Model m = presets::smooth(H, default_beta(H));
    const Payoff phi = Payoff::cylinder(ScalarFn::tanh, g, space_for(m));
    const SweepReport r = singular_gradient(m, phi, kGrid, s, y, Direction::curve(bump(1.0, 0.5, 0.3)), deltas, 2000, 2);
    // S(delta) h -> h in H^1_w: the sweep is Lipschitz in delta, so differences shrink with the step.
    std::vector<double> diffs;
    for (std::size_t i = 1; i < r.rows.size(); ++i)
      diffs.push_back(std::abs(r.rows[i].estimate.mean - r.rows[i - 1].estimate.mean) /
                      (r.rows[i - 1].delta - r.rows[i].delta));
    for (double d : diffs) CHECK(d <= 2.0 * diffs[0]);
    CHECK(std::abs(r.rows.back().estimate.mean - r.rows[r.rows.size() - 2].estimate.mean) <=
          0.1 * std::abs(r.rows.back().estimate.mean));
  }
  SUBCASE("kernel direction: Cauchy behavior") {
    const Model m = presets::smooth(H, default_beta(H));
    const Payoff phi = Payoff::cylinder(ScalarFn::tanh, g, space_for(m));
    std::vector<double> ds{16 * kGrid.dt(), 8 * kGrid.dt(), 4 * kGrid.dt(), 2 * kGrid.dt(), kGrid.dt()};
    const SweepReport r = singular_gradient(m, phi, kGrid, s, y, Direction::kernel_column(m.kernel, 0.0, 0), ds, 4000, 3);
    for (std::size_t i = 2; i < r.rows.size(); ++i) {
      const double d_prev = std::abs(r.rows[i - 1].estimate.mean - r.rows[i - 2].estimate.mean);
      const double d = std::abs(r.rows[i].estimate.mean - r.rows[i - 1].estimate.mean);
      CHECK(d <= d_prev + 3.0 * combined_se(r.rows[i].estimate, r.rows[i - 1].estimate));
    }
  }
  SUBCASE("gradient bound: bounded ratio against |S(T - t) h|") {
    const Model m = presets::smooth(H, default_beta(H));
    const WeightedSpace sp = space_for(m);
    const Payoff phi = Payoff::cylinder(ScalarFn::tanh, g, sp);
    const Direction h = Direction::curve(bump(1.0, 0.5, 0.3));
    const std::vector<double> one{0.0};
    std::vector<double> ratios;
    for (std::size_t st : {0u, 8u, 16u, 24u}) {
      const double grad = singular_gradient(m, phi, kGrid, st, y, h, one, 1000, 4).rows[0].estimate.mean;
      ratios.push_back(std::abs(grad) / sp.norm_h1w(h.as_curve().shifted(kGrid.T - kGrid.t(st))));
    }
    for (double r : ratios) CHECK(r <= 1.0);
  }
}

TEST_CASE("singular Hessian") {
  const Curve y = bump(0.5, 0.4, 0.3), g = bump(1.0, 1.0, 0.5);
  const std::vector<double> deltas{4 * kGrid.dt(), 2 * kGrid.dt(), kGrid.dt()};
  const std::size_t s = 4;
  const double tau = kGrid.T - kGrid.t(s);
  const Model m = presets::gaussian(H, default_beta(H));
  const WeightedSpace sp = space_for(m);
  const Direction K = Direction::kernel_column(m.kernel, 0.0, 0);
  SUBCASE("linear payoff: zero") {
    const SweepReport r = singular_hessian(m, Payoff::cylinder(ScalarFn::identity, g, sp), kGrid, s, y, K, deltas, 20, 1);
    for (const auto& row : r.rows) CHECK(row.estimate.mean == 0.0);
  }
  SUBCASE("quadratic payoff: 2 <S(T - t) K_delta, g>^2") {
    const SweepReport r = singular_hessian(m, Payoff::cylinder(ScalarFn::square, g, sp), kGrid, s, y, K, deltas, 20, 1);
    for (const auto& row : r.rows) {
      const double l = sp.inner_h1w(kernel_curve(m.kernel, tau + row.delta), g);
      CHECK(row.estimate.mean == doctest::Approx(2.0 * l * l).epsilon(1e-9));
    }
  }
  SUBCASE("guard below H = 1/4") {
    const Model rough = presets::smooth(0.2, default_beta(0.2));
    CHECK_THROWS_AS(singular_hessian(rough, Payoff::pointwise(ScalarFn::tanh), kGrid, s, y,
                                     Direction::kernel_column(rough.kernel, 0.0, 0), deltas, 10, 1),
                    HurstBelowThreshold);
  }
  SUBCASE("smooth coefficients: Cauchy behavior and bounded size") {
    const Model sm = presets::smooth(H, default_beta(H));
    std::vector<double> ds{16 * kGrid.dt(), 8 * kGrid.dt(), 4 * kGrid.dt(), 2 * kGrid.dt(), kGrid.dt()};
    const SweepReport r = singular_hessian(sm, Payoff::cylinder(ScalarFn::tanh, g, space_for(sm)), kGrid, s, y,
                                           Direction::kernel_column(sm.kernel, 0.0, 0), ds, 4000, 5);
    for (std::size_t i = 2; i < r.rows.size(); ++i) {
      const double d_prev = std::abs(r.rows[i - 1].estimate.mean - r.rows[i - 2].estimate.mean);
      const double d = std::abs(r.rows[i].estimate.mean - r.rows[i - 1].estimate.mean);
      CHECK(d <= d_prev + 3.0 * combined_se(r.rows[i].estimate, r.rows[i - 1].estimate));
    }
    // |D^2 u (K_delta, K_delta)|^2 <= C (1 + n^2 + n^4), n = |S((T - t)/2) K|.
    const double n = space_for(sm).norm_h1w(kernel_curve(sm.kernel, 0.5 * tau));
    for (const auto& row : r.rows) {
      const double v = row.estimate.mean;
      CHECK(v * v <= 10.0 * (1.0 + n * n + n * n * n * n));
    }
  }
}

TEST_CASE("backward PDE residual") {
  const Curve y = bump(0.5, 0.4, 0.3), g = bump(1.0, 1.0, 0.5);
  const std::size_t s = 16;
  SUBCASE("linear payoff, source-only case: transport identity") {
    const Model m = presets::gaussian(H, default_beta(H));
    const Payoff phi = Payoff::cylinder(ScalarFn::identity, g, space_for(m));
    // Deterministic part: the central difference of the closed-form u plus the transport term
    // is a second-order stencil error.
    auto stencil = [&](std::size_t fd) {
      const double up = closed_form_value(m, phi, kGrid, s + fd, y).value();
      const double dn = closed_form_value(m, phi, kGrid, s - fd, y).value();
      const PDEResidualReport r = pde_residual(m, phi, kGrid, s, y, kGrid.dt(), fd, 20, 1);
      return std::make_pair((up - dn) / (2.0 * fd * kGrid.dt()) + r.transport_term.mean, r);
    };
    const auto [e2, r2] = stencil(2);
    const auto [e4, r4] = stencil(4);
    CHECK(r2.transport_term.std_error <= 1e-12);
    CHECK(std::abs(e2) <= 0.05 * std::abs(r2.transport_term.mean));
    CHECK(oracle::near_rel(e4 / e2, 4.0, 0.25));
    // The Monte Carlo residual is centered on that stencil error.
    const PDEResidualReport big = pde_residual(m, phi, kGrid, s, y, kGrid.dt(), 2, 20000, 1);
    CHECK(big.residual.within(e2, 3.0));
  }
  SUBCASE("Gaussian quadratic case") {
    const Model m = presets::gaussian(H, default_beta(H));
    const PDEResidualReport r = pde_residual(m, Payoff::pointwise(ScalarFn::square), kGrid, s, y, kGrid.dt(), 4, 20000, 2);
    CHECK(r.residual.within(0.0, 3.0));
  }
  SUBCASE("stencil leaving the horizon") {
    const Model m = presets::gaussian(H, default_beta(H));
    CHECK_THROWS_AS(pde_residual(m, Payoff::pointwise(ScalarFn::square), kGrid, 2, y, kGrid.dt(), 4, 10, 2),
                    DegenerateStencil);
  }
}

TEST_CASE("martingale check") {
  const std::vector<std::size_t> cps{0, 8, 16, 24};
  SUBCASE("Gaussian quadratic case with closed-form inner values") {
    const Model m = presets::gaussian(H, default_beta(H), 1.0, 0.3);
    NestedBudget b;
    b.outer = 20000;
    b.closed_form = true;
    const MartingaleReport r = martingale_check(m, Payoff::pointwise(ScalarFn::square), kGrid, cps, b, 1);
    REQUIRE(r.exact.has_value());
    CHECK(r.terminal.within(*r.exact, 3.0));
    CHECK(r.rows[0].drift.mean == 0.0);
    for (const auto& row : r.rows)
      CHECK(std::abs(row.u_mean.mean - *r.exact) <= 3.0 * row.u_mean.std_error + 1e-12);
  }
  SUBCASE("smooth preset with nested inner runs") {
    const Model m = presets::smooth(H, default_beta(H));
    const TimeGrid g{1.0, 16};
    const std::vector<std::size_t> c3{4, 8, 12};
    NestedBudget b;
    b.outer = 1 << 12;
    b.inner = 1 << 9;
    const MartingaleReport r = martingale_check(m, Payoff::pointwise(ScalarFn::tanh), g, c3, b, 2);
    for (const auto& row : r.rows) CHECK_MESSAGE(row.drift.within(0.0, 3.0), "t = " << row.t);
  }
  SUBCASE("budget cap") {
    const Model m = presets::smooth(H, default_beta(H));
    NestedBudget b;
    b.outer = 1 << 12;
    b.inner = 1 << 12;
    CHECK_THROWS_AS(martingale_check(m, Payoff::pointwise(ScalarFn::tanh), kGrid, cps, b, 2), NestedBudgetExceeded);
  }
}

TEST_CASE("conditional expectations") {
  const TimeGrid g{1.0, 16};
  SUBCASE("t = T is pathwise") {
    const Model m = presets::smooth(H, default_beta(H));
    NestedBudget b;
    b.outer = 200;
    b.inner = 8;
    const ConditionalReport r = conditional_expectation(m, Payoff::pointwise(ScalarFn::tanh), g, g.steps, b, 1);
    CHECK(r.difference.mean == 0.0);
    CHECK(r.difference.std_error == 0.0);
  }
  SUBCASE("Gaussian square against the closed form") {
    const Model m = presets::gaussian(H, default_beta(H), 1.0, 0.3);
    NestedBudget b;
    b.outer = 2000;
    b.inner = 256;
    const ConditionalReport r = conditional_expectation(m, Payoff::pointwise(ScalarFn::square), g, 8, b, 2);
    REQUIRE(r.closed_form.has_value());
    CHECK(r.history.within(r.closed_form->mean, 3.0));
    CHECK(r.value_fn.within(r.closed_form->mean, 3.0));
  }
  SUBCASE("saturated rough Bergomi, call-like payoff") {
    const Model m = presets::rough_bergomi_smooth(H, default_beta(H), -1.0, -0.7, 0.3, 1.0);
    NestedBudget b;
    b.outer = 1000;
    b.inner = 256;
    const Payoff phi = Payoff::pointwise(ScalarFn::softplus, 2, 0, 0.0);
    const ConditionalReport r = conditional_expectation(m, phi, g, 8, b, 3);
    CHECK(r.difference.within(0.0, 3.0));
  }
}

TEST_CASE("mild Fokker-Planck residual") {
  const Curve g = bump(1.0, 1.0, 0.5);
  const TimeGrid tg{1.0, 16};
  SUBCASE("no drift, no noise") {
    const Model m = presets::gaussian(H, default_beta(H), 0.0, 0.4);
    for (const auto& row : fpe_mild_residual(m, Payoff::cylinder(ScalarFn::tanh, g, space_for(m)), tg, 20, 1))
      CHECK(std::abs(row.residual.mean) <= 1e-14);
  }
  SUBCASE("linear cylinder, constant sigma") {
    const Model m = presets::gaussian(H, default_beta(H), 1.0, 0.4);
    for (const auto& row : fpe_mild_residual(m, Payoff::cylinder(ScalarFn::identity, g, space_for(m)), tg, 4000, 2))
      CHECK(row.residual.within(0.0, 3.0));
  }
  SUBCASE("quadratic cylinder, Gaussian case") {
    const Model m = presets::gaussian(H, default_beta(H), 1.0, 0.4);
    for (const auto& row : fpe_mild_residual(m, Payoff::cylinder(ScalarFn::square, g, space_for(m)), tg, 4000, 3))
      CHECK(row.residual.within(0.0, 3.0));
  }
}

TEST_CASE("singular Fokker-Planck residual") {
  const Curve g = bump(1.0, 1.0, 0.5);
  const TimeGrid tg{1.0, 16};
  SUBCASE("cylinder family, f linear, pure transport") {
    const Model m = presets::gaussian(H, default_beta(H), 0.0, 0.0)
                        .with_initial(InitialCurve::deterministic(bump(0.7, 0.3, 0.4)));
    for (const auto& row : fpe_singular_residual(m, SingularFamily::cylinder_derivative, ScalarFn::identity, g,
                                                 space_for(m), 0.5, tg, 10, 1))
      CHECK(std::abs(row.residual.mean) <= 1e-6);
  }
  SUBCASE("cylinder family, f = tanh, Gaussian case") {
    const Model m = presets::gaussian(H, default_beta(H), 1.0, 0.0);
    for (const auto& row : fpe_singular_residual(m, SingularFamily::cylinder_derivative, ScalarFn::tanh, g,
                                                 space_for(m), 0.5, tg, 4000, 2))
      CHECK(row.residual.within(0.0, 3.0));
  }
  SUBCASE("value-function family") {
    const Model m = presets::gaussian(H, default_beta(H), 1.0, 0.3);
    for (const auto& row : fpe_singular_residual(m, SingularFamily::value_function, ScalarFn::square, g,
                                                 space_for(m), 0.0, tg, 4000, 3))
      CHECK(row.residual.within(0.0, 3.0));
  }
  SUBCASE("custom functionals are refused") {
    const Model m = presets::gaussian(H, default_beta(H));
    CHECK(parse_singular_family("mine") == SingularFamily::custom);
    CHECK_THROWS_AS(fpe_singular_residual(m, SingularFamily::custom, ScalarFn::tanh, g, space_for(m), 0.5, tg, 10, 1),
                    TestFunctionNotCompliant);
  }
}
