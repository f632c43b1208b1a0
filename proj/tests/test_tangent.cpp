#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "volterra/errors.hpp"
#include "volterra/tangent.hpp"

using namespace volterra;

namespace {

Curve bump(double a, double m, double s) {
  return Curve::analytic(
      1, [=](double x, double* o) { o[0] = a * std::exp(-0.5 * (x - m) * (x - m) / (s * s)); },
      [=](double x, double* o) {
        o[0] = -a * (x - m) / (s * s) * std::exp(-0.5 * (x - m) * (x - m) / (s * s));
      });
}

WeightedSpace coarse_space(const Model& m) {
  return WeightedSpace(m.weight, SpaceGrid::standard(1e-4, 1.3, 0.1, 20.0));
}

double sup_abs(const Field& f) {
  double s = 0.0;
  for (double v : f.v)
    if (std::isfinite(v)) s = std::max(s, std::abs(v));
  return s;
}

}  // namespace

TEST_CASE("source-only case: zeta_h(t) = S(t - s) h") {
  const Model m = presets::gaussian(0.3, default_beta(0.3), 0.8);
  const TimeGrid g{1.0, 32};
  const PathEnsemble e = simulate(m, g, 20, 3);
  const Curve h = bump(1.0, 0.5, 0.3);
  const std::size_t s = 8;
  const TangentEnsemble z = first_variation(m, Direction::curve(h), s, e);
  double worst = 0.0;
  for (std::size_t p = 0; p < 20; ++p)
    for (std::size_t n = s; n <= g.steps; ++n) worst = std::max(worst, std::abs(z.at(p, n)[0] - h.value(g.t(n) - g.t(s))));
  CHECK(worst <= 1e-14);
}

TEST_CASE("first variation is linear in the direction") {
  const Model m = presets::smooth(0.35, default_beta(0.35));
  const TimeGrid g{1.0, 32};
  const PathEnsemble e = simulate(m, g, 50, 4);
  const Direction h = Direction::curve(bump(1.0, 0.5, 0.3));
  const Direction k = Direction::kernel_column(m.kernel, 0.0, 0);
  const TangentEnsemble a = first_variation(m, h, 0, e);
  const TangentEnsemble b = first_variation(m, h.scaled(2.0), 0, e);
  bool same = true;
  for (std::size_t i = 0; i < a.v.size(); ++i) same = same && b.v[i] == 2.0 * a.v[i];
  CHECK(same);
  const TangentEnsemble zk = first_variation(m, k, 0, e);
  const TangentEnsemble zk2 = first_variation(m, k.scaled(2.0), 0, e);
  bool same_k = true;
  for (std::size_t i = 0; i < zk.v.size(); ++i) same_k = same_k && zk2.v[i] == 2.0 * zk.v[i];
  CHECK(same_k);
  CHECK(sup_abs(first_variation(m, Direction::zero(1), 0, e)) == 0.0);
  const TangentEnsemble sum = first_variation(m, h + k, 0, e);
  double worst = 0.0;
  for (std::size_t i = 0; i < sum.v.size(); ++i)
    if (std::isfinite(sum.v[i])) worst = std::max(worst, std::abs(sum.v[i] - a.v[i] - zk.v[i]));
  CHECK(worst <= 1e-12);
}

TEST_CASE("first variation against the common-random-numbers bump") {
  const Model m = presets::smooth(0.35, default_beta(0.35));
  const TimeGrid g{1.0, 32};
  const WeightedSpace sp = coarse_space(m);
  const Direction h = Direction::curve(bump(1.0, 0.5, 0.3));
  const BumpCheck b4 = first_variation_bump(m, g, m.x0.base(), h, 1e-4, 500, 5, sp);
  CHECK(b4.rel_error <= 0.01);
  // error / eps stays bounded as eps shrinks.
  std::vector<double> per_eps;
  for (double eps : {1e-3, 1e-4, 1e-5}) per_eps.push_back(first_variation_bump(m, g, m.x0.base(), h, eps, 500, 5, sp).abs_error / eps);
  for (double r : per_eps) CHECK(r <= 10.0 * per_eps[0]);
}

TEST_CASE("second variation: affine coefficients, polarization, direct recursion") {
  const TimeGrid g{1.0, 32};
  const Direction h1 = Direction::curve(bump(1.0, 0.5, 0.3));
  const Direction h2 = Direction::curve(bump(-0.5, 1.0, 0.5));
  SUBCASE("affine coefficients give zero") {
    const Model m = presets::linear(0.35, default_beta(0.35), -0.5);
    const PathEnsemble e = simulate(m, g, 20, 2);
    CHECK(sup_abs(second_variation(m, h1, h2, 0, e)) == 0.0);
  }
  SUBCASE("smooth coefficients") {
    const Model m = presets::smooth(0.35, default_beta(0.35));
    const PathEnsemble e = simulate(m, g, 50, 2);
    const TangentEnsemble z12 = second_variation(m, h1, h2, 4, e);
    const TangentEnsemble zp = second_variation_diagonal(m, first_variation(m, h1 + h2, 4, e), e);
    const TangentEnsemble zm = second_variation_diagonal(m, first_variation(m, h1 - h2, 4, e), e);
    bool same = true;
    for (std::size_t i = 0; i < z12.v.size(); ++i)
      if (std::isfinite(z12.v[i])) same = same && z12.v[i] == (zp.v[i] - zm.v[i]) / 4.0;
    CHECK(same);
    const TangentEnsemble direct =
        second_variation_direct(m, first_variation(m, h1, 4, e), first_variation(m, h2, 4, e), e);
    double worst = 0.0;
    for (std::size_t i = 0; i < z12.v.size(); ++i)
      if (std::isfinite(z12.v[i])) worst = std::max(worst, std::abs(z12.v[i] - direct.v[i]));
    CHECK(worst <= 1e-12);
    CHECK(sup_abs(z12) > 0.0);
    // Bilinearity in the first slot.
    const TangentEnsemble z2 = second_variation(m, h1.scaled(2.0), h2, 4, e);
    double wb = 0.0;
    for (std::size_t i = 0; i < z12.v.size(); ++i)
      if (std::isfinite(z12.v[i])) wb = std::max(wb, std::abs(z2.v[i] - 2.0 * z12.v[i]));
    CHECK(wb <= 1e-12);
  }
}

TEST_CASE("second variation against the central second difference") {
  const Model m = presets::smooth(0.35, default_beta(0.35));
  const TimeGrid g{1.0, 32};
  const BumpCheck b = second_variation_bump(m, g, m.x0.base(), Direction::curve(bump(1.0, 0.5, 0.3)), 1e-3,
                                            500, 6, coarse_space(m));
  CHECK(b.rel_error <= 0.03);
}

TEST_CASE("second-order guard below H = 1/4") {
  const TimeGrid g{1.0, 16};
  const Direction h = Direction::curve(bump(1.0, 0.5, 0.3));
  const Model rough = presets::smooth(0.2, default_beta(0.2));
  const PathEnsemble e = simulate(rough, g, 4, 1);
  CHECK_THROWS_AS(second_variation(rough, h, h, 0, e), HurstBelowThreshold);
  CHECK_NOTHROW(second_variation(rough, h, h, 0, e, true));
  CHECK_NOTHROW(check_second_order_guard(presets::gaussian(0.2, default_beta(0.2)), false));
  CHECK_THROWS_AS(check_second_order_guard(rough, false), HurstBelowThreshold);
}

TEST_CASE("moment bounds") {
  SUBCASE("source-only case has ratio 1") {
    const Model m = presets::gaussian(0.3, default_beta(0.3));
    const TimeGrid g{1.0, 16};
    const PathEnsemble e = simulate(m, g, 10, 1);
    const Direction h = Direction::curve(bump(1.0, 0.5, 0.3));
    const MomentBoundReport r = moment_bound_check(m, first_variation(m, h, 0, e), h, 2.0, coarse_space(m));
    for (const auto& row : r.rows) CHECK(row.ratio == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("smooth preset, p = 2 and p = 4: stable under refinement") {
    const Model m = presets::smooth(0.35, default_beta(0.35));
    const Direction h = Direction::kernel_column(m.kernel, 0.1, 0);
    for (double p : {2.0, 4.0}) {
      std::vector<double> ratios;
      for (std::size_t N : {16u, 32u, 64u}) {
        const TimeGrid g{1.0, N};
        const PathEnsemble e = simulate(m, g, 400, 7);
        ratios.push_back(moment_bound_check(m, first_variation(m, h, 0, e), h, p, coarse_space(m)).max_ratio);
      }
      for (double r : ratios) CHECK(std::isfinite(r));
      CHECK(ratios[2] <= 1.5 * ratios[0]);
      CHECK(ratios[2] >= ratios[0] / 1.5);
    }
  }
}

TEST_CASE("mollified tangents converge") {
  const TimeGrid g{1.0, 32};
  const std::vector<double> deltas{0.0, 8 * g.dt(), 4 * g.dt(), 2 * g.dt(), g.dt()};
  SUBCASE("source-only case is deterministic") {
    const Model m = presets::gaussian(0.35, default_beta(0.35));
    const WeightedSpace sp = coarse_space(m);
    const auto rows = mollified_convergence_study(m, g, deltas, 0, 10, 1, sp, 0, 8);
    CHECK(rows[0].terminal.mean == 0.0);
    CHECK(rows[0].integrated.mean == 0.0);
    const H1wEvaluator ev(m.kernel, g, sp);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double d = rows[i].delta;
      const Curve diff = Curve::combine(1.0, kernel_curve(m.kernel, d), -1.0, kernel_curve(m.kernel));
      CHECK(oracle::near_rel(rows[i].terminal.mean, ev.curve_norm_sq(diff, g.T), 1e-8));
    }
  }
  SUBCASE("smooth coefficients: halving delta decreases the discrepancy") {
    const Model m = presets::smooth(0.35, default_beta(0.35));
    const auto rows = mollified_convergence_study(m, g, deltas, 0, 400, 2, coarse_space(m), 0, 4);
    CHECK(rows[0].terminal.mean == 0.0);
    int steps = 0, down = 0;
    for (std::size_t i = 2; i < rows.size(); ++i) {
      steps += 2;
      down += rows[i].terminal.mean < rows[i - 1].terminal.mean;
      down += rows[i].integrated.mean < rows[i - 1].integrated.mean;
    }
    CHECK(down >= 0.9 * steps);
  }
}

TEST_CASE("mollification rate of the solution") {
  const double H = 0.35, beta = default_beta(H);
  const Model m = presets::fbm_type2(H, beta);
  const TimeGrid g{1.0, 128};
  std::vector<double> deltas;
  for (int j : {1, 2, 4, 8, 16}) deltas.push_back(j * g.dt());
  const MollificationRate r = mollification_rate(m, g, deltas, 2000, 3);
  const double q = default_q(H, beta);
  CHECK(r.slope >= (q - 2.0) / q - 0.15);
}
