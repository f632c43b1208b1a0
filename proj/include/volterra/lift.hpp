#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "volterra/sve.hpp"

namespace volterra {

// lambda(path, t_n, x_q) on stored steps and nodes, coupled with the path ensemble
// it was computed from (X = lambda(., 0) bitwise).
struct LiftEnsemble {
  Model model;
  PathEnsemble paths;
  std::vector<double> x;            // x[0] = 0
  std::vector<std::size_t> times;   // stored steps (absolute)
  std::vector<double> values;       // path x times x nodes x d

  double value(std::size_t p, std::size_t ti, std::size_t q, std::size_t i = 0) const {
    return values[((p * times.size() + ti) * x.size() + q) * paths.d + i];
  }
  const Kernel& kernel() const { return model.kernel; }
};

// Nodes 0 = x_0 < x_1 < ... on multiples of dt, roughly geometric up to x_max.
std::vector<double> default_lift_nodes(const TimeGrid& grid, std::size_t count = 64,
                                       double x_max = 10.0);

// times empty = every step from the start on.
LiftEnsemble simulate_lift(const Model& model, const TimeGrid& grid, std::vector<double> x_nodes,
                           std::size_t n_paths, std::uint64_t seed, const SimOptions& opt = {},
                           std::vector<std::size_t> times = {});

struct FlowCheckReport {
  std::size_t restart_step = 0;
  double restart_time = 0.0;
  double sup_discrepancy = 0.0;
  std::size_t paths = 0;
};
// Restarts every path from (t, lambda(t)) with the stored increments and compares the
// stored lambda(theta, x_q) for theta >= t.
FlowCheckReport flow_restart_check(const LiftEnsemble& lift, std::size_t restart_step);

struct ForwardCurveRow {
  std::size_t step = 0;
  double t = 0.0, x = 0.0;
  MCEstimate mc;
  double exact = 0.0;   // E lambda(t, x) = X_0(t+x) + a int_0^t K(t+x-s) m(s) ds
  double mean_X = 0.0;  // m(t+x) = E X_{t+x}; equals `exact` at x = 0 only
};
// Mean of lambda(t, x) against the forward-curve mean built from m(s) = E X_s, where
// m = X_0 - R * X_0 with R the second-kind resolvent of -aK. Component `coord` only.
std::vector<ForwardCurveRow> forward_curve_check(const LiftEnsemble& lift, std::size_t coord = 0,
                                                 std::size_t fine_steps = 4096);
// The closed-form mean by itself, for deterministic X_0 and b(x) = a x.
std::vector<double> linear_mean(const Model& model, std::span<const double> taus,
                                std::size_t fine_steps = 4096, std::size_t coord = 0);

struct KSResult {
  double statistic = 0.0;
  double p_value = 1.0;
};
KSResult ks_two_sample(std::vector<double> a, std::vector<double> b);
// ev_0(lambda(T)) of the continued paths against the same paths restarted at `restart_step`
// from their state curves with fresh increments (stream `streams::fresh`, seed `fresh_seed`).
KSResult markov_statistic(const LiftEnsemble& lift, std::size_t restart_step,
                          std::uint64_t fresh_seed, std::size_t coord = 0);

// Fitted exponent gamma in E|u(t+h) - u(t)|^2_{H^1_w} ~ h^{2 gamma}, u = lambda - S(.)lambda_0,
// over lags h = 2^i dt at base time t_base.
struct HolderReport {
  std::vector<double> lags, mean_sq;
  double exponent = 0.0;
};
HolderReport holder_exponent(const LiftEnsemble& lift, const WeightedSpace& space,
                             std::size_t base_step, std::size_t max_lag_log2);

// |S(delta) d_x lambda(T)|_{H^1_w} for each path and shift.
std::vector<std::vector<double>> invariance_norms(const LiftEnsemble& lift, const WeightedSpace& space,
                                                  std::span<const double> deltas);

}  // namespace volterra
