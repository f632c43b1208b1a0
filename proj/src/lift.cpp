#include "volterra/lift.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "volterra/errors.hpp"

namespace volterra {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Kernel effective_kernel(const LiftEnsemble& lift) {
  return lift.paths.kernel_shift > 0.0 ? lift.model.kernel.shifted(lift.paths.kernel_shift)
                                       : lift.model.kernel;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

std::vector<double> default_lift_nodes(const TimeGrid& grid, std::size_t count, double x_max) {
  const double dt = grid.dt();
  const double kmax = std::max(1.0, std::floor(x_max / dt));
  std::vector<double> x{0.0};
  long last = 0;
  for (std::size_t i = 1; i < count; ++i) {
    const double r = static_cast<double>(i) / static_cast<double>(count - 1);
    long k = std::lround(std::pow(kmax, r));
    k = std::max(k, last + 1);
    if (static_cast<double>(k) > kmax) break;
    x.push_back(static_cast<double>(k) * dt);
    last = k;
  }
  return x;
}

LiftEnsemble simulate_lift(const Model& model, const TimeGrid& grid, std::vector<double> x_nodes,
                           std::size_t n_paths, std::uint64_t seed, const SimOptions& opt,
                           std::vector<std::size_t> times) {
  if (x_nodes.empty() || x_nodes[0] != 0.0) throw InvalidArgument("lift nodes must start at x = 0");
  for (std::size_t q = 1; q < x_nodes.size(); ++q)
    if (!(x_nodes[q] > x_nodes[q - 1])) throw InvalidArgument("lift nodes must increase");
  SimOptions o = opt;
  o.store_coefficients = true;
  LiftEnsemble lift;
  lift.model = model;
  lift.paths = simulate(model, grid, n_paths, seed, o);
  lift.x = std::move(x_nodes);
  if (times.empty())
    for (std::size_t n = o.start_step; n <= grid.steps; ++n) times.push_back(n);
  for (std::size_t n : times)
    if (n < o.start_step || n > grid.steps) throw InvalidArgument("stored step outside the run");
  lift.times = std::move(times);

  const std::size_t d = model.d(), Q = lift.x.size(), nt = lift.times.size();
  const WeightTable W(model.kernel, grid.dt(), grid.steps, lift.x, 0);
  lift.values.assign(n_paths * nt * Q * d, kNaN);
  parallel_for(n_paths, [&](std::size_t p) {
    for (std::size_t ti = 0; ti < nt; ++ti) {
      const std::size_t n = lift.times[ti];
      for (std::size_t q = 0; q < Q; ++q)
        field_value(lift.paths, W, q, p, n, 0, &lift.values[((p * nt + ti) * Q + q) * d]);
      const double* l0 = &lift.values[((p * nt + ti) * Q) * d];
      for (std::size_t i = 0; i < d; ++i)
        if (l0[i] != lift.paths.X(p, n, i))
          throw std::logic_error("lift property broken at path " + std::to_string(p));
    }
  });
  return lift;
}

FlowCheckReport flow_restart_check(const LiftEnsemble& lift, std::size_t m) {
  const PathEnsemble& e = lift.paths;
  if (!e.has_increments()) throw IncrementMissing("flow restart needs the stored increments");
  if (m < e.start || m > e.grid.steps) throw InvalidArgument("restart step outside the run");
  const Kernel K = effective_kernel(lift);
  const std::size_t d = e.d, mm = e.m, N = e.grid.steps, Q = lift.x.size();
  const WeightTable W(K, e.grid.dt(), N, lift.x, 0);
  const Coefficients& c = lift.model.coef;
  std::vector<double> worst(e.n_paths, 0.0);
  parallel_for(e.n_paths, [&](std::size_t p) {
    Field f;
    f.grid = e.grid;
    f.n_paths = 1;
    f.d = d;
    f.start = m;
    f.init = {field_state(e, K, p, m)};
    f.v.assign((N + 1) * d, kNaN);
    f.cA.assign(N * d, 0.0);
    f.cB.assign(N * d, 0.0);
    std::vector<double> y((N + 1) * d, 0.0), sig(d * mm);
    for (std::size_t n = m; n <= N; ++n) initial_value(f.init[0], e.grid, m, n, 0.0, 0, &y[n * d]);
    auto step = [&](std::size_t k, const double* x, double* a, double* b) {
      c.b(x, a);
      c.sigma(x, sig.data());
      const double* dw = e.dw(p, k);
      for (std::size_t i = 0; i < d; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < mm; ++j) acc += sig[i * mm + j] * dw[j];
        b[i] = acc;
      }
    };
    run_recursion(W, m, N, d, y.data(), step, f.v.data(), f.cA.data(), f.cB.data());
    std::vector<double> out(d);
    double w = 0.0;
    for (std::size_t ti = 0; ti < lift.times.size(); ++ti) {
      const std::size_t n = lift.times[ti];
      if (n < m) continue;
      for (std::size_t q = 0; q < Q; ++q) {
        field_value(f, W, q, 0, n, 0, out.data());
        for (std::size_t i = 0; i < d; ++i) w = std::max(w, std::abs(out[i] - lift.value(p, ti, q, i)));
      }
    }
    worst[p] = w;
  });
  FlowCheckReport r;
  r.restart_step = m;
  r.restart_time = e.grid.t(m);
  r.paths = e.n_paths;
  for (double w : worst) r.sup_discrepancy = std::max(r.sup_discrepancy, w);
  return r;
}

std::vector<double> linear_mean(const Model& model, std::span<const double> taus,
                                std::size_t fine_steps, std::size_t coord) {
  if (!model.coef.linear_drift)
    throw NonlinearDrift("the variation-of-constants mean needs b(x) = a x");
  if (model.x0.random()) throw InvalidArgument("the closed-form mean needs a deterministic X_0");
  const std::size_t d = model.d();
  const std::vector<double>& a = *model.coef.linear_drift;
  double tmax = 0.0;
  for (double t : taus) tmax = std::max(tmax, t);
  std::vector<double> out(taus.size(), 0.0);
  const Curve& x0 = model.x0.base();
  std::vector<double> v(d);
  if (tmax == 0.0 || std::all_of(a.begin(), a.end(), [](double z) { return z == 0.0; })) {
    for (std::size_t i = 0; i < taus.size(); ++i) out[i] = x0.value(taus[i], coord);
    return out;
  }
  Matrix na(d, d);
  for (std::size_t i = 0; i < d * d; ++i) na.a[i] = -a[i];
  const TimeGrid fine{tmax, fine_steps};
  const ResolventGrid R = resolvent_second_kind(model.kernel, na, fine, 0.5);
  const double h = fine.dt();
  // int_0^h R ~ (-a) int_0^h K for the first cell, where R ~ (-a) K.
  Matrix first(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) first(i, j) = na(i, j) * model.kernel[j].integral(0.0, h);
  auto cell = [&](std::size_t j, std::size_t r, std::size_t c2) {
    return j == 1 ? first(r, c2) : 0.5 * h * (R.values[j - 1](r, c2) + R.values[j](r, c2));
  };
  for (std::size_t ti = 0; ti < taus.size(); ++ti) {
    const double tau = taus[ti];
    x0.value(tau, v.data());
    double mean = v[coord];
    const auto J = static_cast<std::size_t>(std::floor(tau / h + 1e-9));
    for (std::size_t j = 1; j <= std::min(J, fine_steps); ++j) {
      x0.value(std::max(0.0, tau - (static_cast<double>(j) - 0.5) * h), v.data());
      for (std::size_t l = 0; l < d; ++l) mean -= cell(j, coord, l) * v[l];
    }
    const double frac = tau - static_cast<double>(J) * h;
    if (frac > 1e-12 * h && J + 1 <= fine_steps && J >= 1) {
      x0.value(0.5 * frac, v.data());
      const double s = frac / h;
      for (std::size_t l = 0; l < d; ++l) {
        const double rj = R.values[J](coord, l), rj1 = R.values[J + 1](coord, l);
        mean -= 0.5 * frac * (rj + (rj + s * (rj1 - rj))) * v[l];
      }
    }
    out[ti] = mean;
  }
  return out;
}

std::vector<ForwardCurveRow> forward_curve_check(const LiftEnsemble& lift, std::size_t coord,
                                                 std::size_t fine_steps) {
  const Model& model = lift.model;
  if (!model.coef.linear_drift) throw NonlinearDrift("forward-curve identity needs b(x) = a x");
  if (lift.paths.kernel_shift != 0.0) throw InvalidArgument("forward-curve check needs the plain kernel");
  const std::size_t d = model.d(), N = lift.paths.grid.steps;
  const std::vector<double>& a = *model.coef.linear_drift;
  const double dt = lift.paths.grid.dt();
  // m_l at midpoints of a refinement of the time grid.
  const std::size_t r = std::max<std::size_t>(1, (fine_steps + N - 1) / N);
  const double h = dt / static_cast<double>(r);
  std::vector<double> mids(N * r);
  for (std::size_t j = 0; j < mids.size(); ++j) mids[j] = (static_cast<double>(j) + 0.5) * h;
  std::vector<std::vector<double>> m(d);
  for (std::size_t l = 0; l < d; ++l) m[l] = linear_mean(model, mids, fine_steps, l);
  std::vector<ForwardCurveRow> rows;
  std::vector<double> taus;
  const Curve& x0 = model.x0.base();
  for (std::size_t ti = 0; ti < lift.times.size(); ++ti)
    for (std::size_t q = 0; q < lift.x.size(); ++q) {
      ForwardCurveRow row;
      row.step = lift.times[ti];
      row.t = lift.paths.grid.t(row.step);
      row.x = lift.x[q];
      std::vector<double> s(lift.paths.n_paths);
      for (std::size_t p = 0; p < s.size(); ++p) s[p] = lift.value(p, ti, q, coord);
      row.mc = estimate(s);
      const double tx = row.t + row.x;
      double ex = x0.value(tx, coord);
      for (std::size_t j = 0; j < row.step * r; ++j) {
        const double lo = tx - static_cast<double>(j + 1) * h, hi = tx - static_cast<double>(j) * h;
        const double kint = model.kernel[coord].integral(std::max(0.0, lo), hi);
        double am = 0.0;
        for (std::size_t l = 0; l < d; ++l) am += a[coord * d + l] * m[l][j];
        ex += kint * am;
      }
      row.exact = ex;
      rows.push_back(row);
      taus.push_back(tx);
    }
  const auto mx = linear_mean(model, taus, fine_steps, coord);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].mean_X = mx[i];
  return rows;
}

KSResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("KS test needs nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double D = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    D = std::max(D, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  KSResult r;
  r.statistic = D;
  const double en = std::sqrt(na * nb / (na + nb));
  const double lam = (en + 0.12 + 0.11 / en) * D;
  if (lam < 1e-3) return r;
  double sum = 0.0, sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lam * lam);
    sum += term;
    if (std::abs(term) < 1e-12) break;
    sign = -sign;
  }
  r.p_value = std::clamp(2.0 * sum, 0.0, 1.0);
  return r;
}

KSResult markov_statistic(const LiftEnsemble& lift, std::size_t m, std::uint64_t fresh_seed,
                          std::size_t coord) {
  const PathEnsemble& e = lift.paths;
  const Kernel K = effective_kernel(lift);
  std::vector<Curve> states(e.n_paths);
  for (std::size_t p = 0; p < e.n_paths; ++p) states[p] = field_state(e, K, p, m);
  SimOptions o;
  o.start_step = m;
  o.stream = streams::fresh;
  o.store_coefficients = false;
  o.store_increments = false;
  const Model mod = lift.model.with_kernel(K);
  const PathEnsemble r = simulate_from(mod, e.grid, std::move(states), e.n_paths, fresh_seed, o);
  std::vector<double> a(e.n_paths), b(e.n_paths);
  for (std::size_t p = 0; p < e.n_paths; ++p) {
    a[p] = e.X(p, e.grid.steps, coord);
    b[p] = r.X(p, e.grid.steps, coord);
  }
  return ks_two_sample(std::move(a), std::move(b));
}

HolderReport holder_exponent(const LiftEnsemble& lift, const WeightedSpace& space,
                             std::size_t base, std::size_t max_lag_log2) {
  const PathEnsemble& e = lift.paths;
  const std::size_t N = e.grid.steps, d = e.d;
  if (base + (std::size_t{1} << max_lag_log2) > N) throw InvalidArgument("lags exceed the horizon");
  const Kernel K = effective_kernel(lift);
  const QuadratureRule& rule = space.rule();
  const WeightTable W(K, e.grid.dt(), N, rule.nodes, 1);
  HolderReport rep;
  for (std::size_t l = 0; l <= max_lag_log2; ++l) {
    const std::size_t n1 = base + (std::size_t{1} << l);
    std::vector<double> sq(e.n_paths);
    parallel_for(e.n_paths, [&](std::size_t p) {
      double s = 0.0;
      std::vector<double> u(d);
      for (std::size_t q = 0; q < rule.size(); ++q)
        for (int o = 0; o <= 1; ++o) {
          std::fill(u.begin(), u.end(), 0.0);
          for (std::size_t k = e.start; k < n1; ++k)
            for (std::size_t i = 0; i < d; ++i)
              u[i] += W.A(q, n1 - k, o)[i] * e.coef_a(p, k)[i] + W.B(q, n1 - k, o)[i] * e.coef_b(p, k)[i];
          for (std::size_t k = e.start; k < base; ++k)
            for (std::size_t i = 0; i < d; ++i)
              u[i] -= W.A(q, base - k, o)[i] * e.coef_a(p, k)[i] + W.B(q, base - k, o)[i] * e.coef_b(p, k)[i];
          for (std::size_t i = 0; i < d; ++i) s += rule.weights[q] * u[i] * u[i];
        }
      sq[p] = s;
    });
    rep.lags.push_back(e.grid.dt() * static_cast<double>(std::size_t{1} << l));
    rep.mean_sq.push_back(estimate(sq).mean);
  }
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < rep.lags.size(); ++i) {
    lx.push_back(std::log(rep.lags[i]));
    ly.push_back(std::log(rep.mean_sq[i]));
  }
  rep.exponent = 0.5 * slope(lx, ly);
  return rep;
}

std::vector<std::vector<double>> invariance_norms(const LiftEnsemble& lift, const WeightedSpace& space,
                                                  std::span<const double> deltas) {
  const PathEnsemble& e = lift.paths;
  const std::size_t N = e.grid.steps, d = e.d;
  const Kernel K = effective_kernel(lift);
  const QuadratureRule& rule = space.rule();
  std::vector<std::vector<double>> out(e.n_paths, std::vector<double>(deltas.size()));
  for (std::size_t di = 0; di < deltas.size(); ++di) {
    std::vector<double> x(rule.nodes);
    for (double& v : x) v += deltas[di];
    x.insert(x.begin(), 0.0);
    const WeightTable W(K, e.grid.dt(), N, x, 2);
    parallel_for(e.n_paths, [&](std::size_t p) {
      std::vector<double> v1(d), v2(d);
      double s = 0.0;
      for (std::size_t q = 0; q < rule.size(); ++q) {
        field_value(e, W, q + 1, p, N, 1, v1.data());
        field_value(e, W, q + 1, p, N, 2, v2.data());
        for (std::size_t i = 0; i < d; ++i) s += rule.weights[q] * (v1[i] * v1[i] + v2[i] * v2[i]);
      }
      out[p][di] = std::sqrt(s);
    });
  }
  return out;
}

}  // namespace volterra
