#include "volterra/kolmogorov.hpp"

#include <algorithm>
#include <cmath>

#include "volterra/errors.hpp"

namespace volterra {

double Payoff::f(double u) const {
  switch (fn) {
    case ScalarFn::identity: return u;
    case ScalarFn::square: return u * u;
    case ScalarFn::tanh: return std::tanh(u);
    case ScalarFn::softplus: {
      const double z = u - strike;
      return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    }
  }
  return 0.0;
}

double Payoff::df(double u) const {
  switch (fn) {
    case ScalarFn::identity: return 1.0;
    case ScalarFn::square: return 2.0 * u;
    case ScalarFn::tanh: {
      const double t = std::tanh(u);
      return 1.0 - t * t;
    }
    case ScalarFn::softplus: return 1.0 / (1.0 + std::exp(-(u - strike)));
  }
  return 0.0;
}

double Payoff::d2f(double u) const {
  switch (fn) {
    case ScalarFn::identity: return 0.0;
    case ScalarFn::square: return 2.0;
    case ScalarFn::tanh: {
      const double t = std::tanh(u);
      return -2.0 * t * (1.0 - t * t);
    }
    case ScalarFn::softplus: {
      const double s = 1.0 / (1.0 + std::exp(-(u - strike)));
      return s * (1.0 - s);
    }
  }
  return 0.0;
}

Payoff Payoff::pointwise(ScalarFn fn, std::size_t d, std::size_t coord, double strike) {
  Payoff p;
  p.name = to_string(fn) + "(ev0)";
  p.ell = LinearFunctional::point(0.0, d, coord);
  p.fn = fn;
  p.strike = strike;
  return p;
}

Payoff Payoff::cylinder(ScalarFn fn, const Curve& g, const WeightedSpace& space, double strike) {
  Payoff p;
  p.name = to_string(fn) + "(<y,g>)";
  p.ell = LinearFunctional::h1w_inner(g, space);
  p.fn = fn;
  p.strike = strike;
  return p;
}

ScalarFn parse_scalar_fn(const std::string& name) {
  if (name == "identity" || name == "linear") return ScalarFn::identity;
  if (name == "square" || name == "quadratic") return ScalarFn::square;
  if (name == "tanh") return ScalarFn::tanh;
  if (name == "softplus" || name == "call") return ScalarFn::softplus;
  throw InvalidArgument("unknown scalar function '" + name + "'");
}

std::string to_string(ScalarFn fn) {
  switch (fn) {
    case ScalarFn::identity: return "identity";
    case ScalarFn::square: return "square";
    case ScalarFn::tanh: return "tanh";
    case ScalarFn::softplus: return "softplus";
  }
  return "?";
}

void require_compliant(const Model& model, const std::string& op) {
  if (!model.coef.differentiable || !model.coef.bounded_derivatives)
    throw ModelNotCompliant(op + " needs b and sigma of class C^2 with bounded derivatives; '" +
                            model.coef.name + "' is not");
}

namespace {

Kernel kernel_of(const Model& model, const PathEnsemble& e) {
  return e.kernel_shift > 0.0 ? model.kernel.shifted(e.kernel_shift) : model.kernel;
}

SimOptions from_step(std::size_t s, bool increments = true) {
  SimOptions o;
  o.start_step = s;
  o.store_increments = increments;
  return o;
}

bool zero_drift(const Coefficients& c) {
  return c.linear_drift &&
         std::all_of(c.linear_drift->begin(), c.linear_drift->end(), [](double v) { return v == 0.0; });
}

// Variance of l(lambda_T) over the steps k >= m for b = 0 and constant sigma.
double gaussian_variance(const Model& model, const Projection& P, const TimeGrid& grid, std::size_t m) {
  const std::size_t d = model.d(), mm = model.m(), N = grid.steps;
  std::vector<double> x(d, 0.0), sig(d * mm);
  model.coef.sigma(x.data(), sig.data());
  double var = 0.0;
  for (std::size_t k = m; k < N; ++k)
    for (std::size_t j = 0; j < mm; ++j) {
      double c = 0.0;
      for (std::size_t i = 0; i < d; ++i) c += P.B(N - k)[i] * sig[i * mm + j];
      var += c * c * grid.dt();
    }
  return var;
}

bool has_closed_form(const Model& model, const Payoff& payoff) {
  return zero_drift(model.coef) && model.coef.constant_sigma &&
         (payoff.fn == ScalarFn::identity || payoff.fn == ScalarFn::square);
}

double closed_from_moments(const Payoff& payoff, double mean, double var) {
  return payoff.fn == ScalarFn::identity ? mean : mean * mean + var;
}

// Per-path samples of a sweep and their optional extrapolation.
SweepReport sweep(std::span<const double> deltas, const std::vector<std::vector<double>>& samples) {
  SweepReport r;
  for (std::size_t i = 0; i < deltas.size(); ++i) r.rows.push_back({deltas[i], estimate(samples[i])});
  double dmin = INFINITY;
  std::size_t imin = deltas.size();
  for (std::size_t i = 0; i < deltas.size(); ++i)
    if (deltas[i] > 0.0 && deltas[i] < dmin) {
      dmin = deltas[i];
      imin = i;
    }
  for (std::size_t i = 0; imin < deltas.size() && i < deltas.size(); ++i)
    if (std::abs(deltas[i] - 2.0 * dmin) <= 1e-12 * dmin) {
      std::vector<double> ex(samples[imin].size());
      for (std::size_t p = 0; p < ex.size(); ++p) ex[p] = 2.0 * samples[imin][p] - samples[i][p];
      r.extrapolated = estimate(ex);
      break;
    }
  return r;
}

// d/dx of y' by central differences; used when a functional needs the derivative of y'.
Curve derivative_curve(const Curve& y) {
  const std::size_t d = y.dim();
  auto val = [y](double x, double* out) { y.derivative(x, out); };
  auto der = [y, d](double x, double* out) {
    std::vector<double> lo(d), hi(d);
    const double h = 1e-6 * std::max(1.0, x);
    const double a = std::max(0.0, x - h), b = x + h;
    y.derivative(a, lo.data());
    y.derivative(b, hi.data());
    for (std::size_t i = 0; i < d; ++i) out[i] = (hi[i] - lo[i]) / (b - a);
  };
  return Curve::analytic(d, val, der);
}

}  // namespace

MCEstimate value(const Model& model, const Payoff& payoff, const TimeGrid& grid, std::size_t s,
                 const Curve& y, std::size_t n_paths, std::uint64_t seed) {
  require_compliant(model, "value");
  const std::size_t N = grid.steps;
  if (s > N) throw InvalidArgument("t beyond the horizon");
  if (s == N) {
    MCEstimate e;
    e.mean = payoff(y);
    e.n_samples = n_paths;
    return e;
  }
  const PathEnsemble e = simulate_from(model, grid, {y}, n_paths, seed, from_step(s, false));
  const Projection P(model.kernel, grid.dt(), N, payoff.ell);
  std::vector<double> v(n_paths);
  parallel_for(n_paths, [&](std::size_t p) { v[p] = payoff.f(P.apply(e, p, N)); });
  return estimate(v);
}

std::optional<double> closed_form_value(const Model& model, const Payoff& payoff,
                                        const TimeGrid& grid, std::size_t s, const Curve& y) {
  if (!has_closed_form(model, payoff)) return std::nullopt;
  const Projection P(model.kernel, grid.dt(), grid.steps, payoff.ell);
  const double mean = payoff.ell.apply(y, grid.t(grid.steps) - grid.t(s));
  return closed_from_moments(payoff, mean, gaussian_variance(model, P, grid, s));
}

SweepReport singular_gradient(const Model& model, const Payoff& payoff, const TimeGrid& grid,
                              std::size_t s, const Curve& y, const Direction& h,
                              std::span<const double> deltas, std::size_t n_paths,
                              std::uint64_t seed) {
  require_compliant(model, "singular gradient");
  const std::size_t N = grid.steps;
  if (s >= N) throw InvalidArgument("need t < T");
  const PathEnsemble e = simulate_from(model, grid, {y}, n_paths, seed, from_step(s));
  const Projection P(model.kernel, grid.dt(), N, payoff.ell);
  std::vector<double> lT(n_paths);
  parallel_for(n_paths, [&](std::size_t p) { lT[p] = P.apply(e, p, N); });
  std::vector<std::vector<double>> samples;
  for (double delta : deltas) {
    const TangentEnsemble z = first_variation(model, h.shifted(delta), s, e);
    std::vector<double> g(n_paths);
    parallel_for(n_paths, [&](std::size_t p) { g[p] = payoff.df(lT[p]) * P.apply(z, p, N); });
    samples.push_back(std::move(g));
  }
  return sweep(deltas, samples);
}

SweepReport singular_hessian(const Model& model, const Payoff& payoff, const TimeGrid& grid,
                             std::size_t s, const Curve& y, const Direction& h,
                             std::span<const double> deltas, std::size_t n_paths,
                             std::uint64_t seed, bool force) {
  require_compliant(model, "singular Hessian");
  check_second_order_guard(model, force);
  const std::size_t N = grid.steps;
  if (s >= N) throw InvalidArgument("need t < T");
  const PathEnsemble e = simulate_from(model, grid, {y}, n_paths, seed, from_step(s));
  const Projection P(model.kernel, grid.dt(), N, payoff.ell);
  std::vector<double> lT(n_paths);
  parallel_for(n_paths, [&](std::size_t p) { lT[p] = P.apply(e, p, N); });
  std::vector<std::vector<double>> samples;
  for (double delta : deltas) {
    const TangentEnsemble z1 = first_variation(model, h.shifted(delta), s, e);
    const TangentEnsemble z2 = second_variation_diagonal(model, z1, e, force);
    std::vector<double> g(n_paths);
    parallel_for(n_paths, [&](std::size_t p) {
      const double a = P.apply(z1, p, N);
      g[p] = payoff.d2f(lT[p]) * a * a + payoff.df(lT[p]) * P.apply(z2, p, N);
    });
    samples.push_back(std::move(g));
  }
  return sweep(deltas, samples);
}

PDEResidualReport pde_residual(const Model& model, const Payoff& payoff, const TimeGrid& grid,
                               std::size_t s, const Curve& y, double delta, std::size_t fd_steps,
                               std::size_t n_paths, std::uint64_t seed, bool force) {
  require_compliant(model, "PDE residual");
  check_second_order_guard(model, force);
  const std::size_t N = grid.steps, d = model.d(), m = model.m();
  if (!(delta > 0.0)) throw NonPositiveTime("direction shift must be positive");
  if (fd_steps == 0 || s < fd_steps || s + fd_steps > N)
    throw DegenerateStencil("time stencil t +- " + std::to_string(fd_steps) +
                            " steps leaves [0, T]");
  const double dt = grid.dt();
  const Projection P(model.kernel, dt, N, payoff.ell);

  // d_t u on common seeds.
  const PathEnsemble up = simulate_from(model, grid, {y}, n_paths, seed, from_step(s + fd_steps, false));
  const PathEnsemble dn = simulate_from(model, grid, {y}, n_paths, seed, from_step(s - fd_steps, false));
  std::vector<double> time(n_paths);
  const double h2 = 2.0 * static_cast<double>(fd_steps) * dt;
  parallel_for(n_paths, [&](std::size_t p) {
    time[p] = (payoff.f(P.apply(up, p, N)) - payoff.f(P.apply(dn, p, N))) / h2;
  });

  const PathEnsemble e = simulate_from(model, grid, {y}, n_paths, seed, from_step(s));
  std::vector<double> lT(n_paths);
  parallel_for(n_paths, [&](std::size_t p) { lT[p] = P.apply(e, p, N); });

  const TangentEnsemble zy = first_variation(model, Direction::curve(derivative_curve(y)), s, e);
  std::vector<double> transport(n_paths);
  parallel_for(n_paths, [&](std::size_t p) { transport[p] = payoff.df(lT[p]) * P.apply(zy, p, N); });

  std::vector<double> y0(d), b0(d), s0(d * m);
  y.value(0.0, y0.data());
  model.coef.b(y0.data(), b0.data());
  model.coef.sigma(y0.data(), s0.data());

  auto drift_at = [&](double dl) {
    std::vector<double> g(n_paths);
    const TangentEnsemble z = first_variation(model, Direction::kernel(model.kernel, dl, b0), s, e);
    parallel_for(n_paths, [&](std::size_t p) { g[p] = payoff.df(lT[p]) * P.apply(z, p, N); });
    return g;
  };
  auto trace_at = [&](double dl) {
    std::vector<double> g(n_paths, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      std::vector<double> col(d);
      for (std::size_t i = 0; i < d; ++i) col[i] = s0[i * m + j];
      const TangentEnsemble z1 = first_variation(model, Direction::kernel(model.kernel, dl, col), s, e);
      const TangentEnsemble z2 = second_variation_diagonal(model, z1, e, force);
      parallel_for(n_paths, [&](std::size_t p) {
        const double a = P.apply(z1, p, N);
        g[p] += 0.5 * (payoff.d2f(lT[p]) * a * a + payoff.df(lT[p]) * P.apply(z2, p, N));
      });
    }
    return g;
  };
  const auto d1 = drift_at(delta), d2 = drift_at(2.0 * delta);
  const auto t1 = trace_at(delta), t2 = trace_at(2.0 * delta);
  std::vector<double> drift(n_paths), trace(n_paths), res(n_paths);
  for (std::size_t p = 0; p < n_paths; ++p) {
    drift[p] = 2.0 * d1[p] - d2[p];
    trace[p] = 2.0 * t1[p] - t2[p];
    res[p] = time[p] + transport[p] + drift[p] + trace[p];
  }
  PDEResidualReport r;
  r.t = grid.t(s);
  r.delta = delta;
  r.dt_fd = static_cast<double>(fd_steps) * dt;
  r.time_term = estimate(time);
  r.transport_term = estimate(transport);
  r.drift_term = estimate(drift);
  r.trace_term = estimate(trace);
  r.residual = estimate(res);
  return r;
}

namespace {

constexpr std::uint64_t kValueStreamOffset = 1u << 20;

std::uint64_t inner_seed(std::uint64_t seed, std::size_t p) {
  return splitmix64(seed ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(p) + 1)));
}

// Mean payoff of inner paths continuing from step m. `frozen` holds the x = 0 values of the
// state curve at t_n - t_m (n >= m, (N+1) x d), `frozen_l` is l(S(T - t_m) state).
double inner_mean(const Model& model, const WeightTable& W0, const Projection& P,
                  const Payoff& payoff, const TimeGrid& grid, std::size_t m,
                  const std::vector<double>& frozen, double frozen_l, std::size_t n_inner,
                  const IncrementSource& inc) {
  const std::size_t N = grid.steps, d = model.d(), mm = model.m();
  if (m == N) return payoff.f(frozen_l);
  std::vector<double> v((N + 1) * d), cA(N * d, 0.0), cB(N * d, 0.0), sig(d * mm), dw(mm);
  const double sq = std::sqrt(grid.dt());
  const Coefficients& c = model.coef;
  double sum = 0.0;
  for (std::size_t i = 0; i < n_inner; ++i) {
    auto step = [&](std::size_t k, const double* x, double* a, double* b) {
      c.b(x, a);
      c.sigma(x, sig.data());
      inc.fill(i, k, sq, mm, dw.data());
      for (std::size_t r = 0; r < d; ++r) {
        double acc = 0.0;
        for (std::size_t j = 0; j < mm; ++j) acc += sig[r * mm + j] * dw[j];
        b[r] = acc;
      }
    };
    run_recursion(W0, m, N, d, frozen.data(), step, v.data(), cA.data(), cB.data());
    double l = frozen_l;
    for (std::size_t k = m; k < N; ++k)
      for (std::size_t r = 0; r < d; ++r) l += P.A(N - k)[r] * cA[k * d + r] + P.B(N - k)[r] * cB[k * d + r];
    sum += payoff.f(l);
  }
  return sum / static_cast<double>(n_inner);
}

// x = 0 values y(t_n) + sum_{k < m} A_{n-k}(0) cA_k + B_{n-k}(0) cB_k of the stored path.
std::vector<double> history_part(const PathEnsemble& e, const WeightTable& W0, std::size_t p,
                                 std::size_t m) {
  const std::size_t N = e.grid.steps, d = e.d;
  std::vector<double> out((N + 1) * d, 0.0);
  for (std::size_t n = m; n <= N; ++n) {
    double* o = &out[n * d];
    initial_value(e.initial(p), e.grid, e.start, n, 0.0, 0, o);
    for (std::size_t k = e.start; k < m; ++k)
      for (std::size_t i = 0; i < d; ++i)
        o[i] += W0.A(0, n - k)[i] * e.coef_a(p, k)[i] + W0.B(0, n - k)[i] * e.coef_b(p, k)[i];
  }
  return out;
}

void check_budget(const NestedBudget& b) {
  if (b.outer == 0 || b.inner == 0) throw InvalidArgument("nested budgets must be positive");
  if (!b.closed_form && b.outer * b.inner > b.cap)
    throw NestedBudgetExceeded(std::to_string(b.outer) + " x " + std::to_string(b.inner) +
                               " inner paths exceed the cap " + std::to_string(b.cap));
}

}  // namespace

MartingaleReport martingale_check(const Model& model, const Payoff& payoff, const TimeGrid& grid,
                                  std::span<const std::size_t> checkpoints,
                                  const NestedBudget& budget, std::uint64_t seed) {
  require_compliant(model, "martingale check");
  check_budget(budget);
  const bool closed = budget.closed_form && has_closed_form(model, payoff);
  if (budget.closed_form && !closed)
    throw InvalidArgument("no closed-form value for this model and payoff");
  const std::size_t N = grid.steps, d = model.d();
  const PathEnsemble e = simulate(model, grid, budget.outer, seed);
  const Kernel K = kernel_of(model, e);
  const WeightTable W0(K, grid.dt(), N, {0.0}, 0);
  const Projection P(K, grid.dt(), N, payoff.ell);
  std::vector<double> phi(budget.outer);
  parallel_for(budget.outer, [&](std::size_t p) { phi[p] = payoff.f(P.apply(e, p, N)); });
  MartingaleReport r;
  r.terminal = estimate(phi);
  if (closed && !model.x0.random()) r.exact = closed_form_value(model, payoff, grid, 0, model.x0.base());
  for (std::size_t m : checkpoints) {
    if (m > N) throw InvalidArgument("checkpoint beyond the horizon");
    std::vector<double> u(budget.outer), drift(budget.outer);
    const double var = closed ? gaussian_variance(model, P, grid, m) : 0.0;
    parallel_for(budget.outer, [&](std::size_t p) {
      const double l = P.apply(e, p, m, N - m);
      if (closed) {
        u[p] = closed_from_moments(payoff, l, var);
      } else {
        const IncrementSource inc{CounterRng(inner_seed(seed, p), streams::nested_base + m), true};
        u[p] = inner_mean(model, W0, P, payoff, grid, m, history_part(e, W0, p, m), l, budget.inner, inc);
      }
      drift[p] = u[p] - phi[p];
    });
    MartingaleRow row;
    row.step = m;
    row.t = grid.t(m);
    row.u_mean = estimate(u);
    row.drift = estimate(drift);
    if (m == e.start && !model.x0.random()) {
      // E u(0, lambda_0) - u(0, lambda_0) with a deterministic lambda_0.
      row.drift = MCEstimate{0.0, 0.0, budget.outer};
    }
    r.rows.push_back(row);
  }
  (void)d;
  return r;
}

ConditionalReport conditional_expectation(const Model& model, const Payoff& payoff,
                                          const TimeGrid& grid, std::size_t m,
                                          const NestedBudget& budget, std::uint64_t seed) {
  require_compliant(model, "conditional expectation");
  if (payoff.ell.x.size() != 1 || payoff.ell.x[0] != 0.0 || payoff.ell.uses_derivative())
    throw InvalidArgument("conditional expectation needs a payoff phi(ev_0(y))");
  NestedBudget b = budget;
  b.closed_form = false;
  check_budget(b);
  const std::size_t N = grid.steps, d = model.d();
  if (m > N) throw InvalidArgument("t beyond the horizon");
  const PathEnsemble e = simulate(model, grid, b.outer, seed);
  const Kernel K = kernel_of(model, e);
  const WeightTable W0(K, grid.dt(), N, {0.0}, 0);
  const Projection P(K, grid.dt(), N, payoff.ell);
  const bool closed = has_closed_form(model, payoff);
  const double var = closed ? gaussian_variance(model, P, grid, m) : 0.0;
  std::vector<double> hist(b.outer), vf(b.outer), diff(b.outer), cf(b.outer);
  parallel_for(b.outer, [&](std::size_t p) {
    const std::uint64_t is = inner_seed(seed, p);
    const IncrementSource ih{CounterRng(is, streams::nested_base + m), true};
    const IncrementSource iv{CounterRng(is, streams::nested_base + kValueStreamOffset + m), true};
    hist[p] = inner_mean(model, W0, P, payoff, grid, m, history_part(e, W0, p, m),
                         P.apply(e, p, m, N - m), b.inner, ih);
    // The value function sees only the state curve lambda(t_m).
    const Curve z = field_state(e, K, p, m);
    std::vector<double> frozen((N + 1) * d, 0.0);
    for (std::size_t n = m; n <= N; ++n) z.value(grid.t(n) - grid.t(m), &frozen[n * d]);
    const double lz = payoff.ell.apply(z, grid.t(N) - grid.t(m));
    vf[p] = inner_mean(model, W0, P, payoff, grid, m, frozen, lz, b.inner, iv);
    diff[p] = hist[p] - vf[p];
    if (closed) cf[p] = closed_from_moments(payoff, lz, var);
  });
  ConditionalReport r;
  r.step = m;
  r.history = estimate(hist);
  r.value_fn = estimate(vf);
  r.difference = estimate(diff);
  if (closed) r.closed_form = estimate(cf);
  return r;
}

std::vector<FPERow> fpe_mild_residual(const Model& model, const Payoff& payoff,
                                      const TimeGrid& grid, std::size_t n_paths,
                                      std::uint64_t seed) {
  const std::size_t N = grid.steps, d = model.d(), mm = model.m();
  const PathEnsemble e = simulate(model, grid, n_paths, seed);
  const Kernel K = kernel_of(model, e);
  const Projection P(K, grid.dt(), N, payoff.ell);
  const double dt = grid.dt();
  // res[n][p]
  std::vector<std::vector<double>> res(N + 1, std::vector<double>(n_paths, 0.0));
  parallel_for(n_paths, [&](std::size_t p) {
    std::vector<double> init(N + 1), bk(d), sk(d * mm);
    for (std::size_t j = 0; j <= N; ++j) init[j] = payoff.ell.apply(e.initial(p), grid.t(j));
    // l(S(L dt) lambda(t_k)) with the initial part from the table.
    auto proj = [&](std::size_t k, std::size_t L) {
      double s = init[k + L];
      for (std::size_t j = 0; j < k; ++j)
        for (std::size_t i = 0; i < d; ++i)
          s += P.A(k + L - j)[i] * e.coef_a(p, j)[i] + P.B(k + L - j)[i] * e.coef_b(p, j)[i];
      return s;
    };
    for (std::size_t n = 1; n <= N; ++n) {
      double r = payoff.f(proj(n, 0)) - payoff.f(init[n]);
      for (std::size_t k = 0; k < n; ++k) {
        const double l = proj(k, n - k);
        model.coef.b(e.at(p, k), bk.data());
        model.coef.sigma(e.at(p, k), sk.data());
        double drift = 0.0, tr = 0.0;
        for (std::size_t i = 0; i < d; ++i) drift += P.A(n - k)[i] * bk[i];
        for (std::size_t j = 0; j < mm; ++j) {
          double c = 0.0;
          for (std::size_t i = 0; i < d; ++i) c += P.B(n - k)[i] * sk[i * mm + j];
          tr += c * c;
        }
        r -= payoff.df(l) * drift + 0.5 * payoff.d2f(l) * tr * dt;
      }
      res[n][p] = r;
    }
  });
  std::vector<FPERow> rows;
  for (std::size_t n = 0; n <= N; ++n) rows.push_back({n, grid.t(n), estimate(res[n])});
  return rows;
}

SingularFamily parse_singular_family(const std::string& name) {
  if (name == "value" || name == "u" || name == "value_function") return SingularFamily::value_function;
  if (name == "cylinder" || name == "cylinder-derivative" || name == "cylinder_derivative")
    return SingularFamily::cylinder_derivative;
  return SingularFamily::custom;
}

std::vector<FPERow> fpe_singular_residual(const Model& model, SingularFamily family, ScalarFn fn,
                                          const Curve& g, const WeightedSpace& space, double shift,
                                          const TimeGrid& grid, std::size_t n_paths,
                                          std::uint64_t seed) {
  const std::size_t N = grid.steps, d = model.d(), mm = model.m();
  if (family == SingularFamily::custom)
    throw TestFunctionNotCompliant("only the value function and the derivative-cylinder family "
                                   "have known singular derivatives");
  if (family == SingularFamily::value_function) {
    const Payoff payoff = Payoff::cylinder(fn, g, space);
    NestedBudget b;
    b.outer = n_paths;
    b.inner = 512;
    b.closed_form = has_closed_form(model, payoff);
    std::vector<std::size_t> cps;
    for (std::size_t k = 0; k <= 4; ++k) cps.push_back(N * k / 4);
    const MartingaleReport mr = martingale_check(model, payoff, grid, cps, b, seed);
    std::vector<FPERow> rows;
    for (const auto& row : mr.rows) rows.push_back({row.step, row.t, row.drift});
    return rows;
  }
  if (shift < 0.0) throw NonPositiveTime("cylinder shift must be nonnegative");
  if (g.dim() != d) throw InvalidArgument("test curve dimension differs from the model");
  Payoff pf;
  pf.fn = fn;
  const double c = grid.T + shift, dt = grid.dt();
  const LinearFunctional l0 = LinearFunctional::derivative_inner(g, space, c);
  const PathEnsemble e = simulate(model, grid, n_paths, seed);
  const Kernel K = kernel_of(model, e);
  // Cell integrals over [t_k, t_{k+1}] of l_s(K e_i) and the matching noise weights.
  std::vector<double> LA(N * d, 0.0), LB(N * d, 0.0), A(d), B(d);
  for (std::size_t k = 0; k < N; ++k)
    for (std::size_t q = 0; q < l0.x.size(); ++q) {
      const double x = l0.x[q] - c;
      scheme_weights(K, dt, 1, c - grid.t(k + 1) + x, 1, A.data(), B.data());
      for (std::size_t i = 0; i < d; ++i) {
        LA[k * d + i] += l0.beta[q * d + i] * A[i];
        LB[k * d + i] += l0.beta[q * d + i] * B[i];
      }
    }
  std::vector<std::vector<double>> res(N + 1, std::vector<double>(n_paths, 0.0));
  parallel_for(n_paths, [&](std::size_t p) {
    std::vector<double> bk(d), sk(d * mm);
    const double start = l0.apply(e.initial(p));
    double l = start, gen = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      model.coef.b(e.at(p, k), bk.data());
      model.coef.sigma(e.at(p, k), sk.data());
      double drift = 0.0, tr = 0.0;
      for (std::size_t i = 0; i < d; ++i) drift += LA[k * d + i] * bk[i];
      for (std::size_t j = 0; j < mm; ++j) {
        double cc = 0.0;
        for (std::size_t i = 0; i < d; ++i) cc += LB[k * d + i] * sk[i * mm + j];
        tr += cc * cc;
      }
      gen += pf.df(l) * drift + 0.5 * pf.d2f(l) * tr * dt;
      for (std::size_t i = 0; i < d; ++i)
        l += LA[k * d + i] * e.coef_a(p, k)[i] + LB[k * d + i] * e.coef_b(p, k)[i];
      res[k + 1][p] = pf.f(l) - pf.f(start) - gen;
    }
  });
  std::vector<FPERow> rows;
  for (std::size_t n = 0; n <= N; ++n) rows.push_back({n, grid.t(n), estimate(res[n])});
  return rows;
}

}  // namespace volterra
