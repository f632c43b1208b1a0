#include "volterra/sve.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "volterra/errors.hpp"

namespace volterra {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

PathEnsemble run(const Model& model, const Kernel& K, double shift, const TimeGrid& grid,
                 std::vector<Curve> initial, std::size_t n_paths, std::uint64_t seed,
                 const SimOptions& opt) {
  model.validate();
  if (n_paths == 0) throw InvalidArgument("n_paths must be positive");
  if (grid.steps == 0 || !(grid.T > 0.0)) throw InvalidArgument("empty time grid");
  if (opt.start_step > grid.steps) throw InvalidArgument("start step beyond the horizon");
  const std::size_t d = model.d(), m = model.m(), N = grid.steps, s = opt.start_step;

  PathEnsemble e;
  e.grid = grid;
  e.n_paths = n_paths;
  e.d = d;
  e.m = m;
  e.start = s;
  e.seed = seed;
  e.kernel_shift = shift;
  e.fingerprint = model.fingerprint();
  e.init = std::move(initial);
  if (e.init.empty()) {
    if (model.x0.random()) {
      e.init.resize(n_paths);
      for (std::size_t p = 0; p < n_paths; ++p) e.init[p] = model.x0.sample(seed, p);
    } else {
      e.init.push_back(model.x0.base());
    }
  }
  if (e.init.size() != 1 && e.init.size() != n_paths)
    throw InvalidArgument("initial curves must be shared or one per path");
  e.v.assign(n_paths * (N + 1) * d, kNaN);
  if (opt.store_increments) e.dW.assign(n_paths * N * m, 0.0);
  if (opt.store_coefficients) {
    e.cA.assign(n_paths * N * d, 0.0);
    e.cB.assign(n_paths * N * d, 0.0);
  }

  const WeightTable W(K, grid.dt(), N, {0.0}, 0);
  const IncrementSource inc{CounterRng(seed, opt.stream), opt.antithetic};
  const double sq = std::sqrt(grid.dt());
  const Coefficients& c = model.coef;

  parallel_for(n_paths, [&](std::size_t p) {
    std::vector<double> y((N + 1) * d, 0.0), v((N + 1) * d, kNaN), cA(N * d, 0.0), cB(N * d, 0.0);
    std::vector<double> sig(d * m), dw(m);
    const Curve& y0 = e.initial(p);
    for (std::size_t n = s; n <= N; ++n) initial_value(y0, grid, s, n, 0.0, 0, &y[n * d]);
    auto step = [&](std::size_t k, const double* x, double* a, double* b) {
      for (std::size_t i = 0; i < d; ++i)
        if (!std::isfinite(x[i]))
          throw UnstableConfig("non-finite state at step " + std::to_string(k) + " of path " +
                               std::to_string(p));
      c.b(x, a);
      c.sigma(x, sig.data());
      inc.fill(p, k, sq, m, dw.data());
      for (std::size_t i = 0; i < d; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) acc += sig[i * m + j] * dw[j];
        b[i] = acc;
      }
      if (!e.dW.empty()) std::copy(dw.begin(), dw.end(), &e.dW[(p * N + k) * m]);
    };
    run_recursion(W, s, N, d, y.data(), step, v.data(), cA.data(), cB.data());
    for (std::size_t i = 0; i < d; ++i)
      if (!std::isfinite(v[N * d + i])) throw UnstableConfig("non-finite terminal state");
    std::copy(v.begin() + static_cast<std::ptrdiff_t>(s * d), v.end(),
              e.v.begin() + static_cast<std::ptrdiff_t>((p * (N + 1) + s) * d));
    if (!e.cA.empty()) {
      std::copy(cA.begin(), cA.end(), e.cA.begin() + static_cast<std::ptrdiff_t>(p * N * d));
      std::copy(cB.begin(), cB.end(), e.cB.begin() + static_cast<std::ptrdiff_t>(p * N * d));
    }
  });
  return e;
}

}  // namespace

PathEnsemble simulate(const Model& model, const TimeGrid& grid, std::size_t n_paths,
                      std::uint64_t seed, const SimOptions& opt) {
  return run(model, model.kernel, 0.0, grid, {}, n_paths, seed, opt);
}

PathEnsemble simulate_from(const Model& model, const TimeGrid& grid, std::vector<Curve> initial,
                           std::size_t n_paths, std::uint64_t seed, const SimOptions& opt) {
  if (initial.empty()) throw InvalidArgument("simulate_from needs an initial curve");
  return run(model, model.kernel, 0.0, grid, std::move(initial), n_paths, seed, opt);
}

PathEnsemble simulate_mollified(const Model& model, double delta, const TimeGrid& grid,
                                std::size_t n_paths, std::uint64_t seed, const SimOptions& opt) {
  if (!(delta > 0.0)) throw NonPositiveTime("mollification shift must be positive");
  return run(model, model.kernel.shifted(delta), delta, grid, {}, n_paths, seed, opt);
}

MomentReport moment_sup(const PathEnsemble& e, double p) {
  if (!(p >= 1.0)) throw InvalidArgument("moment order must be >= 1");
  MomentReport r;
  const std::size_t N = e.grid.steps;
  r.per_time.resize(N + 1);
  std::vector<double> s(e.n_paths);
  double best = -1.0;
  for (std::size_t n = e.start; n <= N; ++n) {
    for (std::size_t q = 0; q < e.n_paths; ++q) {
      double nrm = 0.0;
      for (std::size_t i = 0; i < e.d; ++i) nrm += e.X(q, n, i) * e.X(q, n, i);
      s[q] = std::pow(std::sqrt(nrm), p);
    }
    r.per_time[n] = estimate(s);
    if (r.per_time[n].mean > best) {
      best = r.per_time[n].mean;
      r.argmax = n;
    }
  }
  r.sup = r.per_time[r.argmax];
  return r;
}

TestFunction TestFunction::identity(std::size_t d, std::size_t c) {
  TestFunction t;
  t.name = "identity";
  t.f = [c](const double* x) { return x[c]; };
  t.grad = [d, c](const double*, double* g) {
    std::fill(g, g + d, 0.0);
    g[c] = 1.0;
  };
  t.hess = [d](const double*, double* h) { std::fill(h, h + d * d, 0.0); };
  return t;
}

TestFunction TestFunction::square(std::size_t d, std::size_t c) {
  TestFunction t;
  t.name = "square";
  t.f = [c](const double* x) { return x[c] * x[c]; };
  t.grad = [d, c](const double* x, double* g) {
    std::fill(g, g + d, 0.0);
    g[c] = 2.0 * x[c];
  };
  t.hess = [d, c](const double*, double* h) {
    std::fill(h, h + d * d, 0.0);
    h[c * d + c] = 2.0;
  };
  return t;
}

TestFunction TestFunction::tanh(std::size_t d, std::size_t c) {
  TestFunction t;
  t.name = "tanh";
  t.f = [c](const double* x) { return std::tanh(x[c]); };
  t.grad = [d, c](const double* x, double* g) {
    std::fill(g, g + d, 0.0);
    const double th = std::tanh(x[c]);
    g[c] = 1.0 - th * th;
  };
  t.hess = [d, c](const double* x, double* h) {
    std::fill(h, h + d * d, 0.0);
    const double th = std::tanh(x[c]);
    h[c * d + c] = -2.0 * th * (1.0 - th * th);
  };
  return t;
}

MCEstimate ito_formula_residual(const Model& model, const PathEnsemble& e, const TestFunction& f,
                                std::size_t s_step, std::size_t t_step) {
  if (!e.has_coefficients() || !e.has_increments())
    throw MissingLift("the Ito formula needs the lift terms lambda(r, t - r); simulate with stored "
                      "coefficients and increments");
  if (s_step < e.start || s_step > t_step || t_step > e.grid.steps)
    throw InvalidArgument("need start <= s <= t <= T");
  const std::size_t d = e.d, m = e.m, n = t_step;
  const Kernel K = e.kernel_shift > 0.0 ? model.kernel.shifted(e.kernel_shift) : model.kernel;
  const WeightTable W(K, e.grid.dt(), e.grid.steps, {0.0}, 0);
  const double dt = e.grid.dt();
  std::vector<double> res(e.n_paths);
  parallel_for(e.n_paths, [&](std::size_t p) {
    std::vector<double> Z(d), Zn(d), g(d), h(d * d), sig(d * m), Bs(d * m);
    initial_value(e.initial(p), e.grid, e.start, n, 0.0, 0, Z.data());
    for (std::size_t k = e.start; k < s_step; ++k)
      for (std::size_t i = 0; i < d; ++i)
        Z[i] += W.A(0, n - k)[i] * e.coef_a(p, k)[i] + W.B(0, n - k)[i] * e.coef_b(p, k)[i];
    double r = f.f(e.at(p, n)) - f.f(Z.data());
    for (std::size_t k = s_step; k < n; ++k) {
      const double* A = W.A(0, n - k);
      const double* B = W.B(0, n - k);
      f.grad(Z.data(), g.data());
      f.hess(Z.data(), h.data());
      model.coef.sigma(e.at(p, k), sig.data());
      double lin = 0.0;
      for (std::size_t i = 0; i < d; ++i)
        lin += g[i] * (A[i] * e.coef_a(p, k)[i] + B[i] * e.coef_b(p, k)[i]);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < m; ++j) Bs[i * m + j] = B[i] * sig[i * m + j];
      double tr = 0.0;
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i < d; ++i)
          for (std::size_t l = 0; l < d; ++l) tr += h[i * d + l] * Bs[i * m + j] * Bs[l * m + j];
      r -= lin + 0.5 * tr * dt;
      for (std::size_t i = 0; i < d; ++i)
        Z[i] += A[i] * e.coef_a(p, k)[i] + B[i] * e.coef_b(p, k)[i];
    }
    res[p] = r;
  });
  return estimate(res);
}

}  // namespace volterra
