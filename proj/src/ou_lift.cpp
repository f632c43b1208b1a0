#include "volterra/ou_lift.hpp"

#include <algorithm>
#include <cmath>

#include "volterra/errors.hpp"

namespace volterra {

double CMQuadrature::operator()(double t) const {
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += rho[i] * std::exp(-z[i] * t);
  return s;
}

double cm_max_rel_error(const Kernel& K, const CMQuadrature& q, double t_min, double t_max,
                        std::size_t points) {
  double worst = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double t = t_min * std::pow(t_max / t_min, static_cast<double>(i) / (points - 1.0));
    const double k = K[0](t);
    worst = std::max(worst, std::abs(q(t) - k) / std::abs(k));
  }
  return worst;
}

CMQuadrature cm_quadrature(const Kernel& K, std::size_t n, double T, double dt) {
  if (K.dim() != 1) throw UnsupportedKernel("the OU lift is scalar (d = m = 1)");
  const ScalarKernel& k = K[0];
  CMQuadrature q;
  const double shift = k.shift();
  switch (k.kind()) {
    case KernelKind::exponential:
      q.z = {k.rate()};
      q.rho = {k.scale() * std::exp(-k.rate() * shift)};
      break;
    case KernelKind::mixture:
      q.z = k.nodes();
      for (std::size_t i = 0; i < q.z.size(); ++i)
        q.rho.push_back(k.weights()[i] * std::exp(-q.z[i] * shift));
      break;
    case KernelKind::power_law: {
      const double H = k.hurst();
      if (H == 0.5) {
        q.z = {0.0};
        q.rho = {1.0};
        break;
      }
      if (!(H < 0.5)) throw UnsupportedKernel("power law with H > 1/2 is not completely monotone");
      if (n == 0) throw InvalidArgument("need at least one quadrature node");
      if (!(T > 0.0) || !(dt > 0.0) || dt > T) throw InvalidArgument("need 0 < dt <= T");
      // t^{H-1/2} = int_0^inf e^{-tz} z^{-H-1/2} dz / Gamma(1/2 - H).
      const double alpha = H + 0.5;
      double c = 1.0 / std::tgamma(0.5 - H);
      if (k.gamma_normalized()) c /= std::tgamma(H + 0.5);
      const double zmin = 1.0 / (10.0 * T), zmax = 10.0 / dt;
      std::vector<double> edges(n + 1);
      edges[0] = 0.0;
      for (std::size_t i = 1; i <= n; ++i)
        edges[i] = zmin * std::pow(zmax / zmin, (i - 1.0) / std::max<double>(1.0, n - 1.0));
      if (n == 1) edges[1] = zmax;
      for (std::size_t i = 0; i < n; ++i) {
        const double a = edges[i], b = edges[i + 1];
        const double mass = c * (std::pow(b, 1.0 - alpha) - std::pow(a, 1.0 - alpha)) / (1.0 - alpha);
        const double mom = c * (std::pow(b, 2.0 - alpha) - std::pow(a, 2.0 - alpha)) / (2.0 - alpha);
        const double z = mom / mass;
        q.z.push_back(z);
        q.rho.push_back(mass * std::exp(-z * shift));
      }
      break;
    }
    default:
      throw UnsupportedKernel(k.describe() + " has no Laplace representation");
  }
  q.max_rel_error = cm_max_rel_error(K, q, q.t_min, q.t_max);
  return q;
}

double OUField::lambda(std::size_t p, std::size_t n, double x) const {
  double s = offset;
  const double* row = &Y[(p * (grid.steps + 1) + n) * quad.size()];
  for (std::size_t i = 0; i < quad.size(); ++i) s += quad.rho[i] * std::exp(-quad.z[i] * x) * row[i];
  return s;
}

namespace {

OUInitial detect_initial(const Model& model, const CMQuadrature& quad, std::size_t n_paths,
                         std::uint64_t seed) {
  const Curve& base = model.x0.base();
  const double c = base.value(0.0);
  for (double x : {0.25, 1.0, 3.0, 10.0, 40.0})
    if (base.value(x) != c)
      throw InitialCurveNotRepresentable("X_0 must be constant plus a mixture of e^{-z_i t}");
  OUInitial init;
  init.offset = c;
  if (model.x0.kind() == InitialKind::deterministic) {
    init.y0.assign(quad.size(), 0.0);
    return init;
  }
  if (model.x0.kind() != InitialKind::ou_stationary || quad.size() != 1)
    throw InitialCurveNotRepresentable("random X_0 is representable only as the stationary OU "
                                       "curve on a single node");
  // X_0(t) = c + e^{-rate t} xi; the rate must be the node.
  const Curve s0 = model.x0.sample(seed, 0);
  const double r0 = (s0.value(0.0) - c), r1 = (s0.value(1.0) - c);
  if (r0 != 0.0 && std::abs(std::log(r0 / r1) - quad.z[0]) > 1e-9 * std::max(1.0, quad.z[0]))
    throw InitialCurveNotRepresentable("stationary OU rate differs from the quadrature node");
  init.y0.resize(n_paths);
  for (std::size_t p = 0; p < n_paths; ++p)
    init.y0[p] = (model.x0.sample(seed, p).value(0.0) - c) / quad.rho[0];
  return init;
}

}  // namespace

OUField simulate_ou(const Model& model, const CMQuadrature& quad, const TimeGrid& grid,
                    std::size_t n_paths, std::uint64_t seed, const SimOptions& opt,
                    std::optional<OUInitial> initial) {
  model.validate();
  if (model.d() != 1 || model.m() != 1) throw UnsupportedKernel("the OU lift is scalar (d = m = 1)");
  if (quad.size() == 0) throw InvalidArgument("empty quadrature");
  if (opt.start_step != 0) throw InvalidArgument("the OU lift starts at step 0");
  const std::size_t n = quad.size(), N = grid.steps;
  const OUInitial init = initial ? *initial : detect_initial(model, quad, n_paths, seed);
  if (init.y0.size() != n && init.y0.size() != n * n_paths)
    throw InitialCurveNotRepresentable("initial node values must be shared or one row per path");

  OUField f;
  f.grid = grid;
  f.quad = quad;
  f.n_paths = n_paths;
  f.seed = seed;
  f.stream = opt.stream;
  f.antithetic = opt.antithetic;
  f.offset = init.offset;
  f.Y.assign(n_paths * (N + 1) * n, 0.0);

  const double dt = grid.dt(), sq = std::sqrt(dt);
  std::vector<double> decay(n), drift(n), noise(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = quad.z[i];
    decay[i] = std::exp(-z * dt);
    drift[i] = z > 0.0 ? -std::expm1(-z * dt) / z : dt;
    noise[i] = z > 0.0 ? std::sqrt(-std::expm1(-2.0 * z * dt) / (2.0 * z * dt)) : 1.0;
  }
  const IncrementSource inc{CounterRng(seed, opt.stream), opt.antithetic};
  const Coefficients& c = model.coef;
  parallel_for(n_paths, [&](std::size_t p) {
    double* y = &f.Y[p * (N + 1) * n];
    const double* y0 = init.y0.size() == n ? init.y0.data() : &init.y0[p * n];
    std::copy(y0, y0 + n, y);
    for (std::size_t k = 0; k < N; ++k) {
      const double x = f.X(p, k);
      if (!std::isfinite(x)) throw UnstableConfig("non-finite OU projection");
      double b = 0.0, s = 0.0, dw = 0.0;
      c.b(&x, &b);
      c.sigma(&x, &s);
      inc.fill(p, k, sq, 1, &dw);
      const double* cur = y + k * n;
      double* nxt = y + (k + 1) * n;
      for (std::size_t i = 0; i < n; ++i)
        nxt[i] = decay[i] * cur[i] + drift[i] * b + noise[i] * s * dw;
    }
  });
  return f;
}

OUEquivalenceReport ou_curve_equivalence(const OUField& ou, const LiftEnsemble& lift) {
  const PathEnsemble& e = lift.paths;
  if (e.grid.steps != ou.grid.steps || e.grid.T != ou.grid.T)
    throw CouplingMismatch("time grids differ");
  if (e.n_paths != ou.n_paths || e.seed != ou.seed || e.start != 0 || e.d != 1)
    throw CouplingMismatch("path count, seed or start differ");
  if (e.kernel_shift != 0.0) throw CouplingMismatch("the curve lift is mollified");
  if (e.has_increments()) {
    const IncrementSource inc{CounterRng(ou.seed, ou.stream), ou.antithetic};
    const double sq = std::sqrt(e.grid.dt());
    for (std::size_t p = 0; p < std::min<std::size_t>(e.n_paths, 4); ++p) {
      double dw = 0.0;
      inc.fill(p, 0, sq, 1, &dw);
      if (dw != e.dw(p, 0)[0]) throw CouplingMismatch("Brownian increments differ");
    }
  }
  OUEquivalenceReport r;
  double sum = 0.0;
  std::size_t cnt = 0;
  for (std::size_t p = 0; p < e.n_paths; ++p)
    for (std::size_t ti = 0; ti < lift.times.size(); ++ti) {
      const std::size_t n = lift.times[ti];
      for (std::size_t q = 0; q < lift.x.size(); ++q) {
        const double dlt = std::abs(ou.lambda(p, n, lift.x[q]) - lift.value(p, ti, q));
        r.sup = std::max(r.sup, dlt);
        sum += dlt * dlt;
        ++cnt;
        if (q == 0) r.sup_x0 = std::max(r.sup_x0, dlt);
      }
    }
  r.rms = std::sqrt(sum / static_cast<double>(cnt));
  return r;
}

}  // namespace volterra
