#include "volterra/tangent.hpp"

#include <cmath>
#include <limits>

#include "volterra/errors.hpp"

namespace volterra {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Kernel ensemble_kernel(const Model& model, double shift) {
  return shift > 0.0 ? model.kernel.shifted(shift) : model.kernel;
}

TangentEnsemble blank(const PathEnsemble& e, std::size_t s, Curve init) {
  if (!e.has_increments()) throw IncrementMissing("tangent processes reuse the stored increments");
  if (s < e.start || s > e.grid.steps) throw InvalidArgument("tangent start outside the run");
  TangentEnsemble z;
  z.grid = e.grid;
  z.n_paths = e.n_paths;
  z.d = e.d;
  z.start = s;
  z.kernel_shift = e.kernel_shift;
  z.init = {std::move(init)};
  const std::size_t N = e.grid.steps;
  z.v.assign(e.n_paths * (N + 1) * e.d, kNaN);
  z.cA.assign(e.n_paths * N * e.d, 0.0);
  z.cB.assign(e.n_paths * N * e.d, 0.0);
  return z;
}

// Linearized recursion along the states of `e`. `source(p, k, sa, sb)` adds the inhomogeneous
// drift and noise-coefficient terms (before multiplication by dW).
template <class Source>
void run_linear(const Model& model, const PathEnsemble& e, TangentEnsemble& z,
                const std::vector<double>& y, bool per_path_y, const Source& source) {
  const std::size_t d = e.d, m = e.m, N = e.grid.steps, s = z.start;
  const Kernel K = ensemble_kernel(model, e.kernel_shift);
  const WeightTable W(K, e.grid.dt(), N, {0.0}, 0);
  const Coefficients& c = model.coef;
  parallel_for(e.n_paths, [&](std::size_t p) {
    std::vector<double> v((N + 1) * d, kNaN), cA(N * d, 0.0), cB(N * d, 0.0);
    std::vector<double> db(d * d), ds(d * m * d), sa(d), sb(d * m);
    auto step = [&](std::size_t k, const double* zk, double* a, double* b) {
      const double* x = e.at(p, k);
      c.db(x, db.data());
      c.dsigma(x, ds.data());
      std::fill(sa.begin(), sa.end(), 0.0);
      std::fill(sb.begin(), sb.end(), 0.0);
      source(p, k, sa.data(), sb.data());
      const double* dw = e.dw(p, k);
      for (std::size_t i = 0; i < d; ++i) {
        double acc = sa[i];
        for (std::size_t l = 0; l < d; ++l) acc += db[i * d + l] * zk[l];
        a[i] = acc;
        double nb = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          double col = sb[i * m + j];
          for (std::size_t l = 0; l < d; ++l) col += ds[(i * m + j) * d + l] * zk[l];
          nb += col * dw[j];
        }
        b[i] = nb;
      }
    };
    const double* yp = per_path_y ? &y[p * (N + 1) * d] : y.data();
    run_recursion(W, s, N, d, yp, step, v.data(), cA.data(), cB.data());
    std::copy(v.begin() + static_cast<std::ptrdiff_t>(s * d), v.end(),
              z.v.begin() + static_cast<std::ptrdiff_t>((p * (N + 1) + s) * d));
    std::copy(cA.begin(), cA.end(), z.cA.begin() + static_cast<std::ptrdiff_t>(p * N * d));
    std::copy(cB.begin(), cB.end(), z.cB.begin() + static_cast<std::ptrdiff_t>(p * N * d));
  });
}

void check_coupled(const TangentEnsemble& z, const PathEnsemble& e) {
  if (z.n_paths != e.n_paths || z.grid.steps != e.grid.steps || z.grid.T != e.grid.T ||
      z.kernel_shift != e.kernel_shift)
    throw CouplingMismatch("tangent and path ensembles differ");
}

}  // namespace

Direction Direction::curve(Curve c) {
  Direction h;
  h.dim_ = c.dim();
  Term t;
  t.curve = std::move(c);
  h.terms_.push_back(std::move(t));
  return h;
}

Direction Direction::kernel(const Kernel& K, double delta, std::vector<double> v) {
  if (v.size() != K.dim()) throw InvalidArgument("direction vector has the wrong dimension");
  if (delta < 0.0) throw NonPositiveTime("kernel shift must be nonnegative");
  Direction h;
  h.dim_ = K.dim();
  Term t;
  t.curve = kernel_curve(K, delta, v);
  t.kernel = true;
  t.K = K;
  t.delta = delta;
  t.v = std::move(v);
  h.terms_.push_back(std::move(t));
  return h;
}

Direction Direction::kernel_column(const Kernel& K, double delta, std::size_t i) {
  std::vector<double> v(K.dim(), 0.0);
  v.at(i) = 1.0;
  return kernel(K, delta, std::move(v));
}

Direction Direction::zero(std::size_t dim) { return curve(Curve::zero(dim)); }

bool Direction::singular() const {
  for (const Term& t : terms_)
    if (t.kernel && t.delta == 0.0 && t.K.singular_at_origin()) return true;
  return false;
}

Curve Direction::as_curve() const {
  Curve c = terms_[0].curve.scaled(terms_[0].coef);
  for (std::size_t i = 1; i < terms_.size(); ++i) c = Curve::combine(1.0, c, terms_[i].coef, terms_[i].curve);
  return c;
}

void Direction::start_value(double dt, double* out) const {
  std::fill(out, out + dim_, 0.0);
  std::vector<double> tmp(dim_), B(dim_);
  for (const Term& t : terms_) {
    if (t.kernel) {
      scheme_weights(t.K, dt, 1, t.delta, 0, tmp.data(), B.data());
      for (std::size_t i = 0; i < dim_; ++i) tmp[i] = tmp[i] / dt * t.v[i];
    } else {
      t.curve.value(0.0, tmp.data());
    }
    for (std::size_t i = 0; i < dim_; ++i) out[i] += t.coef * tmp[i];
  }
}

Direction Direction::operator+(const Direction& o) const {
  if (o.dim_ != dim_) throw InvalidArgument("direction dimensions differ");
  Direction h = *this;
  h.terms_.insert(h.terms_.end(), o.terms_.begin(), o.terms_.end());
  return h;
}

Direction Direction::operator-(const Direction& o) const { return *this + o.scaled(-1.0); }

Direction Direction::scaled(double a) const {
  Direction h = *this;
  for (Term& t : h.terms_) t.coef *= a;
  return h;
}

Direction Direction::shifted(double delta) const {
  if (delta < 0.0) throw NonPositiveTime("shift must be nonnegative");
  Direction h = *this;
  for (Term& t : h.terms_) {
    if (t.kernel) {
      t.delta += delta;
      t.curve = kernel_curve(t.K, t.delta, t.v);
    } else {
      t.curve = t.curve.shifted(delta);
    }
  }
  return h;
}

TangentEnsemble first_variation(const Model& model, const Direction& h, std::size_t s,
                                const PathEnsemble& e) {
  model.coef.require_derivatives("first variation");
  if (h.dim() != e.d) throw InvalidArgument("direction dimension differs from the model");
  const Curve hc = h.as_curve();
  TangentEnsemble z = blank(e, s, hc);
  const std::size_t d = e.d, N = e.grid.steps;
  std::vector<double> y((N + 1) * d, 0.0);
  h.start_value(e.grid.dt(), &y[s * d]);
  for (std::size_t n = s + 1; n <= N; ++n) initial_value(hc, e.grid, s, n, 0.0, 0, &y[n * d]);
  run_linear(model, e, z, y, false, [](std::size_t, std::size_t, double*, double*) {});
  return z;
}

TangentEnsemble first_variation(const Model& model, const Direction& h, std::size_t s,
                                const LiftEnsemble& lift) {
  return first_variation(model, h, s, lift.paths);
}

void check_second_order_guard(const Model& model, bool force) {
  if (force || model.coef.constant_sigma) return;
  for (const ScalarKernel& k : model.kernel.diagonal())
    if (k.kind() == KernelKind::power_law && k.hurst() <= 0.25)
      throw HurstBelowThreshold("power-law kernel with H = " + std::to_string(k.hurst()) +
                                " <= 1/4 and non-constant sigma: second-order tangents need "
                                "q > 4; use --force to run anyway");
}

TangentEnsemble second_variation_direct(const Model& model, const TangentEnsemble& z1,
                                        const TangentEnsemble& z2, const PathEnsemble& e,
                                        bool force) {
  check_second_order_guard(model, force);
  model.coef.require_derivatives("second variation");
  check_coupled(z1, e);
  check_coupled(z2, e);
  if (z1.start != z2.start) throw CouplingMismatch("first variations start at different steps");
  const std::size_t d = e.d, m = e.m, N = e.grid.steps, s = z1.start;
  TangentEnsemble z = blank(e, s, Curve::zero(d));
  z.second = true;
  const std::vector<double> y((N + 1) * d, 0.0);
  const Coefficients& c = model.coef;
  const bool zero2 = c.zero_second_derivative;
  // Per-worker scratch is local to the source lambda invocation.
  run_linear(model, e, z, y, false, [&](std::size_t p, std::size_t k, double* sa, double* sb) {
    if (zero2) return;
    thread_local std::vector<double> d2b, d2s;
    d2b.resize(d * d * d);
    d2s.resize(d * m * d * d);
    const double* x = e.at(p, k);
    const double* a = z1.at(p, k);
    const double* b = z2.at(p, k);
    c.d2b(x, d2b.data());
    c.d2sigma(x, d2s.data());
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t k1 = 0; k1 < d; ++k1)
        for (std::size_t l = 0; l < d; ++l) sa[i] += d2b[(i * d + k1) * d + l] * a[k1] * b[l];
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k1 = 0; k1 < d; ++k1)
          for (std::size_t l = 0; l < d; ++l)
            sb[i * m + j] += d2s[((i * m + j) * d + k1) * d + l] * a[k1] * b[l];
    }
  });
  return z;
}

TangentEnsemble second_variation_diagonal(const Model& model, const TangentEnsemble& z,
                                          const PathEnsemble& e, bool force) {
  return second_variation_direct(model, z, z, e, force);
}

TangentEnsemble second_variation(const Model& model, const Direction& h1, const Direction& h2,
                                 std::size_t s, const PathEnsemble& e, bool force) {
  check_second_order_guard(model, force);
  const TangentEnsemble zp = first_variation(model, h1 + h2, s, e);
  const TangentEnsemble zm = first_variation(model, h1 - h2, s, e);
  const TangentEnsemble sp = second_variation_diagonal(model, zp, e, force);
  const TangentEnsemble sm = second_variation_diagonal(model, zm, e, force);
  TangentEnsemble z = sp;
  for (std::size_t i = 0; i < z.v.size(); ++i) z.v[i] = 0.25 * (sp.v[i] - sm.v[i]);
  for (std::size_t i = 0; i < z.cA.size(); ++i) {
    z.cA[i] = 0.25 * (sp.cA[i] - sm.cA[i]);
    z.cB[i] = 0.25 * (sp.cB[i] - sm.cB[i]);
  }
  return z;
}

H1wEvaluator::H1wEvaluator(const Kernel& K, const TimeGrid& grid, const WeightedSpace& space)
    : W_(K, grid.dt(), grid.steps, space.rule().nodes, 1), w_(space.rule().weights) {}

void H1wEvaluator::values(const Field& f, std::size_t p, std::size_t n, std::vector<double>& out) const {
  const std::size_t d = f.d;
  out.resize(w_.size() * 2 * d);
  for (std::size_t q = 0; q < w_.size(); ++q) {
    field_value(f, W_, q, p, n, 0, &out[(q * 2) * d]);
    field_value(f, W_, q, p, n, 1, &out[(q * 2 + 1) * d]);
  }
}

void H1wEvaluator::curve_values(const Curve& c, double shift, std::vector<double>& out) const {
  const std::size_t d = c.dim();
  out.resize(w_.size() * 2 * d);
  for (std::size_t q = 0; q < w_.size(); ++q) {
    c.value(shift + W_.x()[q], &out[(q * 2) * d]);
    c.derivative(shift + W_.x()[q], &out[(q * 2 + 1) * d]);
  }
}

double H1wEvaluator::norm_sq(std::span<const double> a) const {
  const std::size_t per = a.size() / w_.size();
  double s = 0.0;
  for (std::size_t q = 0; q < w_.size(); ++q) {
    double t = 0.0;
    for (std::size_t i = 0; i < per; ++i) t += a[q * per + i] * a[q * per + i];
    s += w_[q] * t;
  }
  return s;
}

double H1wEvaluator::norm_sq(const Field& f, std::size_t p, std::size_t n) const {
  std::vector<double> v;
  values(f, p, n, v);
  return norm_sq(v);
}

double H1wEvaluator::curve_norm_sq(const Curve& c, double shift) const {
  std::vector<double> v;
  curve_values(c, shift, v);
  return norm_sq(v);
}

MomentBoundReport moment_bound_check(const Model& model, const TangentEnsemble& z,
                                     const Direction& h, double p, const WeightedSpace& space) {
  if (!(p >= 1.0)) throw InvalidArgument("moment order must be >= 1");
  const H1wEvaluator ev(ensemble_kernel(model, z.kernel_shift), z.grid, space);
  const Curve hc = h.as_curve();
  MomentBoundReport r;
  std::vector<double> s(z.n_paths);
  for (std::size_t n = z.start + 1; n <= z.grid.steps; ++n) {
    parallel_for(z.n_paths, [&](std::size_t q) { s[q] = std::pow(ev.norm_sq(z, q, n), 0.5 * p); });
    MomentBoundRow row;
    row.step = n;
    row.t = z.grid.t(n);
    row.moment = estimate(s);
    row.reference = std::pow(ev.curve_norm_sq(hc, z.grid.t(n) - z.grid.t(z.start)), 0.5 * p);
    row.ratio = row.moment.mean / row.reference;
    r.max_ratio = std::max(r.max_ratio, row.ratio);
    r.rows.push_back(row);
  }
  return r;
}

namespace {

BumpCheck compare(const H1wEvaluator& ev, std::size_t n_paths,
                  const std::function<void(std::size_t, std::vector<double>&, std::vector<double>&)>& fd_and_ref) {
  std::vector<double> err(n_paths), ref(n_paths);
  parallel_for(n_paths, [&](std::size_t p) {
    std::vector<double> fd, zr;
    fd_and_ref(p, fd, zr);
    for (std::size_t i = 0; i < fd.size(); ++i) fd[i] -= zr[i];
    err[p] = ev.norm_sq(fd);
    ref[p] = ev.norm_sq(zr);
  });
  double se = 0.0, sr = 0.0;
  for (std::size_t p = 0; p < n_paths; ++p) {
    se += err[p];
    sr += ref[p];
  }
  BumpCheck b;
  b.abs_error = std::sqrt(se / static_cast<double>(n_paths));
  b.norm = std::sqrt(sr / static_cast<double>(n_paths));
  b.rel_error = b.abs_error / b.norm;
  return b;
}

}  // namespace

BumpCheck first_variation_bump(const Model& model, const TimeGrid& grid, const Curve& y,
                               const Direction& h, double eps, std::size_t n_paths,
                               std::uint64_t seed, const WeightedSpace& space) {
  if (!(eps > 0.0)) throw InvalidArgument("bump size must be positive");
  const PathEnsemble base = simulate_from(model, grid, {y}, n_paths, seed);
  const PathEnsemble bump =
      simulate_from(model, grid, {Curve::combine(1.0, y, eps, h.as_curve())}, n_paths, seed);
  const TangentEnsemble z = first_variation(model, h, 0, base);
  const H1wEvaluator ev(model.kernel, grid, space);
  const std::size_t N = grid.steps;
  return compare(ev, n_paths, [&](std::size_t p, std::vector<double>& fd, std::vector<double>& zr) {
    std::vector<double> a;
    ev.values(bump, p, N, fd);
    ev.values(base, p, N, a);
    for (std::size_t i = 0; i < fd.size(); ++i) fd[i] = (fd[i] - a[i]) / eps;
    ev.values(z, p, N, zr);
  });
}

BumpCheck second_variation_bump(const Model& model, const TimeGrid& grid, const Curve& y,
                                const Direction& h, double eps, std::size_t n_paths,
                                std::uint64_t seed, const WeightedSpace& space, bool force) {
  if (!(eps > 0.0)) throw InvalidArgument("bump size must be positive");
  check_second_order_guard(model, force);
  const Curve hc = h.as_curve();
  const PathEnsemble base = simulate_from(model, grid, {y}, n_paths, seed);
  const PathEnsemble up = simulate_from(model, grid, {Curve::combine(1.0, y, eps, hc)}, n_paths, seed);
  const PathEnsemble dn = simulate_from(model, grid, {Curve::combine(1.0, y, -eps, hc)}, n_paths, seed);
  const TangentEnsemble z1 = first_variation(model, h, 0, base);
  const TangentEnsemble z2 = second_variation_diagonal(model, z1, base, force);
  const H1wEvaluator ev(model.kernel, grid, space);
  const std::size_t N = grid.steps;
  return compare(ev, n_paths, [&](std::size_t p, std::vector<double>& fd, std::vector<double>& zr) {
    std::vector<double> a, b;
    ev.values(up, p, N, fd);
    ev.values(base, p, N, a);
    ev.values(dn, p, N, b);
    for (std::size_t i = 0; i < fd.size(); ++i) fd[i] = (fd[i] - 2.0 * a[i] + b[i]) / (eps * eps);
    ev.values(z2, p, N, zr);
  });
}

std::vector<MollifiedRow> mollified_convergence_study(const Model& model, const TimeGrid& grid,
                                                      std::span<const double> deltas,
                                                      std::size_t s, std::size_t n_paths,
                                                      std::uint64_t seed, const WeightedSpace& space,
                                                      std::size_t column, std::size_t r_stride) {
  if (r_stride == 0) throw InvalidArgument("restart stride must be positive");
  const std::size_t N = grid.steps;
  if (s >= N) throw InvalidArgument("need s < T");
  const PathEnsemble base = simulate(model, grid, n_paths, seed);
  const H1wEvaluator ev0(model.kernel, grid, space);
  const Direction hK = Direction::kernel_column(model.kernel, 0.0, column);
  std::vector<TangentEnsemble> zr;
  for (std::size_t r = s; r < N; r += r_stride) zr.push_back(first_variation(model, hK, r, base));
  const TangentEnsemble& zs = zr.front();
  std::vector<MollifiedRow> rows;
  for (double delta : deltas) {
    MollifiedRow row;
    row.delta = delta;
    if (delta == 0.0) {
      const std::vector<double> zero(n_paths, 0.0);
      row.integrated = row.terminal = estimate(zero);
      rows.push_back(row);
      continue;
    }
    const Direction hd = Direction::kernel_column(model.kernel, delta, column);
    const PathEnsemble moll = simulate_mollified(model, delta, grid, n_paths, seed);
    const H1wEvaluator evd(model.kernel.shifted(delta), grid, space);
    const TangentEnsemble zt = first_variation(model, hd, s, base);
    std::vector<double> term(n_paths), integ(n_paths, 0.0);
    parallel_for(n_paths, [&](std::size_t p) {
      std::vector<double> a, b;
      ev0.values(zt, p, N, a);
      ev0.values(zs, p, N, b);
      for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
      term[p] = ev0.norm_sq(a);
    });
    std::size_t idx = 0;
    for (std::size_t r = s; r < N; r += r_stride, ++idx) {
      const TangentEnsemble zd = first_variation(model, hd, r, moll);
      const double w = static_cast<double>(std::min(r_stride, N - r)) * grid.dt();
      parallel_for(n_paths, [&](std::size_t p) {
        std::vector<double> a, b;
        evd.values(zd, p, N, a);
        ev0.values(zr[idx], p, N, b);
        for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
        integ[p] += w * ev0.norm_sq(a);
      });
    }
    row.terminal = estimate(term);
    row.integrated = estimate(integ);
    rows.push_back(row);
  }
  return rows;
}

MollificationRate mollification_rate(const Model& model, const TimeGrid& grid,
                                     std::span<const double> deltas, std::size_t n_paths,
                                     std::uint64_t seed) {
  SimOptions o;
  o.store_coefficients = o.store_increments = false;
  const PathEnsemble base = simulate(model, grid, n_paths, seed, o);
  MollificationRate r;
  std::vector<double> lx, ly;
  for (double delta : deltas) {
    const PathEnsemble md = simulate_mollified(model, delta, grid, n_paths, seed, o);
    MCEstimate best;
    std::vector<double> e(n_paths);
    for (std::size_t n = 0; n <= grid.steps; ++n) {
      for (std::size_t p = 0; p < n_paths; ++p) {
        double s = 0.0;
        for (std::size_t i = 0; i < base.d; ++i) {
          const double df = base.X(p, n, i) - md.X(p, n, i);
          s += df * df;
        }
        e[p] = s;
      }
      const MCEstimate est = estimate(e);
      if (est.mean > best.mean || best.n_samples == 0) best = est;
    }
    r.deltas.push_back(delta);
    r.sup_err.push_back(best);
    lx.push_back(std::log(delta));
    ly.push_back(std::log(best.mean));
  }
  if (lx.size() >= 2) {
    const double n = static_cast<double>(lx.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sx += lx[i];
      sy += ly[i];
      sxx += lx[i] * lx[i];
      sxy += lx[i] * ly[i];
    }
    r.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  return r;
}

}  // namespace volterra
