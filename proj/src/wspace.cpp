#include "volterra/wspace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "volterra/errors.hpp"
#include "volterra/quadrature.hpp"

namespace volterra {

double WeightSpec::operator()(double x) const {
  if (x <= 0.0) return beta == 0.0 ? 1.0 : 0.0;
  return std::pow(x, beta) * std::exp(-decay * x);
}

bool WeightSpec::admissible_for(double H) const {
  return beta > std::max(1.0 - 2.0 * H, 0.0) && beta < 1.0;
}

void WeightSpec::validate() const {
  if (!(beta < 1.0) || beta < 0.0)
    throw WeightNotAdmissible("beta = " + std::to_string(beta) +
                              " leaves 1/w non-integrable at the origin (need 0 <= beta < 1)");
  if (decay < 0.0) throw WeightNotAdmissible("decay must be nonnegative");
  if (hurst && !admissible_for(*hurst))
    throw WeightNotAdmissible("beta = " + std::to_string(beta) + " outside ((1-2H) v 0, 1) for H = " +
                              std::to_string(*hurst));
}

SpaceGrid SpaceGrid::standard(double first, double ratio, double step, double x_max) {
  if (!(first > 0.0) || !(ratio > 1.0) || !(step > 0.0) || !(x_max > first))
    throw InvalidArgument("invalid space grid parameters");
  SpaceGrid g;
  g.nodes.push_back(0.0);
  double x = first;
  while (x < x_max && x * (ratio - 1.0) < step) {
    g.nodes.push_back(x);
    x *= ratio;
  }
  double last = g.nodes.back();
  const auto n = static_cast<std::size_t>(std::ceil((x_max - last) / step));
  for (std::size_t k = 1; k <= n; ++k) {
    const double v = last + (x_max - last) * static_cast<double>(k) / static_cast<double>(n);
    g.nodes.push_back(k == n ? x_max : v);
  }
  return g;
}

QuadratureRule QuadratureRule::build(const SpaceGrid& grid, const WeightSpec& w, int order,
                                     int first_cell_power) {
  const quad::GaussRule& gr = quad::gauss_legendre(order);
  QuadratureRule r;
  const std::size_t cells = grid.size() - 1;
  r.nodes.reserve(cells * gr.nodes.size());
  r.weights.reserve(cells * gr.nodes.size());
  const double x1 = grid.nodes[1];
  const int p = first_cell_power;
  for (std::size_t i = 0; i < gr.nodes.size(); ++i) {
    const double v = 0.5 * (gr.nodes[i] + 1.0);
    const double x = x1 * std::pow(v, p);
    r.nodes.push_back(x);
    r.weights.push_back(0.5 * gr.weights[i] * p * x1 * std::pow(v, p - 1) * w(x));
  }
  for (std::size_t c = 1; c < cells; ++c) {
    const double a = grid.nodes[c], b = grid.nodes[c + 1];
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (std::size_t i = 0; i < gr.nodes.size(); ++i) {
      const double x = mid + half * gr.nodes[i];
      r.nodes.push_back(x);
      r.weights.push_back(half * gr.weights[i] * w(x));
    }
  }
  return r;
}

// ---------------------------------------------------------------- Curve

struct Curve::Impl {
  virtual ~Impl() = default;
  virtual void eval(double x, bool deriv, double* out) const = 0;
  virtual bool analytic() const = 0;
  virtual bool singular() const { return false; }
  virtual const SpaceGrid* grid() const { return nullptr; }
};

namespace {

struct AnalyticImpl final : Curve::Impl {
  Curve::Fn value, derivative;
  bool singular_flag;
  AnalyticImpl(Curve::Fn v, Curve::Fn d, bool s)
      : value(std::move(v)), derivative(std::move(d)), singular_flag(s) {}
  void eval(double x, bool deriv, double* out) const override {
    (deriv ? derivative : value)(x, out);
  }
  bool analytic() const override { return true; }
  bool singular() const override { return singular_flag; }
};

struct TabulatedImpl final : Curve::Impl {
  SpaceGrid g;
  std::size_t dim;
  std::vector<double> values, derivs;
  void eval(double x, bool deriv, double* out) const override {
    const auto& n = g.nodes;
    if (x < 0.0 || x > n.back()) {
      std::fill(out, out + dim, 0.0);
      return;
    }
    std::size_t c = static_cast<std::size_t>(std::upper_bound(n.begin(), n.end(), x) - n.begin());
    c = std::clamp<std::size_t>(c, 1, n.size() - 1) - 1;
    const double h = n[c + 1] - n[c];
    const double u = (x - n[c]) / h;
    for (std::size_t i = 0; i < dim; ++i) {
      const double f0 = values[c * dim + i], f1 = values[(c + 1) * dim + i];
      if (!deriv) {
        out[i] = f0 + u * (f1 - f0);
      } else if (!derivs.empty()) {
        const double d0 = derivs[c * dim + i], d1 = derivs[(c + 1) * dim + i];
        out[i] = d0 + u * (d1 - d0);
      } else {
        out[i] = (f1 - f0) / h;
      }
    }
  }
  bool analytic() const override { return false; }
  const SpaceGrid* grid() const override { return &g; }
};

struct CombineImpl final : Curve::Impl {
  double a, b;
  Curve f, g;
  std::size_t dim;
  void eval(double x, bool deriv, double* out) const override {
    std::vector<double> tmp(dim);
    if (deriv) {
      f.derivative(x, out);
      g.derivative(x, tmp.data());
    } else {
      f.value(x, out);
      g.value(x, tmp.data());
    }
    for (std::size_t i = 0; i < dim; ++i) {
      const double fa = a == 0.0 ? 0.0 : a * out[i];
      const double gb = b == 0.0 ? 0.0 : b * tmp[i];
      out[i] = fa + gb;
    }
  }
  bool analytic() const override { return f.is_analytic() && g.is_analytic(); }
  bool singular() const override {
    return (a != 0.0 && f.singular_at_origin()) || (b != 0.0 && g.singular_at_origin());
  }
  const SpaceGrid* grid() const override { return f.grid() ? f.grid() : g.grid(); }
};

}  // namespace

Curve Curve::analytic(std::size_t dim, Fn value, Fn derivative, bool singular_at_origin) {
  Curve c;
  c.impl_ = std::make_shared<AnalyticImpl>(std::move(value), std::move(derivative),
                                           singular_at_origin);
  c.dim_ = dim;
  return c;
}

Curve Curve::tabulated(const SpaceGrid& grid, std::size_t dim, std::vector<double> values,
                       std::vector<double> derivatives) {
  if (values.size() != grid.size() * dim)
    throw GridMismatch("curve values do not match the grid size");
  if (!derivatives.empty() && derivatives.size() != values.size())
    throw GridMismatch("derivative values do not match the grid size");
  auto impl = std::make_shared<TabulatedImpl>();
  impl->g = grid;
  impl->dim = dim;
  impl->values = std::move(values);
  impl->derivs = std::move(derivatives);
  Curve c;
  c.impl_ = std::move(impl);
  c.dim_ = dim;
  return c;
}

Curve Curve::constant(std::vector<double> v) {
  const std::size_t d = v.size();
  return analytic(
      d, [v](double, double* out) { std::copy(v.begin(), v.end(), out); },
      [d](double, double* out) { std::fill(out, out + d, 0.0); });
}

Curve Curve::zero(std::size_t dim) { return constant(std::vector<double>(dim, 0.0)); }

Curve Curve::combine(double a, const Curve& f, double b, const Curve& g) {
  if (f.dim() != g.dim()) throw GridMismatch("curve dimensions differ");
  if (f.grid() && g.grid() && !(*f.grid() == *g.grid()))
    throw GridMismatch("tabulated curves live on different grids");
  auto impl = std::make_shared<CombineImpl>();
  impl->a = a;
  impl->b = b;
  impl->f = f;
  impl->g = g;
  impl->dim = f.dim();
  Curve c;
  c.impl_ = std::move(impl);
  c.dim_ = f.dim();
  return c;
}

bool Curve::is_analytic() const { return impl_ && impl_->analytic(); }
bool Curve::singular_at_origin() const { return impl_ && offset_ == 0.0 && impl_->singular(); }
const SpaceGrid* Curve::grid() const { return impl_ ? impl_->grid() : nullptr; }

void Curve::value(double x, double* out) const { impl_->eval(x + offset_, false, out); }
void Curve::derivative(double x, double* out) const { impl_->eval(x + offset_, true, out); }

double Curve::value(double x, std::size_t i) const {
  double buf[16];
  std::vector<double> big;
  double* out = buf;
  if (dim_ > 16) {
    big.resize(dim_);
    out = big.data();
  }
  value(x, out);
  return out[i];
}

double Curve::derivative(double x, std::size_t i) const {
  double buf[16];
  std::vector<double> big;
  double* out = buf;
  if (dim_ > 16) {
    big.resize(dim_);
    out = big.data();
  }
  derivative(x, out);
  return out[i];
}

Curve Curve::shifted(double t) const {
  if (t < 0.0) throw NonPositiveTime("shift must be nonnegative");
  Curve c = *this;
  c.offset_ = offset_ + t;
  return c;
}

// ---------------------------------------------------------------- WeightedSpace

WeightedSpace::WeightedSpace(WeightSpec w, SpaceGrid grid, int order)
    : w_(w), grid_(std::move(grid)) {
  w_.validate();
  rule_ = QuadratureRule::build(grid_, w_, order);
}

void WeightedSpace::check_grid(const Curve& f) const {
  if (f.grid() && !(*f.grid() == grid_))
    throw GridMismatch("curve is tabulated on a different grid");
}

double WeightedSpace::inner_l2w(const Curve& f, const Curve& g) const {
  check_grid(f);
  check_grid(g);
  if (f.dim() != g.dim()) throw GridMismatch("curve dimensions differ");
  const std::size_t d = f.dim();
  std::vector<double> a(d), b(d);
  double s = 0.0;
  for (std::size_t q = 0; q < rule_.size(); ++q) {
    f.value(rule_.nodes[q], a.data());
    g.value(rule_.nodes[q], b.data());
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) dot += a[i] * b[i];
    s += rule_.weights[q] * dot;
  }
  return s;
}

double WeightedSpace::derivative_part(const Curve& f, const QuadratureRule& r) const {
  const std::size_t d = f.dim();
  std::vector<double> a(d);
  double s = 0.0;
  for (std::size_t q = 0; q < r.size(); ++q) {
    f.derivative(r.nodes[q], a.data());
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) dot += a[i] * a[i];
    s += r.weights[q] * dot;
  }
  return s;
}

double WeightedSpace::inner_h1w(const Curve& f, const Curve& g) const {
  check_grid(f);
  check_grid(g);
  const std::size_t d = f.dim();
  std::vector<double> a(d), b(d);
  double s = 0.0;
  for (std::size_t q = 0; q < rule_.size(); ++q) {
    const double x = rule_.nodes[q];
    f.value(x, a.data());
    g.value(x, b.data());
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) dot += a[i] * b[i];
    f.derivative(x, a.data());
    g.derivative(x, b.data());
    for (std::size_t i = 0; i < d; ++i) dot += a[i] * b[i];
    s += rule_.weights[q] * dot;
  }
  return s;
}

double WeightedSpace::norm_l2w(const Curve& f) const { return std::sqrt(inner_l2w(f, f)); }

double WeightedSpace::norm_h1w(const Curve& f) const {
  check_grid(f);
  const double l2 = inner_l2w(f, f);
  double der = derivative_part(f, rule_);
  if (f.singular_at_origin()) {
    // Divergence test: push the first node four decades towards 0.
    SpaceGrid fine = grid_;
    const double x1 = grid_.nodes[1];
    std::vector<double> extra;
    for (double x = x1 * 1e-4; x < x1 * 0.999; x *= 1.15) extra.push_back(x);
    fine.nodes.insert(fine.nodes.begin() + 1, extra.begin(), extra.end());
    const double der_fine = derivative_part(f, QuadratureRule::build(fine, w_));
    if (!(der_fine <= 1.1 * der)) return std::numeric_limits<double>::infinity();
    der = der_fine;
  }
  return std::sqrt(l2 + der);
}

double inner_l2w(const Curve& f, const Curve& g, const WeightSpec& w, const SpaceGrid& grid) {
  return WeightedSpace(w, grid).inner_l2w(f, g);
}

double norm_h1w(const Curve& f, const WeightSpec& w, const SpaceGrid& grid) {
  return WeightedSpace(w, grid).norm_h1w(f);
}

Curve shift(const Curve& f, double t) { return f.shifted(t); }

std::vector<double> evaluate(const Curve& f, double x, const SpaceGrid& grid) {
  if (x < 0.0 || x > grid.x_max())
    throw OutOfDomain("evaluation point " + std::to_string(x) + " outside [0, X_max]");
  if (x == 0.0 && f.singular_at_origin())
    throw SingularAtOrigin("curve is singular at the origin");
  std::vector<double> out(f.dim());
  f.value(x, out.data());
  return out;
}

// ---------------------------------------------------------------- RKHS constant

namespace {

// int_0^L s^beta e^{-c s} ds, substitution s = L v^{1/(1+beta)}.
double weight_mass(const WeightSpec& w, double L) {
  if (L <= 0.0) return 0.0;
  const double e = 1.0 / (1.0 + w.beta);
  auto f = [&](double v) { return std::exp(-w.decay * L * std::pow(v, e)); };
  return std::pow(L, 1.0 + w.beta) * e * quad::composite(f, 0.0, 1.0, 16, 16);
}

// int_0^L s^-beta e^{c s} ds, substitution s = L v^{1/(1-beta)}.
double inverse_weight_mass(const WeightSpec& w, double L) {
  const double e = 1.0 / (1.0 - w.beta);
  auto f = [&](double v) { return std::exp(w.decay * L * std::pow(v, e)); };
  return std::pow(L, 1.0 - w.beta) * e * quad::composite(f, 0.0, 1.0, 16, 16);
}

}  // namespace

double rkhs_constant(const WeightSpec& w, double x, double L) {
  if (!(w.beta < 1.0))
    throw WeightNotAdmissible("|1/w|_{L1(0,L)} diverges for beta >= 1");
  if (!(L > x) || x < 0.0) throw InvalidArgument("need L > x >= 0");
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 8; ++k) {
    const double Lk = x + (L - x) * std::ldexp(1.0, -k);
    const double winv = inverse_weight_mass(w, Lk);
    const double wx = weight_mass(w, Lk) - weight_mass(w, x);
    if (!(wx > 0.0)) continue;
    best = std::min(best, 2.0 * (winv * wx + 1.0) / wx);
  }
  return std::sqrt(best);
}

std::vector<AdmissibilityRow> check_admissible(const WeightSpec& w, std::span<const double> ts) {
  std::vector<AdmissibilityRow> rows;
  for (double t : ts) {
    double sup = 0.0;
    if (t == 0.0) {
      sup = 1.0;
    } else {
      for (double u = 1e-8; u <= 40.0; u *= 1.01) {
        const double r = std::pow(u / (u + t), w.beta) * std::exp(w.decay * t);
        sup = std::max(sup, r);
      }
    }
    const double bound = std::exp(w.decay * t);
    rows.push_back({t, sup, bound, sup <= bound * (1.0 + 1e-12)});
  }
  return rows;
}

}  // namespace volterra
