#include "volterra/functionals.hpp"

#include <algorithm>

#include "volterra/errors.hpp"

namespace volterra {

LinearFunctional LinearFunctional::point(double x, std::size_t d, std::size_t coord) {
  if (coord >= d) throw InvalidArgument("coordinate out of range");
  if (x < 0.0) throw OutOfDomain("evaluation point must be nonnegative");
  LinearFunctional l;
  l.d = d;
  l.x = {x};
  l.alpha.assign(d, 0.0);
  l.alpha[coord] = 1.0;
  l.beta.assign(d, 0.0);
  return l;
}

LinearFunctional LinearFunctional::h1w_inner(const Curve& g, const WeightedSpace& space) {
  const QuadratureRule& r = space.rule();
  LinearFunctional l;
  l.d = g.dim();
  l.x = r.nodes;
  l.alpha.resize(r.size() * l.d);
  l.beta.resize(r.size() * l.d);
  for (std::size_t q = 0; q < r.size(); ++q) {
    g.value(r.nodes[q], &l.alpha[q * l.d]);
    g.derivative(r.nodes[q], &l.beta[q * l.d]);
    for (std::size_t i = 0; i < l.d; ++i) {
      l.alpha[q * l.d + i] *= r.weights[q];
      l.beta[q * l.d + i] *= r.weights[q];
    }
  }
  return l;
}

LinearFunctional LinearFunctional::derivative_inner(const Curve& g, const WeightedSpace& space,
                                                    double shift) {
  if (shift < 0.0) throw NonPositiveTime("shift must be nonnegative");
  const QuadratureRule& r = space.rule();
  LinearFunctional l;
  l.d = g.dim();
  l.x.resize(r.size());
  l.alpha.assign(r.size() * l.d, 0.0);
  l.beta.resize(r.size() * l.d);
  for (std::size_t q = 0; q < r.size(); ++q) {
    l.x[q] = shift + r.nodes[q];
    g.derivative(r.nodes[q], &l.beta[q * l.d]);
    for (std::size_t i = 0; i < l.d; ++i) l.beta[q * l.d + i] *= r.weights[q];
  }
  return l;
}

bool LinearFunctional::uses_derivative() const {
  return std::any_of(beta.begin(), beta.end(), [](double b) { return b != 0.0; });
}

double LinearFunctional::apply(const Curve& y, double shift) const {
  if (y.dim() != d) throw InvalidArgument("functional and curve dimensions differ");
  std::vector<double> v(d), dv(d);
  const bool deriv = uses_derivative();
  double s = 0.0;
  for (std::size_t q = 0; q < x.size(); ++q) {
    y.value(shift + x[q], v.data());
    if (deriv) y.derivative(shift + x[q], dv.data());
    for (std::size_t i = 0; i < d; ++i) {
      s += alpha[q * d + i] * v[i];
      if (deriv) s += beta[q * d + i] * dv[i];
    }
  }
  return s;
}

Projection::Projection(const Kernel& K, double dt, std::size_t steps, const LinearFunctional& l)
    : steps_(steps), d_(K.dim()), l_(l) {
  if (l.d != d_) throw InvalidArgument("functional and kernel dimensions differ");
  const int derivs = l.uses_derivative() ? 1 : 0;
  const WeightTable W(K, dt, steps, l.x, derivs);
  pa_.assign((steps + 1) * d_, 0.0);
  pb_.assign((steps + 1) * d_, 0.0);
  for (std::size_t j = 1; j <= steps; ++j)
    for (std::size_t q = 0; q < l.x.size(); ++q)
      for (std::size_t i = 0; i < d_; ++i) {
        const double al = l.alpha[q * d_ + i], be = l.beta[q * d_ + i];
        pa_[j * d_ + i] += al * W.A(q, j, 0)[i];
        pb_[j * d_ + i] += al * W.B(q, j, 0)[i];
        if (derivs) {
          pa_[j * d_ + i] += be * W.A(q, j, 1)[i];
          pb_[j * d_ + i] += be * W.B(q, j, 1)[i];
        }
      }
}

double Projection::apply(const Field& f, std::size_t p, std::size_t n, std::size_t L) const {
  if (!f.has_coefficients()) throw IncrementMissing("field was stored without coefficient terms");
  if (n < f.start || n + L - f.start > steps_) throw InvalidArgument("projection table too short");
  const double shift = (f.grid.t(n) - f.grid.t(f.start)) + static_cast<double>(L) * f.grid.dt();
  double s = l_.apply(f.initial(p), shift);
  for (std::size_t k = f.start; k < n; ++k) {
    const double* a = A(n + L - k);
    const double* b = B(n + L - k);
    const double* ca = f.coef_a(p, k);
    const double* cb = f.coef_b(p, k);
    for (std::size_t i = 0; i < d_; ++i) s += a[i] * ca[i] + b[i] * cb[i];
  }
  return s;
}

}  // namespace volterra
