#include "volterra/scheme.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "volterra/errors.hpp"

namespace volterra {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline void accumulate(std::size_t d, const double* A, const double* B, const double* cA,
                       const double* cB, double* acc) {
  for (std::size_t i = 0; i < d; ++i) acc[i] += A[i] * cA[i] + B[i] * cB[i];
}

double safe_eval(const ScalarKernel& k, double u, int order) {
  if (u == 0.0 && k.singular_at_origin()) return std::numeric_limits<double>::infinity();
  return order == 0 ? k(u) : k.derivative(u);
}

}  // namespace

void scheme_weights(const Kernel& K, double dt, std::size_t j, double x, int order, double* A,
                    double* B) {
  const double a = static_cast<double>(j - 1) * dt, b = static_cast<double>(j) * dt;
  for (std::size_t i = 0; i < K.dim(); ++i) {
    const ScalarKernel& k = K[i];
    const double lo = a + x, hi = b + x;
    const double Ai = k.integral(lo, hi);
    const double F = k.square_integral(lo, hi);
    const double sg = Ai < 0.0 ? -1.0 : 1.0;
    if (order == 0) {
      A[i] = Ai;
      B[i] = sg * std::sqrt(F / dt);
      continue;
    }
    const double khi = safe_eval(k, hi, 0), klo = safe_eval(k, lo, 0);
    const double F1 = khi * khi - klo * klo;
    const double root = std::sqrt(F * dt);
    if (order == 1) {
      A[i] = khi - klo;
      B[i] = F > 0.0 ? sg * F1 / (2.0 * root) : 0.0;
      continue;
    }
    const double dhi = safe_eval(k, hi, 1), dlo = safe_eval(k, lo, 1);
    const double F2 = 2.0 * (khi * dhi - klo * dlo);
    A[i] = dhi - dlo;
    B[i] = F > 0.0 ? sg * (F2 / (2.0 * root) - F1 * F1 / (4.0 * F * root)) : 0.0;
  }
}

WeightTable::WeightTable(const Kernel& K, double dt, std::size_t steps, std::vector<double> x,
                         int derivs)
    : steps_(steps), d_(K.dim()), derivs_(derivs), x_(std::move(x)) {
  if (derivs < 0 || derivs > 2) throw InvalidArgument("weight table derivative order must be 0..2");
  const std::size_t n = x_.size() * (steps_ + 1) * d_;
  for (int o = 0; o <= derivs_; ++o) {
    a_[o].assign(n, kNaN);
    b_[o].assign(n, kNaN);
  }
  for (std::size_t q = 0; q < x_.size(); ++q)
    for (std::size_t j = 1; j <= steps_; ++j)
      for (int o = 0; o <= derivs_; ++o) {
        const std::size_t off = (q * (steps_ + 1) + j) * d_;
        scheme_weights(K, dt, j, x_[q], o, &a_[o][off], &b_[o][off]);
      }
}

void IncrementSource::fill(std::uint64_t path, std::size_t step, double sqrt_dt, std::size_t m,
                           double* out) const {
  const std::uint64_t base = antithetic ? (path & ~std::uint64_t{1}) : path;
  const double sign = (antithetic && (path & 1U)) ? -1.0 : 1.0;
  for (std::size_t j = 0; j < m; ++j) out[j] = sign * sqrt_dt * rng.normal(base, step, j);
}

void run_recursion(const WeightTable& W, std::size_t s, std::size_t N, std::size_t d,
                   const double* y, const StepFn& step, double* v, double* cA, double* cB) {
  if (W.x().empty() || W.x()[0] != 0.0) throw InvalidArgument("weight table must start at x = 0");
  if (W.steps() < N - s) throw GridMismatch("weight table shorter than the recursion");
  for (std::size_t n = s; n <= N; ++n) {
    double* vn = v + n * d;
    for (std::size_t i = 0; i < d; ++i) vn[i] = y[n * d + i];
    for (std::size_t k = s; k < n; ++k)
      accumulate(d, W.A(0, n - k), W.B(0, n - k), cA + k * d, cB + k * d, vn);
    if (n < N) step(n, vn, cA + n * d, cB + n * d);
  }
}

void initial_value(const Curve& y, const TimeGrid& g, std::size_t s, std::size_t n, double x,
                   int order, double* out) {
  const double u = (g.t(n) - g.t(s)) + x;
  if (order == 0) {
    y.value(u, out);
  } else if (order == 1) {
    y.derivative(u, out);
  } else {
    // Curves carry one derivative; the second is a central difference of it.
    const std::size_t d = y.dim();
    std::vector<double> lo(d), hi(d);
    const double h = 1e-6 * std::max(1.0, u);
    const double a = std::max(0.0, u - h), b = u + h;
    y.derivative(a, lo.data());
    y.derivative(b, hi.data());
    for (std::size_t i = 0; i < d; ++i) out[i] = (hi[i] - lo[i]) / (b - a);
  }
}

void field_value(const Field& f, const WeightTable& W, std::size_t q, std::size_t p, std::size_t n,
                 int order, double* out) {
  if (!f.has_coefficients()) throw IncrementMissing("field was stored without coefficient terms");
  if (order > W.derivs()) throw InvalidArgument("weight table lacks the requested derivative");
  if (n < f.start) throw InvalidArgument("time before the field's start");
  initial_value(f.initial(p), f.grid, f.start, n, W.x()[q], order, out);
  for (std::size_t k = f.start; k < n; ++k)
    accumulate(f.d, W.A(q, n - k, order), W.B(q, n - k, order), f.coef_a(p, k), f.coef_b(p, k), out);
}

Curve field_state(const Field& f, const Kernel& K, std::size_t p, std::size_t n) {
  if (!f.has_coefficients()) throw IncrementMissing("field was stored without coefficient terms");
  if (n == f.start) return f.initial(p);
  const std::size_t d = f.d, s = f.start;
  const double dt = f.grid.dt();
  const TimeGrid g = f.grid;
  std::vector<double> cA(f.coef_a(p, s), f.coef_a(p, s) + (n - s) * d);
  std::vector<double> cB(f.coef_b(p, s), f.coef_b(p, s) + (n - s) * d);
  const Curve y = f.initial(p);
  auto make = [=](int order) {
    return [=](double x, double* out) {
      initial_value(y, g, s, n, x, order, out);
      std::vector<double> A(d), B(d);
      for (std::size_t k = s; k < n; ++k) {
        scheme_weights(K, dt, n - k, x, order, A.data(), B.data());
        accumulate(d, A.data(), B.data(), &cA[(k - s) * d], &cB[(k - s) * d], out);
      }
    };
  };
  return Curve::analytic(d, make(0), make(1));
}

}  // namespace volterra
