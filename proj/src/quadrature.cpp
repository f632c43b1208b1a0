#include "volterra/quadrature.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "volterra/errors.hpp"

namespace volterra::quad {

namespace {

GaussRule make_rule(int n) {
  GaussRule r;
  if (n == 1) return {{0.0}, {2.0}};
  r.nodes.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = pk;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    r.nodes[i] = x;
    r.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return r;
}

}  // namespace

const GaussRule& gauss_legendre(int order) {
  if (order < 1) throw InvalidArgument("Gauss rule order must be positive");
  static std::mutex m;
  static std::map<int, std::unique_ptr<GaussRule>> cache;
  std::lock_guard<std::mutex> lock(m);
  auto& slot = cache[order];
  if (!slot) slot = std::make_unique<GaussRule>(make_rule(order));
  return *slot;
}

double gauss(const std::function<double(double)>& f, double a, double b, int order) {
  const GaussRule& r = gauss_legendre(order);
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  double s = 0.0;
  for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * f(mid + half * r.nodes[i]);
  return s * half;
}

double composite(const std::function<double(double)>& f, double a, double b,
                 int pieces, int order) {
  double s = 0.0;
  const double h = (b - a) / pieces;
  for (int i = 0; i < pieces; ++i) s += gauss(f, a + i * h, a + (i + 1) * h, order);
  return s;
}

double left_singular(const std::function<double(double)>& f, double a, double b,
                     int order, int power) {
  const double len = b - a;
  auto g = [&](double v) {
    const double vp = std::pow(v, power - 1);
    return f(a + len * vp * v) * power * vp * len;
  };
  return gauss(g, 0.0, 1.0, order);
}

double tanh_sinh(const std::function<double(double)>& f, double a, double b, double tol) {
  boost::math::quadrature::tanh_sinh<double> integrator;
  return integrator.integrate(f, a, b, tol);
}

double origin_singular(const std::function<double(double)>& f, double upper,
                       double innermost, int order) {
  // Cells [upper/4^{k+1}, upper/4^k] down to `innermost`, then a singular cell.
  double s = 0.0;
  double hi = upper;
  while (hi > innermost) {
    const double lo = hi / 4.0;
    s += gauss(f, lo, hi, order);
    hi = lo;
  }
  s += left_singular(f, 0.0, hi, order, 8);
  return s;
}

}  // namespace volterra::quad
