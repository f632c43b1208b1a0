#include "volterra/coefficients.hpp"

#include <algorithm>
#include <cmath>

#include "volterra/errors.hpp"

namespace volterra {

void Coefficients::require_derivatives(const std::string& op) const {
  if (!differentiable)
    throw CoefficientsNotDifferentiable(op + " needs differentiable coefficients; '" + name +
                                        "' provides none");
}

namespace coefficients {

namespace {

Coefficients::Map zeros(std::size_t n) {
  return [n](const double*, double* out) { std::fill(out, out + n, 0.0); };
}

}  // namespace

Coefficients additive(std::size_t d, double s) {
  Coefficients c;
  c.d = c.m = d;
  c.name = "additive";
  c.b = zeros(d);
  c.sigma = [d, s](const double*, double* out) {
    std::fill(out, out + d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) out[i * d + i] = s;
  };
  c.db = zeros(d * d);
  c.dsigma = zeros(d * d * d);
  c.d2b = zeros(d * d * d);
  c.d2sigma = zeros(d * d * d * d);
  c.differentiable = c.bounded_derivatives = c.constant_sigma = c.zero_second_derivative = true;
  c.linear_drift = std::vector<double>(d * d, 0.0);
  return c;
}

Coefficients linear(std::vector<double> a, std::size_t d, double s) {
  if (a.size() != d * d) throw InvalidArgument("linear drift matrix must be d x d");
  Coefficients c = additive(d, s);
  c.name = "linear";
  c.b = [a, d](const double* x, double* out) {
    for (std::size_t i = 0; i < d; ++i) {
      double v = 0.0;
      for (std::size_t k = 0; k < d; ++k) v += a[i * d + k] * x[k];
      out[i] = v;
    }
  };
  c.db = [a](const double*, double* out) { std::copy(a.begin(), a.end(), out); };
  // Unbounded drift: fine for simulation, not for the backward equation.
  c.bounded_derivatives = std::all_of(a.begin(), a.end(), [](double v) { return v == 0.0; });
  c.linear_drift = a;
  return c;
}

Coefficients smooth(double theta, double s0, double s1) {
  Coefficients c;
  c.name = "smooth";
  c.b = [theta](const double* x, double* out) { out[0] = theta * std::tanh(x[0]); };
  c.sigma = [s0, s1](const double* x, double* out) { out[0] = s0 + s1 * std::tanh(x[0]); };
  auto d1 = [](double k) {
    return [k](const double* x, double* out) {
      const double t = std::tanh(x[0]);
      out[0] = k * (1.0 - t * t);
    };
  };
  auto d2 = [](double k) {
    return [k](const double* x, double* out) {
      const double t = std::tanh(x[0]);
      out[0] = -2.0 * k * t * (1.0 - t * t);
    };
  };
  c.db = d1(theta);
  c.dsigma = d1(s1);
  c.d2b = d2(theta);
  c.d2sigma = d2(s1);
  c.differentiable = c.bounded_derivatives = true;
  c.constant_sigma = s1 == 0.0;
  c.zero_second_derivative = theta == 0.0 && s1 == 0.0;
  return c;
}

Coefficients rough_bergomi(double rho, double nu, std::optional<double> kappa) {
  if (std::abs(rho) > 1.0) throw InvalidArgument("correlation must lie in [-1, 1]");
  const double rb = std::sqrt(1.0 - rho * rho);
  // g = log psi and its derivatives.
  struct G {
    double g, g1, g2;
  };
  auto gfun = [kappa](double x) -> G {
    if (!kappa) return {x, 1.0, 0.0};
    const double k = *kappa, t = std::tanh(x / k), s = 1.0 - t * t;
    return {k * t, s, -2.0 / k * t * s};
  };
  Coefficients c;
  c.d = c.m = 2;
  c.name = kappa ? "rbergomi_smooth" : "rbergomi";
  c.b = [gfun](const double* x, double* out) {
    out[0] = -0.5 * std::exp(2.0 * gfun(x[1]).g);
    out[1] = 0.0;
  };
  c.sigma = [gfun, rho, rb, nu](const double* x, double* out) {
    const double p = std::exp(gfun(x[1]).g);
    out[0] = rho * p;
    out[1] = rb * p;
    out[2] = 0.0;
    out[3] = nu;
  };
  c.db = [gfun](const double* x, double* out) {
    const G g = gfun(x[1]);
    std::fill(out, out + 4, 0.0);
    out[1] = -std::exp(2.0 * g.g) * g.g1;  // d b_0 / d x_1
  };
  c.dsigma = [gfun, rho, rb](const double* x, double* out) {
    const G g = gfun(x[1]);
    const double p1 = std::exp(g.g) * g.g1;
    std::fill(out, out + 8, 0.0);
    out[(0 * 2 + 0) * 2 + 1] = rho * p1;
    out[(0 * 2 + 1) * 2 + 1] = rb * p1;
  };
  c.d2b = [gfun](const double* x, double* out) {
    const G g = gfun(x[1]);
    std::fill(out, out + 8, 0.0);
    out[(0 * 2 + 1) * 2 + 1] = -std::exp(2.0 * g.g) * (2.0 * g.g1 * g.g1 + g.g2);
  };
  c.d2sigma = [gfun, rho, rb](const double* x, double* out) {
    const G g = gfun(x[1]);
    const double p2 = std::exp(g.g) * (g.g1 * g.g1 + g.g2);
    std::fill(out, out + 16, 0.0);
    out[((0 * 2 + 0) * 2 + 1) * 2 + 1] = rho * p2;
    out[((0 * 2 + 1) * 2 + 1) * 2 + 1] = rb * p2;
  };
  c.differentiable = true;
  c.bounded_derivatives = kappa.has_value();
  c.constant_sigma = false;
  return c;
}

Coefficients rough_heston(double rho, double a1, double a2, double a3, double eps) {
  if (std::abs(rho) > 1.0) throw InvalidArgument("correlation must lie in [-1, 1]");
  const double rb = std::sqrt(1.0 - rho * rho);
  Coefficients c;
  c.d = c.m = 2;
  c.name = "rheston";
  c.b = [a1, a2, eps](const double* x, double* out) {
    out[0] = -0.5 * (std::max(x[1], 0.0) + eps);
    out[1] = a1 + a2 * x[1];
  };
  c.sigma = [rho, rb, a3, eps](const double* x, double* out) {
    const double p = std::sqrt(std::max(x[1], 0.0) + eps);
    out[0] = rho * p;
    out[1] = rb * p;
    out[2] = 0.0;
    out[3] = a3 * p;
  };
  return c;
}

}  // namespace coefficients

}  // namespace volterra
