#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace volterra {

// Drift b: R^d -> R^d and diffusion sigma: R^d -> R^{d x m} with optional derivatives.
// Layouts (row-major):
//   b      d           sigma      d*m          [i*m + j]
//   db     d*d         [i*d + k] = d b_i / d x_k
//   dsigma d*m*d       [(i*m + j)*d + k]
//   d2b    d*d*d       [(i*d + k)*d + l]
//   d2sigma d*m*d*d    [((i*m + j)*d + k)*d + l]
struct Coefficients {
  using Map = std::function<void(const double* x, double* out)>;

  std::size_t d = 1, m = 1;
  std::string name;
  Map b, sigma;
  Map db, dsigma, d2b, d2sigma;

  bool differentiable = false;     // derivative maps are set
  bool bounded_derivatives = false;  // bounded Db, D2b, Dsigma, D2sigma, Lipschitz D2
  bool constant_sigma = false;
  bool zero_second_derivative = false;
  std::optional<std::vector<double>> linear_drift;  // b(x) = a x, a is d*d

  void require_derivatives(const std::string& op) const;
};

namespace coefficients {

// b = 0, sigma = s I (d = m).
Coefficients additive(std::size_t d = 1, double s = 1.0);
// b(x) = a x, sigma = s I.
Coefficients linear(std::vector<double> a, std::size_t d = 1, double s = 1.0);
// b = theta tanh(x), sigma = s0 + s1 tanh(x); bounded derivatives of every order.
Coefficients smooth(double theta = -0.5, double s0 = 1.0, double s1 = 0.3);
// Log-price / variance pair: b = (-psi(x2)^2/2, 0), sigma = [[rho psi, rhobar psi], [0, nu]].
// psi = e^x, or e^{kappa tanh(x / kappa)} for the saturated variant.
Coefficients rough_bergomi(double rho = -0.7, double nu = 0.05, std::optional<double> kappa = {});
// psi = sqrt(x+ + eps), b = (-psi^2/2, a1 + a2 x2), sigma = [[rho psi, rhobar psi], [0, a3 psi]].
Coefficients rough_heston(double rho = -0.7, double a1 = 0.04, double a2 = -1.0, double a3 = 0.3,
                          double eps = 1e-8);

}  // namespace coefficients

}  // namespace volterra
