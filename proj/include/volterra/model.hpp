#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "volterra/coefficients.hpp"
#include "volterra/kernels.hpp"
#include "volterra/wspace.hpp"

namespace volterra {

enum class InitialKind { deterministic, fbm_type1, ou_stationary };

// X_0 = base + (optional) F_0-measurable Gaussian curve, sampled once per path.
class InitialCurve {
 public:
  InitialCurve() = default;
  static InitialCurve deterministic(Curve c);
  // Mandelbrot-van Ness history term of component `coord`, divided by Gamma(H + 1/2);
  // the history integral is truncated at -history and discretized on cells of width
  // `cell` over [-1, 0], widening geometrically beyond.
  static InitialCurve fbm_type1(double H, Curve base, std::size_t coord = 0,
                                double history = 50.0, double cell = 1.0 / 64.0);
  // int_{-inf}^0 e^{-rate (t - s)} s dW_s = e^{-rate t} xi, xi ~ N(0, s^2 / (2 rate)).
  static InitialCurve ou_stationary(double rate, double scale, Curve base, std::size_t coord = 0);

  InitialKind kind() const { return kind_; }
  bool random() const { return kind_ != InitialKind::deterministic; }
  const Curve& base() const { return base_; }
  std::size_t dim() const { return base_.dim(); }
  // Path p's curve; deterministic curves ignore (seed, p).
  Curve sample(std::uint64_t seed, std::uint64_t path) const;
  std::string describe() const;

 private:
  InitialKind kind_ = InitialKind::deterministic;
  Curve base_;
  double hurst_ = 0.5, rate_ = 1.0, scale_ = 1.0;
  std::size_t coord_ = 0;
  std::vector<double> edges_;  // history cell edges in (-history, 0], increasing
};

struct Model {
  std::string name;
  Kernel kernel;
  WeightSpec weight;
  Coefficients coef;
  InitialCurve x0;

  std::size_t d() const { return coef.d; }
  std::size_t m() const { return coef.m; }
  void validate() const;
  Model with_kernel(Kernel k) const;
  Model with_initial(InitialCurve c) const;
  std::string fingerprint() const;
};

// Weight exponent in the middle of the admissible window ((1 - 2H) v 0, 1).
double default_beta(double H);

namespace presets {

Model brownian(double x0 = 0.0, double sigma = 1.0);
Model fbm_type2(double H, double beta);
Model fbm_type1(double H, double beta);
Model ou_stationary();
Model rough_bergomi(double H, double beta, double v0 = 0.0, double rho = -0.7, double nu = 0.05);
Model rough_bergomi_smooth(double H, double beta, double v0 = 0.0, double rho = -0.7,
                           double nu = 0.3, double kappa = 1.0);
Model rough_heston(double H, double beta, double v0 = 0.04);
// b = theta tanh x, sigma = s0 + s1 tanh x, X_0 = x0.
Model smooth(double H, double beta, double theta = -0.5, double s0 = 1.0, double s1 = 0.3,
             double x0 = 0.2);
// b = a x, sigma = s, X_0 = x0.
Model linear(double H, double beta, double a, double s = 1.0, double x0 = 1.0);
// b = 0, sigma = s, power-law kernel, X_0 = x0.
Model gaussian(double H, double beta, double s = 1.0, double x0 = 0.0);

std::vector<std::string> names();

}  // namespace presets

}  // namespace volterra
