#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "volterra/model.hpp"
#include "volterra/parallel.hpp"
#include "volterra/scheme.hpp"

namespace volterra {

struct SimOptions {
  bool store_increments = true;
  bool store_coefficients = true;
  bool antithetic = false;
  std::size_t start_step = 0;      // absolute step the run starts from
  std::uint64_t stream = streams::brownian;
};

// X = v of the underlying field; dW: path x steps x m (absolute step index).
struct PathEnsemble : Field {
  std::size_t m = 1;
  std::uint64_t seed = 0;
  std::string fingerprint;
  double kernel_shift = 0.0;  // delta of the mollified kernel, 0 for the plain scheme
  std::vector<double> dW;

  double X(std::size_t p, std::size_t n, std::size_t i = 0) const { return at(p, n)[i]; }
  const double* dw(std::size_t p, std::size_t k) const { return &dW[(p * grid.steps + k) * m]; }
  bool has_increments() const { return !dW.empty(); }
};

// Explicit scheme with exact cell integrals of K for the drift and cell L^2-means of K
// for the noise. X_0 may be replaced by `initial` (one curve or one per path).
PathEnsemble simulate(const Model& model, const TimeGrid& grid, std::size_t n_paths,
                      std::uint64_t seed, const SimOptions& opt = {});
PathEnsemble simulate_from(const Model& model, const TimeGrid& grid, std::vector<Curve> initial,
                           std::size_t n_paths, std::uint64_t seed, const SimOptions& opt = {});
// Same scheme with K replaced by K(delta + .); identical increments for equal seeds.
PathEnsemble simulate_mollified(const Model& model, double delta, const TimeGrid& grid,
                                std::size_t n_paths, std::uint64_t seed, const SimOptions& opt = {});

struct MomentReport {
  std::vector<MCEstimate> per_time;  // E|X_{t_n}|^p, n = 0..N
  MCEstimate sup;
  std::size_t argmax = 0;
};
MomentReport moment_sup(const PathEnsemble& e, double p);

// Scalar test function on R^d with gradient and Hessian.
struct TestFunction {
  std::string name;
  std::function<double(const double*)> f;
  std::function<void(const double*, double*)> grad;  // d
  std::function<void(const double*, double*)> hess;  // d*d
  static TestFunction identity(std::size_t d = 1, std::size_t coord = 0);
  static TestFunction square(std::size_t d = 1, std::size_t coord = 0);
  static TestFunction tanh(std::size_t d = 1, std::size_t coord = 0);
};

// Mean over paths of  f(X_t) - f(lambda(s, t-s)) - [stochastic + drift + trace terms]
// accumulated along the partial sums lambda(t_k, t - t_k), s <= t_k < t.
MCEstimate ito_formula_residual(const Model& model, const PathEnsemble& e, const TestFunction& f,
                                std::size_t s_step, std::size_t t_step);

}  // namespace volterra
