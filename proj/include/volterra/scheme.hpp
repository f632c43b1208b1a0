#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "volterra/kernels.hpp"
#include "volterra/rng.hpp"
#include "volterra/wspace.hpp"

namespace volterra {

// Scheme weights at a spatial offset x, j = 1, 2, ...:
//   A_j(x) = int_{(j-1)dt}^{j dt} K(u + x) du
//   B_j(x) = sgn(A_j) (int_{(j-1)dt}^{j dt} K(u + x)^2 du / dt)^{1/2}
// and their x-derivatives (order 1, 2), componentwise for the diagonal kernel.
void scheme_weights(const Kernel& K, double dt, std::size_t j, double x, int order, double* A,
                    double* B);

class WeightTable {
 public:
  WeightTable() = default;
  WeightTable(const Kernel& K, double dt, std::size_t steps, std::vector<double> x, int derivs = 0);

  std::size_t nodes() const { return x_.size(); }
  std::size_t steps() const { return steps_; }
  std::size_t dim() const { return d_; }
  int derivs() const { return derivs_; }
  const std::vector<double>& x() const { return x_; }
  const double* A(std::size_t q, std::size_t j, int order = 0) const {
    return &a_[order][(q * (steps_ + 1) + j) * d_];
  }
  const double* B(std::size_t q, std::size_t j, int order = 0) const {
    return &b_[order][(q * (steps_ + 1) + j) * d_];
  }

 private:
  std::size_t steps_ = 0, d_ = 0;
  int derivs_ = 0;
  std::vector<double> x_;
  std::vector<double> a_[3], b_[3];
};

// Brownian increments keyed by (seed, path, absolute step, coordinate). With antithetic
// pairs, path 2i+1 uses the negated increments of path 2i.
struct IncrementSource {
  CounterRng rng{0, streams::brownian};
  bool antithetic = false;
  void fill(std::uint64_t path, std::size_t step, double sqrt_dt, std::size_t m, double* out) const;
};

// One recursion over many paths: values at x = 0 and the coefficient terms
// cA_k, cB_k entering  v(t_n, x) = y(t_n - t_s + x) + sum_{s<=k<n} A_{n-k}(x) cA_k + B_{n-k}(x) cB_k.
struct Field {
  TimeGrid grid;
  std::size_t n_paths = 0, d = 1, start = 0;
  std::vector<double> v;       // path x (steps+1) x d; entries before `start` are NaN
  std::vector<double> cA, cB;  // path x steps x d; empty when not stored
  std::vector<Curve> init;     // one shared curve or one per path

  const double* at(std::size_t p, std::size_t n) const { return &v[(p * (grid.steps + 1) + n) * d]; }
  const double* coef_a(std::size_t p, std::size_t k) const { return &cA[(p * grid.steps + k) * d]; }
  const double* coef_b(std::size_t p, std::size_t k) const { return &cB[(p * grid.steps + k) * d]; }
  const Curve& initial(std::size_t p) const { return init.size() == 1 ? init[0] : init[p]; }
  bool has_coefficients() const { return !cA.empty(); }
};

using StepFn = std::function<void(std::size_t k, const double* v, double* cA, double* cB)>;

// v_n = y_n + sum_{k=s}^{n-1} A_{n-k}(0) cA_k + B_{n-k}(0) cB_k for n = s..N; after each v_n
// (n < N) calls step(n, v_n, cA_n, cB_n). W must have x_0 = 0. y, v: (N+1) x d; cA, cB: N x d.
void run_recursion(const WeightTable& W, std::size_t s, std::size_t N, std::size_t d,
                   const double* y, const StepFn& step, double* v, double* cA, double* cB);

// y(t_n - t_s + x) at order 0/1/2 (the second derivative by central differences of y').
void initial_value(const Curve& y, const TimeGrid& g, std::size_t s, std::size_t n, double x,
                   int order, double* out);

// v(t_n, x_q) (order 0) or its x-derivatives from a field with stored coefficients.
void field_value(const Field& f, const WeightTable& W, std::size_t q, std::size_t p, std::size_t n,
                 int order, double* out);

// The whole curve x -> v(t_n, x) of path p, analytic in x (used for restarts).
Curve field_state(const Field& f, const Kernel& K, std::size_t p, std::size_t n);

}  // namespace volterra
