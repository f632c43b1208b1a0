#pragma once

#include <cstddef>
#include <vector>

#include "volterra/scheme.hpp"

namespace volterra {

// l(y) = sum_q alpha_q . y(x_q) + beta_q . y'(x_q); alpha, beta: nodes x d.
struct LinearFunctional {
  std::size_t d = 1;
  std::vector<double> x, alpha, beta;

  // ev_x, component `coord`.
  static LinearFunctional point(double x, std::size_t d = 1, std::size_t coord = 0);
  // <y, g>_{H^1_w} by the quadrature of `space`.
  static LinearFunctional h1w_inner(const Curve& g, const WeightedSpace& space);
  // <S(shift) y', g'>_{L^2_w}.
  static LinearFunctional derivative_inner(const Curve& g, const WeightedSpace& space,
                                           double shift);

  bool uses_derivative() const;
  // l(S(shift) y).
  double apply(const Curve& y, double shift = 0.0) const;
};

// l applied to the scheme weights: PA[j*d + i] = l(A_j(.) e_i), PB likewise, j = 1..steps.
class Projection {
 public:
  Projection() = default;
  Projection(const Kernel& K, double dt, std::size_t steps, const LinearFunctional& l);

  std::size_t steps() const { return steps_; }
  const double* A(std::size_t j) const { return &pa_[j * d_]; }
  const double* B(std::size_t j) const { return &pb_[j * d_]; }
  const LinearFunctional& functional() const { return l_; }
  // l(S(L dt) v(t_n)) for path p of a field with stored coefficients; n + L - start <= steps.
  double apply(const Field& f, std::size_t p, std::size_t n, std::size_t L = 0) const;

 private:
  std::size_t steps_ = 0, d_ = 1;
  LinearFunctional l_;
  std::vector<double> pa_, pb_;
};

}  // namespace volterra
