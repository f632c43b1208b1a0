#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "volterra/wspace.hpp"

namespace volterra {

enum class KernelKind { power_law, exponential, tabulated, mixture };

// Scalar kernel k(t + shift) with closed-form cell integrals.
class ScalarKernel {
 public:
  // t^{H-1/2}, optionally divided by Gamma(H + 1/2). H = 1/2 is the constant kernel.
  static ScalarKernel power_law(double H, bool gamma_normalized = true);
  // e^{-rate t}; rate 0 is the constant kernel.
  static ScalarKernel exponential(double rate);
  // Piecewise-linear interpolant of samples (t_i, v_i), t_0 >= 0.
  static ScalarKernel tabulated(std::vector<double> t, std::vector<double> v);
  // sum_i w_i e^{-z_i t}.
  static ScalarKernel mixture(std::vector<double> nodes, std::vector<double> weights);

  KernelKind kind() const { return kind_; }
  double hurst() const { return hurst_; }
  double rate() const { return rate_; }
  double scale() const { return scale_; }
  double shift() const { return shift_; }
  bool gamma_normalized() const { return normalized_; }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }

  // K(t + shift). SingularAtOrigin when the argument is 0 and K blows up there.
  double operator()(double t) const;
  double derivative(double t) const;
  double second_derivative(double t) const;
  // int_a^b K(s + shift) ds and int_a^b K(s + shift)^2 ds, 0 <= a <= b.
  double integral(double a, double b) const;
  double square_integral(double a, double b) const;

  ScalarKernel shifted(double delta) const;
  bool singular_at_origin() const;  // K(shift) infinite
  bool completely_monotone() const;
  std::string describe() const;

 private:
  double raw(double u) const;       // at absolute argument u = t + shift
  double raw_d1(double u) const;
  double raw_d2(double u) const;
  double tab_interp(const std::vector<double>& v, double u) const;

  KernelKind kind_ = KernelKind::power_law;
  double hurst_ = 0.5;
  double rate_ = 0.0;
  double scale_ = 1.0;
  double shift_ = 0.0;
  bool normalized_ = false;
  std::vector<double> nodes_, weights_;  // tabulated: (t, v); mixture: (z, w)
  std::vector<double> d1_, d2_;          // tabulated: difference-quotient tables
};

// Diagonal matrix kernel diag(k_1, ..., k_d); d = 1 is the scalar case.
class Kernel {
 public:
  Kernel() = default;
  explicit Kernel(ScalarKernel k, std::size_t dim = 1);
  explicit Kernel(std::vector<ScalarKernel> diag);

  std::size_t dim() const { return diag_.size(); }
  const ScalarKernel& operator[](std::size_t i) const { return diag_[i]; }
  const std::vector<ScalarKernel>& diagonal() const { return diag_; }
  bool composite() const;

  Kernel shifted(double delta) const;
  bool singular_at_origin() const;
  std::string describe() const;

 private:
  std::vector<ScalarKernel> diag_;
};

// Small dense matrix, row-major.
struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> a;
  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double v = 0.0) : rows(r), cols(c), a(r * c, v) {}
  static Matrix identity(std::size_t n);
  static Matrix diag(std::span<const double> v);
  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
  double max_abs() const;
};

Matrix eval(const Kernel& K, double t);
// K(delta + x) = (S(delta) K)(x).
Matrix eval_shifted(const Kernel& K, double delta, double x);
Matrix derivative(const Kernel& K, double t);

// Uniform time grid t_n = n T / steps.
struct TimeGrid {
  double T = 1.0;
  std::size_t steps = 1;
  double dt() const { return T / static_cast<double>(steps); }
  double t(std::size_t n) const { return T * static_cast<double>(n) / static_cast<double>(steps); }
  std::size_t size() const { return steps + 1; }
};

enum class ResolventKind { second_kind, scalar };

struct ResolventGrid {
  TimeGrid grid;
  ResolventKind kind = ResolventKind::second_kind;
  std::vector<Matrix> values;  // one per node; NaN entries where undefined (t = 0, singular K)
};

// a K - R = a K * R by forward substitution, implicit in the current node.
ResolventGrid resolvent_second_kind(const Kernel& K, const Matrix& a, const TimeGrid& grid,
                                    double stability = 0.5);
// sup_n |a K - R - a K * R|(t_n) with a product-trapezoid convolution (independent of the solver).
double resolvent_residual(const Kernel& K, const Matrix& a, const ResolventGrid& R);

// r = k + r * k. Cell integrals of k by the trapezoid rule on nodal values,
// or by singular-aware quadrature when k is given as a function.
ResolventGrid scalar_resolvent(std::span<const double> k, const TimeGrid& grid);
ResolventGrid scalar_resolvent(const std::function<double(double)>& k, const TimeGrid& grid);
// Cell integrals used by the solver (kappa_i = int_{t_{i-1}}^{t_i} k).
std::vector<double> cell_integrals(std::span<const double> k, const TimeGrid& grid);
std::vector<double> cell_integrals(const std::function<double(double)>& k, const TimeGrid& grid);
ResolventGrid scalar_resolvent_from_cells(std::span<const double> k_nodes,
                                          std::span<const double> kappa, const TimeGrid& grid);
// |r_n - k_n - sum_i kappa_i r_{n-i+1}|: the discrete equation itself.
double scalar_consistency_residual(std::span<const double> k_nodes, std::span<const double> kappa,
                                   const ResolventGrid& r);
// Trapezoid product convolution residual (first order in dt for the solver).
double scalar_trapezoid_residual(std::span<const double> k_nodes, std::span<const double> kappa,
                                 const ResolventGrid& r);

struct GronwallReport {
  bool pass = false;
  double min_slack = 0.0;   // min_n (f + r * f - x)(t_n)
  std::size_t argmin = 0;
  std::vector<double> bound;
};
// Checks x <= f + k * x (HypothesisViolated otherwise), then x <= f + r * f.
GronwallReport verify_gronwall(std::span<const double> x, std::span<const double> f,
                               std::span<const double> k, const TimeGrid& grid,
                               double rel_tol = 1e-12);

struct ConditionEntry {
  double value = 0.0;
  bool pass = false;
  std::string note;
};

struct KernelConditionReport {
  double q = 0.0;
  double T = 0.0;
  ConditionEntry cond1;   // int_0^T |K(t+.)|^q dt
  ConditionEntry cond2;   // fitted exponent of int_0^T |K(t+.) - K(t+h+.)|^2 dt in h
  double cond2_target = 0.0;  // 1 - 2/q
  ConditionEntry cond3;   // int_0^T (int_0^t |dK(s+r+.)|^2 ds)^{1/2} dr
  double q_low = 2.0, q_high = 2.0;
  bool q_interval_empty = true;
  bool all_pass() const { return cond1.pass && cond2.pass && cond3.pass; }
};

struct AdmissibleInterval {
  double low = 2.0, high = 2.0;
  bool empty = true;
  double midpoint() const { return 0.5 * (low + high); }
};
// (2, 2/(2 - 2H - beta)) for the power-law kernel, empty when 2 - 2H - beta >= 1.
AdmissibleInterval admissible_q_interval(double H, double beta);
// The default q used by rate checks: midpoint of the admissible interval.
double default_q(double H, double beta);

// |K(t+.)|^2 in H^1_w, with a quadrature adapted to the shift t.
double shifted_h1w_norm_sq(const Kernel& K, double t, const WeightSpec& w);

KernelConditionReport verify_assumptions(const Kernel& K, const WeightSpec& w, double q, double T);

// Curve x -> K(delta + x) v (componentwise for the diagonal kernel).
Curve kernel_curve(const Kernel& K, double delta, std::vector<double> v);
Curve kernel_curve(const Kernel& K, double delta = 0.0);

}  // namespace volterra
