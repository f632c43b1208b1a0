#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "volterra/functionals.hpp"
#include "volterra/tangent.hpp"

namespace volterra {

enum class ScalarFn { identity, square, tanh, softplus };

// phi(y) = f(l(y)) with f one of the built-in smooth maps (f' and f'' Lipschitz).
struct Payoff {
  std::string name;
  LinearFunctional ell;
  ScalarFn fn = ScalarFn::identity;
  double strike = 0.0;  // softplus: log(1 + e^{u - strike})

  double f(double u) const;
  double df(double u) const;
  double d2f(double u) const;
  double operator()(const Curve& y, double shift = 0.0) const { return f(ell.apply(y, shift)); }

  // phi(y) = f(y_coord(0)).
  static Payoff pointwise(ScalarFn fn, std::size_t d = 1, std::size_t coord = 0, double strike = 0.0);
  // phi(y) = f(<y, g>_{H^1_w}).
  static Payoff cylinder(ScalarFn fn, const Curve& g, const WeightedSpace& space, double strike = 0.0);
};

ScalarFn parse_scalar_fn(const std::string& name);
std::string to_string(ScalarFn fn);

// ModelNotCompliant unless b and sigma are C^2 with bounded derivatives.
void require_compliant(const Model& model, const std::string& op);

// u(t_s, y) = E phi(lambda^{t_s, y}(T)), T = grid.T.
MCEstimate value(const Model& model, const Payoff& payoff, const TimeGrid& grid, std::size_t s,
                 const Curve& y, std::size_t n_paths, std::uint64_t seed);
// Exact value of the discrete scheme when b = 0, sigma is constant and f is identity or square.
std::optional<double> closed_form_value(const Model& model, const Payoff& payoff,
                                        const TimeGrid& grid, std::size_t s, const Curve& y);

struct SweepRow {
  double delta = 0.0;
  MCEstimate estimate;
};
struct SweepReport {
  std::vector<SweepRow> rows;
  // 2 g(delta_min) - g(2 delta_min), per path, when both shifts are in the sweep.
  std::optional<MCEstimate> extrapolated;
};

// D u(t_s, y)(S(delta) h) = E f'(l(lambda_T)) l(zeta_{S(delta)h}(T)) for each delta.
SweepReport singular_gradient(const Model& model, const Payoff& payoff, const TimeGrid& grid,
                              std::size_t s, const Curve& y, const Direction& h,
                              std::span<const double> deltas, std::size_t n_paths,
                              std::uint64_t seed);
// D^2 u(t_s, y)(S(delta)h, S(delta)h) = E f'' l(zeta)^2 + f' l(zeta_{h,h}).
SweepReport singular_hessian(const Model& model, const Payoff& payoff, const TimeGrid& grid,
                             std::size_t s, const Curve& y, const Direction& h,
                             std::span<const double> deltas, std::size_t n_paths,
                             std::uint64_t seed, bool force = false);

struct PDEResidualReport {
  double t = 0.0, delta = 0.0, dt_fd = 0.0;
  MCEstimate time_term;       // d_t u, central difference on common seeds
  MCEstimate transport_term;  // D u(y')
  MCEstimate drift_term;      // D u(K b(y(0))), extrapolated in delta
  MCEstimate trace_term;      // 1/2 sum_j D^2 u(K sigma_j, K sigma_j), extrapolated
  MCEstimate residual;        // per-path sum of the four terms
};
// Terms use direction shifts delta and 2 delta; the time stencil is t_s +- fd_steps dt.
PDEResidualReport pde_residual(const Model& model, const Payoff& payoff, const TimeGrid& grid,
                               std::size_t s, const Curve& y, double delta, std::size_t fd_steps,
                               std::size_t n_paths, std::uint64_t seed, bool force = false);

struct NestedBudget {
  std::size_t outer = 4096, inner = 512;
  std::size_t cap = std::size_t{1} << 22;  // outer * inner
  bool closed_form = false;  // use closed_form_value for the inner u when available
};

struct MartingaleRow {
  std::size_t step = 0;
  double t = 0.0;
  MCEstimate u_mean;  // E u(t, lambda(t))
  MCEstimate drift;   // paired: u(t, lambda(t)) - phi(lambda(T))
};
struct MartingaleReport {
  MCEstimate terminal;  // E phi(lambda(T)) = u(0, lambda_0)
  std::optional<double> exact;  // u(0, lambda_0) in closed form
  std::vector<MartingaleRow> rows;
};
MartingaleReport martingale_check(const Model& model, const Payoff& payoff, const TimeGrid& grid,
                                  std::span<const std::size_t> checkpoints,
                                  const NestedBudget& budget, std::uint64_t seed);

struct ConditionalReport {
  std::size_t step = 0;
  MCEstimate history;      // nested MC continuing each outer path with its stored past
  MCEstimate value_fn;     // nested MC of u(t, lambda(t)) from the state curve
  MCEstimate difference;   // paired history - value_fn
  std::optional<MCEstimate> closed_form;  // closed-form u(t, lambda(t)) when available
};
ConditionalReport conditional_expectation(const Model& model, const Payoff& payoff,
                                          const TimeGrid& grid, std::size_t step,
                                          const NestedBudget& budget, std::uint64_t seed);

struct FPERow {
  std::size_t step = 0;
  double t = 0.0;
  MCEstimate residual;
};
// <mu_t, phi> - phi(S(t)y) - int_0^t <mu_s, L_{t-s} phi> ds for a cylinder phi = f o l.
std::vector<FPERow> fpe_mild_residual(const Model& model, const Payoff& payoff,
                                      const TimeGrid& grid, std::size_t n_paths,
                                      std::uint64_t seed);

enum class SingularFamily { value_function, cylinder_derivative, custom };
SingularFamily parse_singular_family(const std::string& name);

// Phi(s, z) = f(<S(c - s) z', g'>_w) with c = T + shift, or Phi = u (value_function, which
// reduces to the martingale drift). Custom families are refused.
std::vector<FPERow> fpe_singular_residual(const Model& model, SingularFamily family, ScalarFn fn,
                                          const Curve& g, const WeightedSpace& space, double shift,
                                          const TimeGrid& grid, std::size_t n_paths,
                                          std::uint64_t seed);

}  // namespace volterra
