#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "volterra/lift.hpp"

namespace volterra {

// K(t) ~ sum_i rho_i e^{-z_i t}.
struct CMQuadrature {
  std::vector<double> z, rho;
  double max_rel_error = 0.0;  // on the reference grid below
  double t_min = 1e-2, t_max = 10.0;
  std::size_t size() const { return z.size(); }
  double operator()(double t) const;
};

// Power-law H < 1/2: geometric cells on [1/(10T), 10/dt] (the first cell reaches down to 0),
// node = mean and weight = mass of the Laplace density on each cell.
// Exponential and mixture kernels are returned exactly. Scalar kernels only.
CMQuadrature cm_quadrature(const Kernel& K, std::size_t n, double T, double dt);
// Max relative error of the mixture against K on a log grid of [t_min, t_max].
double cm_max_rel_error(const Kernel& K, const CMQuadrature& q, double t_min, double t_max,
                        std::size_t points = 400);

// X_t = c + sum_i rho_i Y_t(z_i); Y: path x (steps+1) x nodes.
struct OUField {
  TimeGrid grid;
  CMQuadrature quad;
  std::size_t n_paths = 0;
  std::uint64_t seed = 0, stream = streams::brownian;
  bool antithetic = false;
  double offset = 0.0;
  std::vector<double> Y;

  double y(std::size_t p, std::size_t n, std::size_t i) const {
    return Y[(p * (grid.steps + 1) + n) * quad.size() + i];
  }
  // sum_i rho_i e^{-z_i x} Y(t_n, z_i) + c.
  double lambda(std::size_t p, std::size_t n, double x) const;
  double X(std::size_t p, std::size_t n) const { return lambda(p, n, 0.0); }
};

// X_0(t) = c + sum_i rho_i y0_i e^{-z_i t}. Constant curves are detected (y0 = 0), as is
// the stationary-OU initial curve when its rate is the single node.
struct OUInitial {
  double offset = 0.0;
  std::vector<double> y0;  // per path x nodes, or one shared row
};

// Exact exponential-integrator update per node, on the increments simulate() would draw
// for the same seed and stream.
OUField simulate_ou(const Model& model, const CMQuadrature& quad, const TimeGrid& grid,
                    std::size_t n_paths, std::uint64_t seed, const SimOptions& opt = {},
                    std::optional<OUInitial> initial = {});

struct OUEquivalenceReport {
  double sup = 0.0;   // over (t, x, path)
  double rms = 0.0;   // over the same set
  double sup_x0 = 0.0;  // |<Y, 1> - X| over (t, path)
};
OUEquivalenceReport ou_curve_equivalence(const OUField& ou, const LiftEnsemble& lift);

}  // namespace volterra
