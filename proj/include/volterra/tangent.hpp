#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "volterra/lift.hpp"

namespace volterra {

// Direction h of a tangent process: a linear combination of curves and kernel
// columns S(delta)K v. Kernel terms are only evaluated at positive arguments inside the
// recursion; at the start node they enter through the cell average over [0, dt].
class Direction {
 public:
  static Direction curve(Curve c);
  // x -> K(delta + x) v.
  static Direction kernel(const Kernel& K, double delta, std::vector<double> v);
  // Column i of the diagonal kernel: K(delta + x) e_i.
  static Direction kernel_column(const Kernel& K, double delta, std::size_t i);
  static Direction zero(std::size_t dim);

  std::size_t dim() const { return dim_; }
  bool singular() const;
  Curve as_curve() const;
  // h(0), or (1/dt) int_0^dt h for kernel terms.
  void start_value(double dt, double* out) const;

  Direction operator+(const Direction& o) const;
  Direction operator-(const Direction& o) const;
  Direction scaled(double a) const;
  // S(delta)h: kernel terms move their shift, curve terms are shifted.
  Direction shifted(double delta) const;

 private:
  struct Term {
    double coef = 1.0;
    Curve curve;
    bool kernel = false;
    Kernel K;
    double delta = 0.0;
    std::vector<double> v;
  };
  std::vector<Term> terms_;
  std::size_t dim_ = 0;
};

// zeta(path, t_n, 0) and the coefficient terms of its mild form, so field_value gives
// zeta(t_n, x) anywhere. init holds S(. )h (first variation) or 0 (second variation).
struct TangentEnsemble : Field {
  double kernel_shift = 0.0;  // of the underlying ensemble
  bool second = false;
};

// Same increments and states as `paths`, started at step s >= paths.start.
TangentEnsemble first_variation(const Model& model, const Direction& h, std::size_t s,
                                const PathEnsemble& paths);
TangentEnsemble first_variation(const Model& model, const Direction& h, std::size_t s,
                                const LiftEnsemble& lift);

// zeta_{h,h} from the diagonal recursion with source D^2 b(zeta_h, zeta_h).
TangentEnsemble second_variation_diagonal(const Model& model, const TangentEnsemble& z,
                                          const PathEnsemble& paths, bool force = false);
// zeta_{h1,h2} = (zeta_{h1+h2,h1+h2} - zeta_{h1-h2,h1-h2}) / 4.
TangentEnsemble second_variation(const Model& model, const Direction& h1, const Direction& h2,
                                 std::size_t s, const PathEnsemble& paths, bool force = false);
// The bilinear recursion with source D^2 b(zeta_1, zeta_2), used to cross-check polarization.
TangentEnsemble second_variation_direct(const Model& model, const TangentEnsemble& z1,
                                        const TangentEnsemble& z2, const PathEnsemble& paths,
                                        bool force = false);
// HurstBelowThreshold for power-law H <= 1/4 with non-constant sigma, unless forced.
void check_second_order_guard(const Model& model, bool force);

// |f(t_n)|^2_{H^1_w} of a field on the quadrature nodes of `space`.
class H1wEvaluator {
 public:
  H1wEvaluator(const Kernel& K, const TimeGrid& grid, const WeightedSpace& space);
  std::size_t size() const { return w_.size(); }
  // (value, derivative) per node and component: nodes x 2 x d.
  void values(const Field& f, std::size_t p, std::size_t n, std::vector<double>& out) const;
  void curve_values(const Curve& c, double shift, std::vector<double>& out) const;
  // sum_q w_q |a_q|^2 over value and derivative entries.
  double norm_sq(std::span<const double> a) const;
  double norm_sq(const Field& f, std::size_t p, std::size_t n) const;
  double curve_norm_sq(const Curve& c, double shift) const;

 private:
  WeightTable W_;
  std::vector<double> w_;
};

struct MomentBoundRow {
  std::size_t step = 0;
  double t = 0.0;
  MCEstimate moment;  // E|zeta(t)|^p
  double reference = 0.0;  // |S(t - s)h|^p
  double ratio = 0.0;
};
struct MomentBoundReport {
  std::vector<MomentBoundRow> rows;
  double max_ratio = 0.0;
};
MomentBoundReport moment_bound_check(const Model& model, const TangentEnsemble& z,
                                     const Direction& h, double p, const WeightedSpace& space);

// Relative discrete H^1_w error at T of the common-random-numbers bump against zeta_h.
struct BumpCheck {
  double rel_error = 0.0;
  double abs_error = 0.0;
  double norm = 0.0;
};
BumpCheck first_variation_bump(const Model& model, const TimeGrid& grid, const Curve& y,
                               const Direction& h, double eps, std::size_t n_paths,
                               std::uint64_t seed, const WeightedSpace& space);
BumpCheck second_variation_bump(const Model& model, const TimeGrid& grid, const Curve& y,
                                const Direction& h, double eps, std::size_t n_paths,
                                std::uint64_t seed, const WeightedSpace& space, bool force = false);

// delta sweep: integrated (over restart times r in [s, T)) and terminal discrepancies of
// the tangent of the mollified system against the singular one.
struct MollifiedRow {
  double delta = 0.0;
  MCEstimate integrated;  // int_s^T E|zeta^r_K(T) - zeta^r_{delta,K}(T)|^2 dr
  MCEstimate terminal;    // E|zeta_{K_delta}(T) - zeta_K(T)|^2, from s
};
std::vector<MollifiedRow> mollified_convergence_study(const Model& model, const TimeGrid& grid,
                                                      std::span<const double> deltas,
                                                      std::size_t s, std::size_t n_paths,
                                                      std::uint64_t seed, const WeightedSpace& space,
                                                      std::size_t column = 0,
                                                      std::size_t r_stride = 1);

// sup_n E|X_{t_n} - X^delta_{t_n}|^2 for each delta (shared increments) and the fitted slope.
struct MollificationRate {
  std::vector<double> deltas;
  std::vector<MCEstimate> sup_err;
  double slope = 0.0;
};
MollificationRate mollification_rate(const Model& model, const TimeGrid& grid,
                                     std::span<const double> deltas, std::size_t n_paths,
                                     std::uint64_t seed);

}  // namespace volterra
