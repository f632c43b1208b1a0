#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace volterra {

// w(x) = x^beta e^{-c x}.
struct WeightSpec {
  double beta = 0.5;
  double decay = 1.0;
  std::optional<double> hurst;

  double operator()(double x) const;
  // Throws WeightNotAdmissible when 1/w is not locally integrable (beta >= 1),
  // or when a paired Hurst index falls outside ((1-2H) v 0, 1).
  void validate() const;
  bool admissible_for(double H) const;
};

struct SpaceGrid {
  std::vector<double> nodes;  // x_0 = 0 < x_1 < ... < x_J = X_max

  // Geometric from `first` with `ratio` until the spacing reaches `step`, then uniform.
  static SpaceGrid standard(double first = 1e-4, double ratio = 1.15,
                            double step = 0.05, double x_max = 40.0);
  double x_max() const { return nodes.back(); }
  std::size_t size() const { return nodes.size(); }
  bool operator==(const SpaceGrid& o) const { return nodes == o.nodes; }
};

// Nodes and weights with  sum_q weights[q] F(nodes[q]) ~ int_0^{X_max} F(x) w(x) dx.
// The cell touching 0 uses x = x_1 v^p so that x^beta and kernel powers stay smooth.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  static QuadratureRule build(const SpaceGrid& grid, const WeightSpec& w,
                              int order = 4, int first_cell_power = 4);
  std::size_t size() const { return nodes.size(); }
};

// R^d-valued curve on [0, inf): either analytic (exact off-grid evaluation)
// or tabulated on a grid with linear interpolation and zero tail past X_max.
class Curve {
 public:
  using Fn = std::function<void(double, double*)>;

  Curve() = default;
  static Curve analytic(std::size_t dim, Fn value, Fn derivative,
                        bool singular_at_origin = false);
  // values row-major node x dim; derivative values optional (same layout).
  static Curve tabulated(const SpaceGrid& grid, std::size_t dim, std::vector<double> values,
                         std::vector<double> derivatives = {});
  static Curve constant(std::vector<double> c);
  static Curve zero(std::size_t dim);
  // a f + b g, analytic iff both are; tabulated operands must share the grid.
  static Curve combine(double a, const Curve& f, double b, const Curve& g);

  std::size_t dim() const { return dim_; }
  bool empty() const { return !impl_; }
  bool is_analytic() const;
  // Value at 0 is infinite (unshifted singular kernel).
  bool singular_at_origin() const;
  const SpaceGrid* grid() const;

  void value(double x, double* out) const;
  void derivative(double x, double* out) const;
  double value(double x, std::size_t i = 0) const;
  double derivative(double x, std::size_t i = 0) const;

  // (S(t) f)(x) = f(t + x); composition adds offsets so the semigroup law is exact.
  Curve shifted(double t) const;
  double offset() const { return offset_; }
  Curve scaled(double a) const { return combine(a, *this, 0.0, zero(dim_)); }

  struct Impl;

 private:
  std::shared_ptr<const Impl> impl_;
  std::size_t dim_ = 0;
  double offset_ = 0.0;
};

// Weight, grid and quadrature bundled; immutable.
class WeightedSpace {
 public:
  WeightedSpace(WeightSpec w, SpaceGrid grid, int order = 4);
  explicit WeightedSpace(WeightSpec w) : WeightedSpace(w, SpaceGrid::standard()) {}

  const WeightSpec& weight() const { return w_; }
  const SpaceGrid& grid() const { return grid_; }
  const QuadratureRule& rule() const { return rule_; }

  double inner_l2w(const Curve& f, const Curve& g) const;
  double inner_h1w(const Curve& f, const Curve& g) const;
  double norm_l2w(const Curve& f) const;
  // Returns +inf when the derivative part diverges at the origin.
  double norm_h1w(const Curve& f) const;

 private:
  void check_grid(const Curve& f) const;
  double derivative_part(const Curve& f, const QuadratureRule& r) const;

  WeightSpec w_;
  SpaceGrid grid_;
  QuadratureRule rule_;
};

double inner_l2w(const Curve& f, const Curve& g, const WeightSpec& w, const SpaceGrid& grid);
double norm_h1w(const Curve& f, const WeightSpec& w, const SpaceGrid& grid);
Curve shift(const Curve& f, double t);
// ev_x; OutOfDomain past X_max.
std::vector<double> evaluate(const Curve& f, double x, const SpaceGrid& grid);

// |ev_x u| <= C_x |u|_{H^1_w}; minimized over L' in {x + (L - x) 2^-k}.
double rkhs_constant(const WeightSpec& w, double x, double L);

struct AdmissibilityRow {
  double t;
  double sup_ratio;       // sup_{s >= t} w(s - t) / w(s) on a fine grid
  double bound;           // e^{c t}
  bool within_bound;
};
std::vector<AdmissibilityRow> check_admissible(const WeightSpec& w, std::span<const double> ts);

}  // namespace volterra
