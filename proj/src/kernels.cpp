#include "volterra/kernels.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "volterra/errors.hpp"
#include "volterra/quadrature.hpp"

namespace volterra {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// int_A^{A+h} u^{p-1} du = A^p ((1 + h/A)^p - 1) / p, stable for small h/A.
double power_cell(double A, double h, double p) {
  if (h <= 0.0) return 0.0;
  if (A <= 0.0) return std::pow(h, p) / p;
  return std::pow(A, p) * std::expm1(p * std::log1p(h / A)) / p;
}

// int_A^{A+h} e^{-c u} du.
double exp_cell(double A, double h, double c) {
  if (h <= 0.0) return 0.0;
  if (c == 0.0) return h;
  return std::exp(-c * A) * (-std::expm1(-c * h)) / c;
}

}  // namespace

// ---------------------------------------------------------------- ScalarKernel

ScalarKernel ScalarKernel::power_law(double H, bool gamma_normalized) {
  if (!(H > 0.0 && H < 1.0)) throw InvalidArgument("power-law kernel needs H in (0, 1)");
  ScalarKernel k;
  k.kind_ = KernelKind::power_law;
  k.hurst_ = H;
  k.normalized_ = gamma_normalized;
  k.scale_ = gamma_normalized ? 1.0 / std::tgamma(H + 0.5) : 1.0;
  return k;
}

ScalarKernel ScalarKernel::exponential(double rate) {
  if (!(rate >= 0.0)) throw InvalidArgument("exponential kernel needs rate >= 0");
  ScalarKernel k;
  k.kind_ = KernelKind::exponential;
  k.rate_ = rate;
  return k;
}

ScalarKernel ScalarKernel::tabulated(std::vector<double> t, std::vector<double> v) {
  if (t.size() < 3 || t.size() != v.size())
    throw InvalidArgument("tabulated kernel needs at least 3 matching samples");
  if (t.front() < 0.0) throw InvalidArgument("tabulated kernel starts before 0");
  for (std::size_t i = 1; i < t.size(); ++i)
    if (!(t[i] > t[i - 1])) throw InvalidArgument("tabulated kernel nodes must increase");
  ScalarKernel k;
  k.kind_ = KernelKind::tabulated;
  const std::size_t n = t.size();
  auto diff = [&](const std::vector<double>& f) {
    std::vector<double> d(n);
    d[0] = (f[1] - f[0]) / (t[1] - t[0]);
    d[n - 1] = (f[n - 1] - f[n - 2]) / (t[n - 1] - t[n - 2]);
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i - 1]) / (t[i + 1] - t[i - 1]);
    return d;
  };
  k.d1_ = diff(v);
  k.d2_ = diff(k.d1_);
  k.nodes_ = std::move(t);
  k.weights_ = std::move(v);
  return k;
}

ScalarKernel ScalarKernel::mixture(std::vector<double> nodes, std::vector<double> weights) {
  if (nodes.empty() || nodes.size() != weights.size())
    throw InvalidArgument("mixture kernel needs matching nonempty nodes and weights");
  for (double z : nodes)
    if (!(z >= 0.0)) throw InvalidArgument("mixture nodes must be nonnegative");
  ScalarKernel k;
  k.kind_ = KernelKind::mixture;
  k.nodes_ = std::move(nodes);
  k.weights_ = std::move(weights);
  return k;
}

double ScalarKernel::tab_interp(const std::vector<double>& v, double u) const {
  const auto& t = nodes_;
  if (u < t.front() || u > t.back())
    throw OutOfDomain("tabulated kernel evaluated at " + std::to_string(u) + " outside [" +
                      std::to_string(t.front()) + ", " + std::to_string(t.back()) + "]");
  std::size_t c = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), u) - t.begin());
  c = std::clamp<std::size_t>(c, 1, t.size() - 1) - 1;
  const double s = (u - t[c]) / (t[c + 1] - t[c]);
  return v[c] + s * (v[c + 1] - v[c]);
}

double ScalarKernel::raw(double u) const {
  switch (kind_) {
    case KernelKind::power_law: {
      const double a = hurst_ - 0.5;
      if (u == 0.0) {
        if (a < 0.0) throw SingularAtOrigin("power-law kernel with H < 1/2 at t = 0");
        return a == 0.0 ? scale_ : 0.0;
      }
      return a == 0.0 ? scale_ : scale_ * std::pow(u, a);
    }
    case KernelKind::exponential:
      return std::exp(-rate_ * u);
    case KernelKind::tabulated:
      return tab_interp(weights_, u);
    case KernelKind::mixture: {
      double s = 0.0;
      for (std::size_t i = 0; i < nodes_.size(); ++i) s += weights_[i] * std::exp(-nodes_[i] * u);
      return s;
    }
  }
  return kNaN;
}

double ScalarKernel::raw_d1(double u) const {
  switch (kind_) {
    case KernelKind::power_law: {
      const double a = hurst_ - 0.5;
      if (a == 0.0) return 0.0;
      if (u == 0.0) throw SingularAtOrigin("power-law derivative at t = 0");
      return scale_ * a * std::pow(u, a - 1.0);
    }
    case KernelKind::exponential:
      return -rate_ * std::exp(-rate_ * u);
    case KernelKind::tabulated:
      return tab_interp(d1_, u);
    case KernelKind::mixture: {
      double s = 0.0;
      for (std::size_t i = 0; i < nodes_.size(); ++i)
        s -= weights_[i] * nodes_[i] * std::exp(-nodes_[i] * u);
      return s;
    }
  }
  return kNaN;
}

double ScalarKernel::raw_d2(double u) const {
  switch (kind_) {
    case KernelKind::power_law: {
      const double a = hurst_ - 0.5;
      if (a == 0.0) return 0.0;
      if (u == 0.0) throw SingularAtOrigin("power-law second derivative at t = 0");
      return scale_ * a * (a - 1.0) * std::pow(u, a - 2.0);
    }
    case KernelKind::exponential:
      return rate_ * rate_ * std::exp(-rate_ * u);
    case KernelKind::tabulated:
      return tab_interp(d2_, u);
    case KernelKind::mixture: {
      double s = 0.0;
      for (std::size_t i = 0; i < nodes_.size(); ++i)
        s += weights_[i] * nodes_[i] * nodes_[i] * std::exp(-nodes_[i] * u);
      return s;
    }
  }
  return kNaN;
}

double ScalarKernel::operator()(double t) const {
  if (t < 0.0) throw NonPositiveTime("kernel evaluated at t = " + std::to_string(t));
  return raw(t + shift_);
}

double ScalarKernel::derivative(double t) const {
  if (t < 0.0) throw NonPositiveTime("kernel derivative at t = " + std::to_string(t));
  return raw_d1(t + shift_);
}

double ScalarKernel::second_derivative(double t) const {
  if (t < 0.0) throw NonPositiveTime("kernel second derivative at t = " + std::to_string(t));
  return raw_d2(t + shift_);
}

double ScalarKernel::integral(double a, double b) const {
  if (a < 0.0 || b < a) throw InvalidArgument("kernel integral needs 0 <= a <= b");
  const double A = a + shift_, h = b - a;
  switch (kind_) {
    case KernelKind::power_law:
      return scale_ * power_cell(A, h, hurst_ + 0.5);
    case KernelKind::exponential:
      return exp_cell(A, h, rate_);
    case KernelKind::mixture: {
      double s = 0.0;
      for (std::size_t i = 0; i < nodes_.size(); ++i) s += weights_[i] * exp_cell(A, h, nodes_[i]);
      return s;
    }
    case KernelKind::tabulated: {
      // Exact integral of the piecewise-linear interpolant.
      const double B = A + h;
      tab_interp(weights_, A);
      tab_interp(weights_, B);
      const auto& t = nodes_;
      double s = 0.0;
      for (std::size_t c = 0; c + 1 < t.size(); ++c) {
        const double lo = std::max(A, t[c]), hi = std::min(B, t[c + 1]);
        if (hi <= lo) continue;
        s += 0.5 * (hi - lo) * (tab_interp(weights_, lo) + tab_interp(weights_, hi));
      }
      return s;
    }
  }
  return kNaN;
}

double ScalarKernel::square_integral(double a, double b) const {
  if (a < 0.0 || b < a) throw InvalidArgument("kernel integral needs 0 <= a <= b");
  const double A = a + shift_, h = b - a;
  switch (kind_) {
    case KernelKind::power_law:
      return scale_ * scale_ * power_cell(A, h, 2.0 * hurst_);
    case KernelKind::exponential:
      return exp_cell(A, h, 2.0 * rate_);
    case KernelKind::mixture: {
      double s = 0.0;
      for (std::size_t i = 0; i < nodes_.size(); ++i)
        for (std::size_t j = 0; j < nodes_.size(); ++j)
          s += weights_[i] * weights_[j] * exp_cell(A, h, nodes_[i] + nodes_[j]);
      return s;
    }
    case KernelKind::tabulated: {
      const double B = A + h;
      tab_interp(weights_, A);
      tab_interp(weights_, B);
      const auto& t = nodes_;
      double s = 0.0;
      for (std::size_t c = 0; c + 1 < t.size(); ++c) {
        const double lo = std::max(A, t[c]), hi = std::min(B, t[c + 1]);
        if (hi <= lo) continue;
        const double f0 = tab_interp(weights_, lo), f1 = tab_interp(weights_, hi);
        s += (hi - lo) * (f0 * f0 + f0 * f1 + f1 * f1) / 3.0;
      }
      return s;
    }
  }
  return kNaN;
}

ScalarKernel ScalarKernel::shifted(double delta) const {
  if (delta < 0.0) throw NonPositiveTime("negative kernel shift");
  ScalarKernel k = *this;
  k.shift_ += delta;
  return k;
}

bool ScalarKernel::singular_at_origin() const {
  return kind_ == KernelKind::power_law && hurst_ < 0.5 && shift_ == 0.0;
}

bool ScalarKernel::completely_monotone() const {
  switch (kind_) {
    case KernelKind::power_law:
      return hurst_ <= 0.5;
    case KernelKind::exponential:
      return true;
    case KernelKind::mixture:
      return std::all_of(weights_.begin(), weights_.end(), [](double w) { return w >= 0.0; });
    case KernelKind::tabulated:
      return false;
  }
  return false;
}

std::string ScalarKernel::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case KernelKind::power_law:
      os << "power_law(H=" << hurst_ << (normalized_ ? ",gamma" : "") << ")";
      break;
    case KernelKind::exponential:
      os << "exponential(rate=" << rate_ << ")";
      break;
    case KernelKind::tabulated:
      os << "tabulated(n=" << nodes_.size() << ")";
      break;
    case KernelKind::mixture:
      os << "mixture(n=" << nodes_.size() << ")";
      break;
  }
  if (shift_ != 0.0) os << "+shift(" << shift_ << ")";
  return os.str();
}

// ---------------------------------------------------------------- Kernel

Kernel::Kernel(ScalarKernel k, std::size_t dim) : diag_(dim, k) {
  if (dim == 0) throw InvalidArgument("kernel dimension must be positive");
}

Kernel::Kernel(std::vector<ScalarKernel> diag) : diag_(std::move(diag)) {
  if (diag_.empty()) throw InvalidArgument("kernel dimension must be positive");
}

bool Kernel::composite() const {
  for (const auto& k : diag_)
    if (k.describe() != diag_.front().describe()) return true;
  return false;
}

Kernel Kernel::shifted(double delta) const {
  std::vector<ScalarKernel> d;
  d.reserve(diag_.size());
  for (const auto& k : diag_) d.push_back(k.shifted(delta));
  return Kernel(std::move(d));
}

bool Kernel::singular_at_origin() const {
  return std::any_of(diag_.begin(), diag_.end(), [](const ScalarKernel& k) { return k.singular_at_origin(); });
}

std::string Kernel::describe() const {
  std::string s = "diag(";
  for (std::size_t i = 0; i < diag_.size(); ++i) s += (i ? "," : "") + diag_[i].describe();
  return s + ")";
}

// ---------------------------------------------------------------- Matrix

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diag(std::span<const double> v) {
  Matrix m(v.size(), v.size());
  for (std::size_t i = 0; i < v.size(); ++i) m(i, i) = v[i];
  return m;
}

double Matrix::max_abs() const {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

Matrix eval(const Kernel& K, double t) {
  std::vector<double> v(K.dim());
  for (std::size_t i = 0; i < K.dim(); ++i) v[i] = K[i](t);
  return Matrix::diag(v);
}

Matrix eval_shifted(const Kernel& K, double delta, double x) {
  if (delta < 0.0) throw NonPositiveTime("negative shift");
  if (x < 0.0) throw NonPositiveTime("negative argument");
  return eval(K.shifted(delta), x);
}

Matrix derivative(const Kernel& K, double t) {
  std::vector<double> v(K.dim());
  for (std::size_t i = 0; i < K.dim(); ++i) v[i] = K[i].derivative(t);
  return Matrix::diag(v);
}

// ---------------------------------------------------------------- resolvents

namespace {

using EMat = Eigen::MatrixXd;

EMat to_eigen(const Matrix& m) {
  EMat e(m.rows, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) e(i, j) = m(i, j);
  return e;
}

Matrix from_eigen(const EMat& e) {
  Matrix m(static_cast<std::size_t>(e.rows()), static_cast<std::size_t>(e.cols()));
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) m(i, j) = e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return m;
}

// cells[j][i] = int_{(j-1)dt}^{j dt} K_i, j = 1..N (index 0 unused).
std::vector<std::vector<double>> kernel_cells(const Kernel& K, const TimeGrid& g) {
  std::vector<std::vector<double>> c(g.steps + 1, std::vector<double>(K.dim(), 0.0));
  for (std::size_t j = 1; j <= g.steps; ++j)
    for (std::size_t i = 0; i < K.dim(); ++i) c[j][i] = K[i].integral(g.t(j - 1), g.t(j));
  return c;
}

double kernel_at(const ScalarKernel& k, double t) {
  if (t == 0.0 && k.singular_at_origin()) return kNaN;
  return k(t);
}

}  // namespace

ResolventGrid resolvent_second_kind(const Kernel& K, const Matrix& a, const TimeGrid& grid,
                                    double stability) {
  const std::size_t d = K.dim();
  if (a.rows != d || a.cols != d) throw InvalidArgument("resolvent: a must be d x d");
  if (grid.steps == 0 || !(grid.T > 0.0)) throw InvalidArgument("resolvent: empty grid");
  const auto A = kernel_cells(K, grid);
  const EMat ea = to_eigen(a);
  EMat A1 = EMat::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i) A1(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = A[1][i];
  const EMat aA1 = ea * A1;
  if (aA1.cwiseAbs().maxCoeff() >= stability)
    throw GridTooCoarse("|a| * int_0^dt K = " + std::to_string(aA1.cwiseAbs().maxCoeff()) +
                        " exceeds the stability threshold " + std::to_string(stability));
  const Eigen::PartialPivLU<EMat> lu(EMat::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)) + aA1);

  ResolventGrid out;
  out.grid = grid;
  out.kind = ResolventKind::second_kind;
  out.values.resize(grid.size());
  std::vector<EMat> R(grid.size());
  {
    EMat k0 = EMat::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) k0(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = kernel_at(K[i], 0.0);
    R[0] = ea * k0;
    if (!R[0].allFinite()) R[0].setConstant(kNaN);
  }
  for (std::size_t n = 1; n <= grid.steps; ++n) {
    EMat S = EMat::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i)
      S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = K[i](grid.t(n));
    // S = K(t_n) - sum_{m=1}^{n-1} A_{n-m+1} R_m
    for (std::size_t m = 1; m < n; ++m) {
      const auto& c = A[n - m + 1];
      for (std::size_t i = 0; i < d; ++i)
        S.row(static_cast<Eigen::Index>(i)) -= c[i] * R[m].row(static_cast<Eigen::Index>(i));
    }
    R[n] = lu.solve(ea * S);
  }
  for (std::size_t n = 0; n < R.size(); ++n) out.values[n] = from_eigen(R[n]);
  return out;
}

double resolvent_residual(const Kernel& K, const Matrix& a, const ResolventGrid& Rg) {
  const TimeGrid& g = Rg.grid;
  const std::size_t d = K.dim();
  const auto A = kernel_cells(K, g);
  const auto& R = Rg.values;
  double worst = 0.0;
  for (std::size_t n = 1; n <= g.steps; ++n) {
    // conv = sum_k A_{n-k} (R_k + R_{k+1}) / 2, R_0 replaced by R_1 when undefined.
    Matrix conv(d, d);
    for (std::size_t k = 0; k < n; ++k) {
      const Matrix& lo = (k == 0 && !std::isfinite(R[0].a[0])) ? R[1] : R[k];
      const Matrix& hi = R[k + 1];
      const auto& c = A[n - k];
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) conv(i, j) += c[i] * 0.5 * (lo(i, j) + hi(i, j));
    }
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        double aK = 0.0, aconv = 0.0;
        for (std::size_t l = 0; l < d; ++l) {
          aK += a(i, l) * (l == j ? K[l](g.t(n)) : 0.0);
          aconv += a(i, l) * conv(l, j);
        }
        worst = std::max(worst, std::abs(aK - R[n](i, j) - aconv));
      }
  }
  return worst;
}

std::vector<double> cell_integrals(std::span<const double> k, const TimeGrid& grid) {
  if (k.size() != grid.size()) throw GridMismatch("kernel samples do not match the grid");
  if (!std::isfinite(k[0]))
    throw SingularAtOrigin("nodal trapezoid cells need a finite k(0); pass k as a function");
  std::vector<double> kappa(grid.size(), 0.0);
  const double dt = grid.dt();
  for (std::size_t i = 1; i < grid.size(); ++i) kappa[i] = 0.5 * dt * (k[i - 1] + k[i]);
  return kappa;
}

std::vector<double> cell_integrals(const std::function<double(double)>& k, const TimeGrid& grid) {
  std::vector<double> kappa(grid.size(), 0.0);
  const double dt = grid.dt();
  kappa[1] = quad::left_singular(k, 0.0, dt, 16, 8);
  for (std::size_t i = 2; i < grid.size(); ++i) kappa[i] = quad::gauss(k, grid.t(i - 1), grid.t(i), 8);
  return kappa;
}

ResolventGrid scalar_resolvent_from_cells(std::span<const double> k, std::span<const double> kappa,
                                          const TimeGrid& grid) {
  if (k.size() != grid.size() || kappa.size() != grid.size())
    throw GridMismatch("kernel samples do not match the grid");
  for (std::size_t n = 0; n < k.size(); ++n)
    if (k[n] < 0.0) throw NegativeKernel("k(t_" + std::to_string(n) + ") < 0");
  if (kappa[1] >= 1.0) throw GridTooCoarse("int_0^dt k >= 1; refine the grid");
  std::vector<double> r(grid.size());
  r[0] = k[0];
  const double inv = 1.0 / (1.0 - kappa[1]);
  for (std::size_t n = 1; n < grid.size(); ++n) {
    double s = k[n];
    for (std::size_t i = 2; i <= n; ++i) s += kappa[i] * r[n - i + 1];
    r[n] = s * inv;
  }
  ResolventGrid out;
  out.grid = grid;
  out.kind = ResolventKind::scalar;
  out.values.reserve(r.size());
  for (double v : r) out.values.push_back(Matrix(1, 1, v));
  return out;
}

ResolventGrid scalar_resolvent(std::span<const double> k, const TimeGrid& grid) {
  for (std::size_t n = 0; n < k.size(); ++n)
    if (k[n] < 0.0) throw NegativeKernel("k(t_" + std::to_string(n) + ") < 0");
  const auto kappa = cell_integrals(k, grid);
  return scalar_resolvent_from_cells(k, kappa, grid);
}

ResolventGrid scalar_resolvent(const std::function<double(double)>& k, const TimeGrid& grid) {
  std::vector<double> nodes(grid.size());
  double k0 = kInf;
  try {
    k0 = k(0.0);
  } catch (const SingularAtOrigin&) {
  }
  nodes[0] = std::isfinite(k0) ? k0 : kInf;
  for (std::size_t n = 1; n < grid.size(); ++n) nodes[n] = k(grid.t(n));
  const auto kappa = cell_integrals(k, grid);
  return scalar_resolvent_from_cells(nodes, kappa, grid);
}

double scalar_consistency_residual(std::span<const double> k, std::span<const double> kappa,
                                   const ResolventGrid& rg) {
  const auto& r = rg.values;
  double worst = 0.0;
  for (std::size_t n = 1; n < r.size(); ++n) {
    double s = k[n];
    for (std::size_t i = 1; i <= n; ++i) s += kappa[i] * r[n - i + 1].a[0];
    worst = std::max(worst, std::abs(r[n].a[0] - s));
  }
  return worst;
}

double scalar_trapezoid_residual(std::span<const double> k, std::span<const double> kappa,
                                 const ResolventGrid& rg) {
  const auto& r = rg.values;
  auto rv = [&](std::size_t j) {
    return (j == 0 && !std::isfinite(r[0].a[0])) ? r[1].a[0] : r[j].a[0];
  };
  double worst = 0.0;
  for (std::size_t n = 1; n < r.size(); ++n) {
    double s = k[n];
    for (std::size_t i = 1; i <= n; ++i) s += kappa[i] * 0.5 * (rv(n - i) + rv(n - i + 1));
    worst = std::max(worst, std::abs(r[n].a[0] - s));
  }
  return worst;
}

GronwallReport verify_gronwall(std::span<const double> x, std::span<const double> f,
                               std::span<const double> k, const TimeGrid& grid, double rel_tol) {
  const std::size_t N = grid.size();
  if (x.size() != N || f.size() != N || k.size() != N)
    throw GridMismatch("gronwall inputs do not match the grid");
  for (std::size_t n = 0; n < N; ++n)
    if (k[n] < 0.0) throw NegativeKernel("k(t_" + std::to_string(n) + ") < 0");
  const auto kappa = cell_integrals(k, grid);
  if (kappa[1] >= 1.0) throw GridTooCoarse("int_0^dt k >= 1; refine the grid");

  // Hypothesis x_n <= f_n + sum_i kappa_i x_{n-i+1}.
  for (std::size_t n = 0; n < N; ++n) {
    double rhs = f[n];
    for (std::size_t i = 1; i <= n; ++i) rhs += kappa[i] * x[n - i + 1];
    if (x[n] > rhs + rel_tol * (1.0 + std::abs(rhs)))
      throw HypothesisViolated("x > f + k * x at node " + std::to_string(n) + " (t = " +
                               std::to_string(grid.t(n)) + ")");
  }
  // Discrete resolvent of the same product rule: rho = kappa + kappa * rho.
  std::vector<double> rho(N, 0.0);
  for (std::size_t j = 1; j < N; ++j) {
    double s = kappa[j];
    for (std::size_t l = 2; l <= j; ++l) s += kappa[l] * rho[j - l + 1];
    rho[j] = s / (1.0 - kappa[1]);
  }
  GronwallReport rep;
  rep.bound.resize(N);
  rep.min_slack = kInf;
  rep.pass = true;
  for (std::size_t n = 0; n < N; ++n) {
    double b = f[n];
    for (std::size_t m = 1; m <= n; ++m) b += rho[n + 1 - m] * f[m];
    rep.bound[n] = b;
    const double slack = b - x[n];
    if (slack < rep.min_slack) {
      rep.min_slack = slack;
      rep.argmin = n;
    }
    if (slack < -rel_tol * (1.0 + std::abs(b))) rep.pass = false;
  }
  return rep;
}

// ---------------------------------------------------------------- assumption checks

AdmissibleInterval admissible_q_interval(double H, double beta) {
  AdmissibleInterval iv;
  const double e = 2.0 - 2.0 * H - beta;
  if (e >= 1.0) return iv;
  iv.empty = false;
  iv.high = e > 0.0 ? 2.0 / e : kInf;
  return iv;
}

double default_q(double H, double beta) {
  const auto iv = admissible_q_interval(H, beta);
  if (iv.empty) throw InvalidArgument("admissible q-interval is empty");
  return std::isfinite(iv.high) ? iv.midpoint() : 4.0;
}

namespace {

// Quadrature for int_0^{X_max} F w, with the geometric part starting below the shift.
QuadratureRule shifted_rule(double t, const WeightSpec& w, int order, double step) {
  const double first = t > 0.0 ? std::min(1e-4, 1e-3 * t) : 1e-4;
  return QuadratureRule::build(SpaceGrid::standard(first, 1.3, step, 40.0), w, order);
}

// sum_i int (F_i(t+x)^2 + F_i'(t+x)^2) w(x) dx for F = K (deriv = 0) or F = K' (deriv = 1).
double h1_sq(const Kernel& K, double t, const QuadratureRule& r, int deriv) {
  double s = 0.0;
  for (std::size_t q = 0; q < r.size(); ++q) {
    const double u = t + r.nodes[q];
    double v = 0.0;
    for (std::size_t i = 0; i < K.dim(); ++i) {
      const double f = deriv ? K[i].derivative(u) : K[i](u);
      const double g = deriv ? K[i].second_derivative(u) : K[i].derivative(u);
      v += f * f + g * g;
    }
    s += r.weights[q] * v;
  }
  return s;
}

double h1_diff_sq(const Kernel& K, double t, double h, const QuadratureRule& r) {
  double s = 0.0;
  for (std::size_t q = 0; q < r.size(); ++q) {
    const double u = t + r.nodes[q];
    double v = 0.0;
    for (std::size_t i = 0; i < K.dim(); ++i) {
      const double f = K[i](u) - K[i](u + h);
      const double g = K[i].derivative(u) - K[i].derivative(u + h);
      v += f * f + g * g;
    }
    s += r.weights[q] * v;
  }
  return s;
}

// int_{lo}^{T} g(t) dt over geometric cells, plus a power-law tail on (0, lo]
// with the exponent fitted from g(lo) and g(lo/10). Returns +inf if the tail diverges.
struct TailIntegral {
  double value;
  double exponent;
};

TailIntegral integrate_with_tail(const std::function<double(double)>& g, double T, double lo,
                                 int order) {
  const double g1 = g(lo), g0 = g(0.1 * lo);
  const double p = std::log(g0 / g1) / std::log(0.1);
  double s = 0.0;
  double a = lo;
  while (a < T) {
    const double b = std::min(T, a * 4.0);
    s += quad::gauss(g, a, b, order);
    a = b;
  }
  if (!(p > -1.0)) return {kInf, p};
  s += g1 * lo / (1.0 + p);
  return {s, p};
}

}  // namespace

double shifted_h1w_norm_sq(const Kernel& K, double t, const WeightSpec& w) {
  if (t == 0.0 && K.singular_at_origin()) return kInf;
  return h1_sq(K, t, shifted_rule(t, w, 4, 0.05), 0);
}

KernelConditionReport verify_assumptions(const Kernel& K, const WeightSpec& w, double q, double T) {
  if (!(q > 2.0)) throw InvalidArgument("verify_assumptions needs q > 2");
  KernelConditionReport rep;
  rep.q = q;
  rep.T = T;
  rep.cond2_target = 1.0 - 2.0 / q;
  if (K[0].kind() == KernelKind::power_law) {
    const auto iv = admissible_q_interval(K[0].hurst(), w.beta);
    rep.q_low = iv.low;
    rep.q_high = iv.high;
    rep.q_interval_empty = iv.empty;
  }
  constexpr double tol = 1e-4;
  constexpr double lo = 1e-9;
  const int order = 3;
  const double step = 0.1;

  // cond 1: int_0^T |K(t+.)|^q dt
  {
    auto g = [&](double t) { return std::pow(h1_sq(K, t, shifted_rule(t, w, order, step), 0), 0.5 * q); };
    const auto ti = integrate_with_tail(g, T, lo, 8);
    rep.cond1.value = ti.value;
    rep.cond1.pass = std::isfinite(ti.value) && ti.exponent > -1.0 + tol;
    if (!rep.cond1.pass) rep.cond1.value = kInf;
    rep.cond1.note = "local exponent at 0: " + std::to_string(ti.exponent);
  }
  // cond 2: slope of int_0^T |K(t+.) - K(t+h+.)|^2 dt against h.
  {
    std::vector<double> lh, lv;
    bool finite = true;
    for (int k = 3; k <= 10; ++k) {
      const double h = std::ldexp(1.0, -k);
      auto g = [&](double t) { return h1_diff_sq(K, t, h, shifted_rule(t, w, order, step)); };
      const auto ti = integrate_with_tail(g, T, lo, 8);
      if (!std::isfinite(ti.value)) finite = false;
      lh.push_back(std::log(h));
      lv.push_back(std::log(ti.value));
    }
    double slope = kNaN;
    if (finite) {
      const double n = static_cast<double>(lh.size());
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (std::size_t i = 0; i < lh.size(); ++i) {
        sx += lh[i];
        sy += lv[i];
        sxx += lh[i] * lh[i];
        sxy += lh[i] * lv[i];
      }
      slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    rep.cond2.value = slope;
    rep.cond2.pass = finite && slope >= rep.cond2_target - 1e-3;
    rep.cond2.note = "fitted exponent vs target " + std::to_string(rep.cond2_target);
  }
  // cond 3: int_0^T (int_0^T |dK(s+r+.)|^2 ds)^{1/2} dr (inner horizon T bounds every t <= T).
  {
    auto n_of = [&](double u) { return h1_sq(K, u, shifted_rule(u, w, order, step), 1); };
    auto J = [&](double r) {
      double s = 0.0, a = r;
      while (a < r + T) {
        const double b = std::min(r + T, a + std::max(a - r, r) * 3.0 + 1e-300);
        s += quad::gauss(n_of, a, b, 6);
        a = b;
      }
      return std::sqrt(s);
    };
    const auto ti = integrate_with_tail(J, T, lo, 6);
    rep.cond3.value = ti.value;
    rep.cond3.pass = std::isfinite(ti.value) && ti.exponent > -1.0 + tol;
    if (!rep.cond3.pass) rep.cond3.value = kInf;
    rep.cond3.note = "local exponent at 0: " + std::to_string(ti.exponent);
  }
  return rep;
}

Curve kernel_curve(const Kernel& K, double delta, std::vector<double> v) {
  if (v.size() != K.dim()) throw InvalidArgument("kernel_curve: coefficient size mismatch");
  const Kernel Ks = K.shifted(delta);
  bool singular = false;
  for (std::size_t i = 0; i < K.dim(); ++i)
    if (v[i] != 0.0 && Ks[i].singular_at_origin()) singular = true;
  auto value = [Ks, v](double x, double* out) {
    for (std::size_t i = 0; i < Ks.dim(); ++i) {
      if (v[i] == 0.0) {
        out[i] = 0.0;
      } else if (x <= 0.0 && Ks[i].singular_at_origin()) {
        out[i] = std::copysign(kInf, v[i]);
      } else {
        out[i] = Ks[i](std::max(x, 0.0)) * v[i];
      }
    }
  };
  auto deriv = [Ks, v](double x, double* out) {
    for (std::size_t i = 0; i < Ks.dim(); ++i) {
      if (v[i] == 0.0) {
        out[i] = 0.0;
      } else if (x <= 0.0 && Ks[i].singular_at_origin()) {
        out[i] = -std::copysign(kInf, v[i]);
      } else {
        out[i] = Ks[i].derivative(std::max(x, 0.0)) * v[i];
      }
    }
  };
  return Curve::analytic(K.dim(), value, deriv, singular);
}

Curve kernel_curve(const Kernel& K, double delta) {
  return kernel_curve(K, delta, std::vector<double>(K.dim(), 1.0));
}

}  // namespace volterra
