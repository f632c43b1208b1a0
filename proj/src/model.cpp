#include "volterra/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "volterra/errors.hpp"
#include "volterra/rng.hpp"

namespace volterra {

InitialCurve InitialCurve::deterministic(Curve c) {
  InitialCurve ic;
  ic.base_ = std::move(c);
  return ic;
}

InitialCurve InitialCurve::fbm_type1(double H, Curve base, std::size_t coord, double history,
                                     double cell) {
  if (!(H > 0.0 && H < 1.0)) throw InvalidArgument("type-I fBm needs H in (0, 1)");
  if (coord >= base.dim()) throw InvalidArgument("type-I fBm coordinate out of range");
  InitialCurve ic;
  ic.kind_ = InitialKind::fbm_type1;
  ic.base_ = std::move(base);
  ic.hurst_ = H;
  ic.coord_ = coord;
  // Uniform cells on [-1, 0], geometric (ratio 1.05) further out.
  std::vector<double> depth{0.0};
  double x = 0.0;
  while (x < std::min(1.0, history) - 1e-12) depth.push_back(x = std::min(1.0, x + cell));
  double w = cell;
  while (x < history - 1e-12) {
    w *= 1.05;
    depth.push_back(x = std::min(history, x + w));
  }
  for (auto it = depth.rbegin(); it != depth.rend(); ++it) ic.edges_.push_back(-*it);
  return ic;
}

InitialCurve InitialCurve::ou_stationary(double rate, double scale, Curve base, std::size_t coord) {
  if (!(rate > 0.0)) throw InvalidArgument("stationary OU curve needs rate > 0");
  if (coord >= base.dim()) throw InvalidArgument("OU coordinate out of range");
  InitialCurve ic;
  ic.kind_ = InitialKind::ou_stationary;
  ic.base_ = std::move(base);
  ic.rate_ = rate;
  ic.scale_ = scale;
  ic.coord_ = coord;
  return ic;
}

Curve InitialCurve::sample(std::uint64_t seed, std::uint64_t path) const {
  if (kind_ == InitialKind::deterministic) return base_;
  const CounterRng rng(seed, streams::initial_curve);
  const std::size_t dim = base_.dim(), c = coord_;
  Curve random;
  if (kind_ == InitialKind::ou_stationary) {
    const double xi = rng.normal(path, 0, 0) * scale_ / std::sqrt(2.0 * rate_);
    const double r = rate_;
    random = Curve::analytic(
        dim,
        [=](double t, double* out) {
          std::fill(out, out + dim, 0.0);
          out[c] = xi * std::exp(-r * t);
        },
        [=](double t, double* out) {
          std::fill(out, out + dim, 0.0);
          out[c] = -r * xi * std::exp(-r * t);
        });
  } else {
    // X(t) = sum_c xi_c g_c(t), g_c the cell mean of [(t-s)^a - (-s)^a] / Gamma(H + 1/2).
    const double a = hurst_ - 0.5, p = a + 1.0, g = 1.0 / std::tgamma(hurst_ + 0.5);
    const std::size_t n = edges_.size() - 1;
    std::vector<double> lo(n), hi(n), xi(n);
    for (std::size_t k = 0; k < n; ++k) {
      lo[k] = -edges_[k + 1];  // distance of the near edge from 0
      hi[k] = -edges_[k];
      xi[k] = rng.normal(path, k, 0) * std::sqrt(hi[k] - lo[k]) * g / (hi[k] - lo[k]);
    }
    auto prim = [p](double u) { return std::pow(u, p) / p; };
    random = Curve::analytic(
        dim,
        [=](double t, double* out) {
          std::fill(out, out + dim, 0.0);
          double s = 0.0;
          for (std::size_t k = 0; k < n; ++k)
            s += xi[k] * ((prim(t + hi[k]) - prim(t + lo[k])) - (prim(hi[k]) - prim(lo[k])));
          out[c] = s;
        },
        [=](double t, double* out) {
          std::fill(out, out + dim, 0.0);
          double s = 0.0;
          for (std::size_t k = 0; k < n; ++k)
            s += xi[k] * (std::pow(t + hi[k], a) - std::pow(t + lo[k], a));
          out[c] = s;
        });
  }
  return Curve::combine(1.0, base_, 1.0, random);
}

std::string InitialCurve::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case InitialKind::deterministic:
      os << "deterministic";
      break;
    case InitialKind::fbm_type1:
      os << "fbm_type1(H=" << hurst_ << ",cells=" << edges_.size() - 1 << ")";
      break;
    case InitialKind::ou_stationary:
      os << "ou_stationary(rate=" << rate_ << ",scale=" << scale_ << ")";
      break;
  }
  return os.str();
}

void Model::validate() const {
  if (kernel.dim() != coef.d) throw InvalidArgument("kernel dimension differs from d");
  if (x0.dim() != coef.d) throw InvalidArgument("initial curve dimension differs from d");
  weight.validate();
}

Model Model::with_kernel(Kernel k) const {
  Model m = *this;
  m.kernel = std::move(k);
  return m;
}

Model Model::with_initial(InitialCurve c) const {
  Model m = *this;
  m.x0 = std::move(c);
  return m;
}

std::string Model::fingerprint() const {
  std::ostringstream os;
  os.precision(17);
  os << name << "|K=" << kernel.describe() << "|w=(" << weight.beta << "," << weight.decay << ")|coef="
     << coef.name << "|d=" << coef.d << ",m=" << coef.m << "|X0=" << x0.describe();
  return os.str();
}

double default_beta(double H) {
  const double lo = std::max(1.0 - 2.0 * H, 0.0);
  return 0.5 * (lo + 1.0);
}

namespace presets {

namespace {

Model base(std::string name, Kernel K, double beta, Coefficients c, InitialCurve x0) {
  Model m;
  m.name = std::move(name);
  m.kernel = std::move(K);
  m.weight = WeightSpec{beta, 1.0, {}};
  m.coef = std::move(c);
  m.x0 = std::move(x0);
  m.validate();
  return m;
}

Kernel power(double H) { return Kernel(ScalarKernel::power_law(H, true)); }

}  // namespace

Model brownian(double x0, double sigma) {
  return base("brownian", power(0.5), 0.5, coefficients::additive(1, sigma),
              InitialCurve::deterministic(Curve::constant({x0})));
}

Model fbm_type2(double H, double beta) {
  return base("fbm2", power(H), beta, coefficients::additive(1, 1.0),
              InitialCurve::deterministic(Curve::constant({0.0})));
}

Model fbm_type1(double H, double beta) {
  return base("fbm1", power(H), beta, coefficients::additive(1, 1.0),
              InitialCurve::fbm_type1(H, Curve::constant({0.0})));
}

Model ou_stationary() {
  return base("ou", Kernel(ScalarKernel::exponential(1.0)), 0.5, coefficients::additive(1, 1.0),
              InitialCurve::ou_stationary(1.0, 1.0, Curve::constant({0.0})));
}

Model rough_bergomi(double H, double beta, double v0, double rho, double nu) {
  Kernel K({ScalarKernel::power_law(0.5, true), ScalarKernel::power_law(H, true)});
  return base("rbergomi", K, beta, coefficients::rough_bergomi(rho, nu),
              InitialCurve::deterministic(Curve::constant({0.0, v0})));
}

Model rough_bergomi_smooth(double H, double beta, double v0, double rho, double nu, double kappa) {
  Kernel K({ScalarKernel::power_law(0.5, true), ScalarKernel::power_law(H, true)});
  return base("rbergomi_smooth", K, beta, coefficients::rough_bergomi(rho, nu, kappa),
              InitialCurve::deterministic(Curve::constant({0.0, v0})));
}

Model rough_heston(double H, double beta, double v0) {
  Kernel K({ScalarKernel::power_law(0.5, true), ScalarKernel::power_law(H, true)});
  return base("rheston", K, beta, coefficients::rough_heston(),
              InitialCurve::deterministic(Curve::constant({0.0, v0})));
}

Model smooth(double H, double beta, double theta, double s0, double s1, double x0) {
  return base("smooth", power(H), beta, coefficients::smooth(theta, s0, s1),
              InitialCurve::deterministic(Curve::constant({x0})));
}

Model linear(double H, double beta, double a, double s, double x0) {
  return base("linear", power(H), beta, coefficients::linear({a}, 1, s),
              InitialCurve::deterministic(Curve::constant({x0})));
}

Model gaussian(double H, double beta, double s, double x0) {
  return base("gaussian", power(H), beta, coefficients::additive(1, s),
              InitialCurve::deterministic(Curve::constant({x0})));
}

std::vector<std::string> names() {
  return {"brownian", "fbm2", "fbm1", "ou", "rbergomi", "rbergomi_smooth",
          "rheston", "smooth", "linear", "gaussian"};
}

}  // namespace presets

}  // namespace volterra
