#pragma once

#include <functional>
#include <vector>

namespace volterra::quad {

struct GaussRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

// Gauss-Legendre rule of the given order (cached, thread-safe).
const GaussRule& gauss_legendre(int order);

double gauss(const std::function<double(double)>& f, double a, double b, int order = 8);

// Composite Gauss rule on [a, b] split into `pieces` equal cells.
double composite(const std::function<double(double)>& f, double a, double b,
                 int pieces, int order = 8);

// Integrable singularity at the left end: x = a + (b-a) v^p flattens x^-gamma
// for gamma < 1 - 1/p.
double left_singular(const std::function<double(double)>& f, double a, double b,
                     int order = 16, int power = 8);

// Double-exponential quadrature for endpoint singularities of unknown strength.
double tanh_sinh(const std::function<double(double)>& f, double a, double b,
                 double tol = 1e-12);

// Integral over (0, upper] of an integrand with a possibly singular origin:
// geometric cells towards 0 plus a left-singular innermost cell.
double origin_singular(const std::function<double(double)>& f, double upper,
                       double innermost = 1e-12, int order = 10);

}  // namespace volterra::quad
