#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace volterra {

// Worker count used by every path-parallel operation. Results never depend on it.
void set_threads(unsigned n);
unsigned threads();
// Explicit request > VOLTERRA_THREADS > hardware concurrency.
unsigned resolve_threads(unsigned requested);

// Calls body(i) for i in [0, n) on contiguous blocks, one block per worker.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

struct MCEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;

  // |mean - target| measured in standard errors.
  double z_score(double target) const;
  bool within(double target, double n_se) const;
};

// Sequential reduction in index order so that sums are reproducible.
MCEstimate estimate(std::span<const double> samples);
// Difference of two estimates treated as independent.
MCEstimate difference(const MCEstimate& a, const MCEstimate& b);

}  // namespace volterra
