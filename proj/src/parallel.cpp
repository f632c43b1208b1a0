#include "volterra/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "volterra/errors.hpp"

namespace volterra {

namespace {
std::atomic<unsigned> g_threads{0};
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("VOLTERRA_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void set_threads(unsigned n) { g_threads = resolve_threads(n); }

unsigned threads() {
  unsigned n = g_threads.load();
  return n == 0 ? resolve_threads(0) : n;
}

namespace {
thread_local bool in_worker = false;
}  // namespace

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  // Nested calls run inside the owning worker.
  const std::size_t workers = in_worker ? 1 : std::min<std::size_t>(threads(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = n * w / workers;
    const std::size_t hi = n * (w + 1) / workers;
    pool.emplace_back([&, lo, hi] {
      in_worker = true;
      try {
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

double MCEstimate::z_score(double target) const {
  const double diff = std::abs(mean - target);
  if (std_error == 0.0) return diff == 0.0 ? 0.0 : INFINITY;
  return diff / std_error;
}

bool MCEstimate::within(double target, double n_se) const {
  return std::abs(mean - target) <= n_se * std_error;
}

MCEstimate estimate(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw InvalidArgument("an estimate needs at least two samples");
  double sum = 0.0;
  for (double v : samples) sum += v;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  const double var = ss / static_cast<double>(n - 1);
  return {mean, std::sqrt(var / static_cast<double>(n)), n};
}

MCEstimate difference(const MCEstimate& a, const MCEstimate& b) {
  return {a.mean - b.mean, std::hypot(a.std_error, b.std_error),
          std::min(a.n_samples, b.n_samples)};
}

}  // namespace volterra
