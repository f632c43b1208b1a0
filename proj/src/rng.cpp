#include "volterra/rng.hpp"

#include <cmath>
#include <numbers>

namespace volterra {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream) {
  key_ = splitmix64(splitmix64(seed ^ 0x5851f42d4c957f2dULL) ^ stream);
}

std::uint64_t CounterRng::bits(std::uint64_t path, std::uint64_t step,
                               std::uint64_t coord, std::uint64_t lane) const {
  std::uint64_t h = splitmix64(key_ ^ path);
  h = splitmix64(h ^ (step * 0x9e3779b97f4a7c15ULL));
  h = splitmix64(h ^ (coord << 8) ^ lane);
  return h;
}

double CounterRng::uniform(std::uint64_t path, std::uint64_t step,
                           std::uint64_t coord, std::uint64_t lane) const {
  // 53 random bits, shifted off zero.
  return (static_cast<double>(bits(path, step, coord, lane) >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t path, std::uint64_t step,
                          std::uint64_t coord) const {
  const double u1 = uniform(path, step, coord, 0);
  const double u2 = uniform(path, step, coord, 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace volterra
