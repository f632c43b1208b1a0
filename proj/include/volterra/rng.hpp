#pragma once

#include <cstdint>

namespace volterra {

// Counter-based normal generator: every draw is a pure function of its key,
// so paths can be produced in any order and on any number of workers.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t bits(std::uint64_t path, std::uint64_t step, std::uint64_t coord,
                     std::uint64_t lane = 0) const;
  // Uniform in the open interval (0, 1).
  double uniform(std::uint64_t path, std::uint64_t step, std::uint64_t coord,
                 std::uint64_t lane = 0) const;
  double normal(std::uint64_t path, std::uint64_t step, std::uint64_t coord) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  CounterRng with_stream(std::uint64_t stream) const { return CounterRng(seed_, stream); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
};

std::uint64_t splitmix64(std::uint64_t x);

// Stream identifiers reserved by the library.
namespace streams {
inline constexpr std::uint64_t brownian = 0;
inline constexpr std::uint64_t initial_curve = 1;
inline constexpr std::uint64_t fresh = 2;
inline constexpr std::uint64_t nested_base = 1000;
}  // namespace streams

}  // namespace volterra
