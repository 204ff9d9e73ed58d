#pragma once

#include <cstdint>
#include <random>

namespace cdd {

// splitmix64 finalizer. Stable across platforms and compilers.
std::uint64_t mix64(std::uint64_t x);

// Seed derivation used everywhere a child seed is needed:
//   stable_mix(parent, value) = mix64(parent ^ mix64(value))
std::uint64_t stable_mix(std::uint64_t parent, std::uint64_t value);

// Explicit random state. std::mt19937_64's output sequence is fixed by the
// standard; uniform() maps the top 53 bits to [0, 1) without going through
// std::uniform_real_distribution, whose algorithm is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cdd
