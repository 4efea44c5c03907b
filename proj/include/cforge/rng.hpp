#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cforge {

// Seeded random source. Draw helpers are implemented here rather than with
// std::*_distribution so sequences are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream for a named sub-task (a chain, a stage).
  static Rng Derive(std::uint64_t base_seed, std::string_view label);

  std::uint64_t Next() { return engine_(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t UniformIndex(std::uint64_t n);

  // Uniform real in [0, 1).
  double UniformReal();

  bool CoinFlip() { return (Next() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
};

// FNV-1a, used for deriving stream seeds from labels.
std::uint64_t Fnv1a64(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace cforge
