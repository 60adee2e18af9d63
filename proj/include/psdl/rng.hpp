#pragma once

#include <cstdint>
#include <random>

namespace psdl {

// One splitmix64 round; used to fold salts into seeds when deriving
// independent streams for parallel work.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

// Deterministic random stream. The engine (mt19937_64) is fully specified by
// the standard and all distribution transforms are implemented here, so a
// given seed produces the same draws on every platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Stream addressed by (seed, a, b); independent streams for sweep cells.
  static Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

  // Uniform double in [0, 1), 53 bits.
  double uniform();

  // Standard normal via Box-Muller.
  double normal();

  // Uniform integer in [0, bound), bias-free.
  std::uint64_t integer(std::uint64_t bound);

  // Poisson draw with the given mean, returned as a double so that very
  // large means do not overflow. Inversion by sequential search below mean
  // 10, transformed rejection (PTRS) above.
  double poisson(double mean);

 private:
  double poisson_inversion(double mean);
  double poisson_ptrs(double mean);

  std::mt19937_64 engine_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace psdl
