#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace roadcast {

// Deterministic PRNG wrapper. All mappings from raw engine output to
// ranges are hand-rolled so draws are identical across platforms and
// standard libraries (std::*_distribution is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  // Uniform double in [0, 1).
  double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  std::uint8_t byte() { return static_cast<std::uint8_t>(next_u64() >> 56); }

  bool chance(double p) { return unit() < p; }

 private:
  std::mt19937_64 eng_;
};

std::uint64_t derive_seed(std::uint64_t master, std::string_view stream);

// Named sub-streams of one master seed, so perturbing the draws of one
// subsystem (mobility, coding, workload) leaves the others untouched.
class RngSet {
 public:
  explicit RngSet(std::uint64_t master) : master_(master) {}
  Rng stream(std::string_view name) const { return Rng(derive_seed(master_, name)); }

 private:
  std::uint64_t master_;
};

}  // namespace roadcast
