#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace clusterdyn {

// Counter-based seed derivation: child(seed, r) gives an independent stream
// for replication r regardless of execution order.
std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t child_seed(std::uint64_t seed, std::uint64_t index) noexcept;

// mt19937_64 stream with platform-independent conversions (the std
// distributions are implementation-defined, so draws are mapped by hand).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool bernoulli(double p) { return uniform() < p; }
  // Index drawn from a pmf by inversion; the last positive index absorbs rounding.
  int discrete(std::span<const double> pmf);
  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
};

}  // namespace clusterdyn
