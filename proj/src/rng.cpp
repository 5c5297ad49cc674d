#include "clusterdyn/rng.hpp"

#include "clusterdyn/error.hpp"

namespace clusterdyn {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t child_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

int Rng::discrete(std::span<const double> pmf) {
  const double u = uniform();
  double acc = 0.0;
  int last_positive = -1;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    if (pmf[i] <= 0.0) continue;
    last_positive = static_cast<int>(i);
    acc += pmf[i];
    if (u < acc) return last_positive;
  }
  if (last_positive < 0) throw Error(ErrorKind::InvalidArgument, "discrete draw from a pmf with no mass");
  return last_positive;
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw Error(ErrorKind::InvalidArgument, "below(0)");
  // Lemire-style rejection keeps the draw exactly uniform.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = engine_();
    if (r >= threshold) return r % bound;
  }
}

}  // namespace clusterdyn
