#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace cfisac {

// Deterministic random streams for reproducible Monte Carlo campaigns.
//
// std::mt19937_64 produces a bit-exact sequence on every conforming
// implementation, but the standard distributions do not, so the uniform and
// Gaussian transforms are implemented here (53-bit uniforms, Box-Muller).

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives an independent stream seed from a base seed and up to three
// coordinates (experiment, sweep point, trial). Order-sensitive by design.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a = 0,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = base;
  splitmix64(s);
  s ^= 0x9e3779b97f4a7c15ULL * (a + 1);
  splitmix64(s);
  s ^= 0xc2b2ae3d27d4eb4fULL * (b + 1);
  splitmix64(s);
  s ^= 0x165667b19e3779f9ULL * (c + 1);
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(raw() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer on [lo, hi], inclusive, rejection-sampled (unbiased).
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
    const std::uint64_t n = hi - lo + 1;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = raw();
    while (x >= limit) x = raw();
    return lo + x % n;
  }

  // Standard normal via Box-Muller; caches the second variate.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

  // Circularly symmetric complex Gaussian CN(0, variance).
  std::complex<double> cnormal(double variance) {
    const double s = std::sqrt(variance / 2.0);
    return {s * normal(), s * normal()};
  }

  // Unit-power QPSK symbol (+-1 +-j)/sqrt(2).
  std::complex<double> qpsk() {
    const std::uint64_t bits = raw();
    const double a = (bits & 1u) ? M_SQRT1_2 : -M_SQRT1_2;
    const double b = (bits & 2u) ? M_SQRT1_2 : -M_SQRT1_2;
    return {a, b};
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cfisac
