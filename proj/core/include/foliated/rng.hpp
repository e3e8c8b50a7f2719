#pragma once

#include <cmath>
#include <cstdint>

namespace foliated {

// Counter-based normal variate generator.  Every draw is a pure function of
// (master seed, path index, step, component), so per-path streams are
// independent of scheduling and thread count.
class CounterRng {
public:
  CounterRng(uint64_t master_seed, uint64_t path_index)
      : key_(mix(master_seed ^ 0x9e3779b97f4a7c15ull) ^ mix(path_index + 0x6a09e667f3bcc909ull)) {}

  // Standard normal for (step, component) via Box-Muller on two counter words.
  double normal(uint64_t step, uint64_t component) const {
    const uint64_t ctr = step * 0x100000000ull + component;
    const double u1 = to_unit(mix(key_ ^ mix(2 * ctr + 1)));
    const double u2 = to_unit(mix(key_ ^ mix(2 * ctr + 2)));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

private:
  uint64_t key_;

  // splitmix64 finalizer; full-avalanche 64-bit mix.
  static uint64_t mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  // Map to (0,1]; the offset keeps log() finite.
  static double to_unit(uint64_t x) { return (static_cast<double>(x >> 11) + 1.0) * 0x1.0p-53; }
};

}  // namespace foliated
