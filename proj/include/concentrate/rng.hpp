#ifndef CONCENTRATE_RNG_HPP
#define CONCENTRATE_RNG_HPP

#include <cstdint>
#include <random>

namespace concentrate {

// Splittable deterministic generator: stream i of seed s is an mt19937_64
// keyed by splitmix64(s, i).  Draws are identical across platforms because
// only raw engine output is used (no std::distribution).
class Prng {
public:
  explicit Prng(std::uint64_t seed, std::uint64_t stream = 0)
      : engine_(mix(seed, stream)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in the open interval (0,1).
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

private:
  std::mt19937_64 engine_;
};

} // namespace concentrate

#endif
