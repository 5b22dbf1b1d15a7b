#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sgt::num {

// Derives a stream id from a base seed and a purpose string, so independent
// consumers (masking, augmentation, init, ...) draw from decoupled streams
// that are all reproducible from the single run seed.
std::uint64_t split_seed(std::uint64_t seed, std::string_view purpose);

// Deterministic RNG. The engine is std::mt19937_64 (bit-exact across
// platforms); the distributions below are hand-rolled because the standard
// library's are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng stream(std::uint64_t seed, std::string_view purpose) {
    return Rng(split_seed(seed, purpose));
  }

  std::uint64_t bits() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return bits() % n; }

  // Uniform integer in [lo, hi] inclusive.
  std::int64_t range(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller; the sine branch is discarded so a draw
  // consumes exactly two engine outputs.
  double normal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace sgt::num
