#pragma once

#include <cmath>
#include <cstdint>

namespace deskdrive {

// splitmix64. All stochastic behaviour in the library goes through streams
// derived from a root seed with substream(), so results are reproducible
// regardless of evaluation order or worker count.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // uniform in (0, 1]; never returns 0 so log() is safe
  double uniform01() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // inclusive bounds
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
  }

  double normal(double mean = 0.0, double sigma = 1.0) {
    double u1 = uniform01();
    double u2 = uniform01();
    return mean + sigma * std::sqrt(-2.0 * std::log(u1)) *
                      std::cos(6.283185307179586476925287 * u2);
  }

  // Knuth; fine for the small rates used here
  int poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    double limit = std::exp(-lambda);
    double p = 1.0;
    int k = 0;
    do {
      ++k;
      p *= uniform01();
    } while (p > limit);
    return k - 1;
  }

 private:
  uint64_t state_;
};

inline uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Derive an independent stream seed from a root seed and up to three salts.
inline uint64_t substream(uint64_t seed, uint64_t a, uint64_t b = 0,
                          uint64_t c = 0) {
  uint64_t h = mix64(seed + 0x9E3779B97F4A7C15ull);
  h = mix64(h ^ (a * 0xD1342543DE82EF95ull + 1));
  h = mix64(h ^ (b * 0xAF251AF3B0F025B5ull + 2));
  h = mix64(h ^ (c * 0x2545F4914F6CDD1Dull + 3));
  return h;
}

// Stream tags, so independent consumers of one seed never collide.
namespace stream_tag {
constexpr uint64_t kMap = 1;
constexpr uint64_t kLog = 2;
constexpr uint64_t kFrame = 3;
constexpr uint64_t kDrift = 4;
constexpr uint64_t kFalsePositive = 5;
constexpr uint64_t kAgent = 6;
constexpr uint64_t kShuffle = 7;
constexpr uint64_t kPerturb = 8;
constexpr uint64_t kInit = 9;
constexpr uint64_t kDataset = 10;
constexpr uint64_t kEval = 11;
constexpr uint64_t kRetry = 12;
}  // namespace stream_tag

}  // namespace deskdrive
