#ifndef NMSLAB_RNG_HPP
#define NMSLAB_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace nmslab {

// All randomness in the project flows from one master seed through named
// substreams, so that any experiment replays bit for bit. Distribution
// transforms are hand rolled on top of std::mt19937_64 (whose output is
// pinned by the standard) instead of std::*_distribution, whose output is
// implementation defined.

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stable 64-bit seed for a named substream of a master seed.
inline uint64_t derive_seed(uint64_t master, std::string_view stream,
                            uint64_t index = 0) {
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the stream name
  for (char c : stream) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(master ^ splitmix64(h) ^ splitmix64(index * 0x9e3779b97f4a7c15ULL + 1));
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0,1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Inclusive integer range.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int64_t>(engine_() % span);
  }

  // Box-Muller without the cached spare, so the draw count per call is fixed.
  double gaussian() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace nmslab

#endif  // NMSLAB_RNG_HPP
