#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace lseg {

// splitmix64: used to derive independent stream seeds from one master seed.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t master, uint64_t stream) {
  uint64_t s = master ^ (0x9e3779b97f4a7c15ull * (stream + 1));
  splitmix64(s);
  return splitmix64(s);
}

// Deterministic RNG. Distributions are implemented by hand so sequences are
// identical across standard libraries and platforms (std::uniform_*
// distributions are implementation-defined).
class Rng {
public:
  explicit Rng(uint64_t seed = 0x853c49e6748fea9bull) : state_(seed) {
    // avoid the all-zero state and decorrelate nearby seeds
    for (int i = 0; i < 4; ++i) next_u64();
  }

  uint64_t next_u64() {
    // xorshift64* over a splitmix-initialised state
    uint64_t x = (state_ += 0x9e3779b97f4a7c15ull);
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [lo, hi] inclusive
  int64_t uniform_int(int64_t lo, int64_t hi) {
    uint64_t span = uint64_t(hi - lo) + 1;
    return lo + int64_t(next_u64() % span);
  }

  // standard normal via Box-Muller (one value per call, cached pair)
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  // Fisher-Yates
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = size_t(uniform_int(0, int64_t(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  uint64_t state_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace lseg
