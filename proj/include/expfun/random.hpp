#ifndef EXPFUN_RANDOM_HPP
#define EXPFUN_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <limits>

namespace expfun {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// xoshiro256++ generator with explicit stream derivation.
///
/// Streams are keyed by (master seed, stream index): the state is a pure
/// function of the key, so a batch draws the same numbers no matter which
/// worker runs it. All derived variates (uniform, normal, exponential) are
/// computed here rather than through <random> distributions, whose output
/// is implementation-defined.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) { reseed(seed, 0); }

  static Rng stream(std::uint64_t master_seed, std::uint64_t index) {
    Rng r(0);
    r.reseed(master_seed, index);
    return r;
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  double exponential() { return -std::log(uniform()); }

  // Marsaglia polar method; the spare variate is part of the stream state.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  void reseed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t x = splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL);
    for (auto& s : s_) {
      x = splitmix64(x);
      s = x;
    }
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
    has_spare_ = false;
    spare_ = 0.0;
  }

  std::uint64_t s_[4]{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace expfun

#endif  // EXPFUN_RANDOM_HPP
