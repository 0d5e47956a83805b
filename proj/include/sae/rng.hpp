#ifndef SAE_RNG_HPP
#define SAE_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace sae {

// SplitMix64 step; also the mixing function used to derive substream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Derives an independent stream seed from a base seed and a list of words
// (replicate index, area index, purpose tag, ...).  seed_r = h(base, words):
// fold each word into the SplitMix64 state and advance once per word.
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> words) {
  std::uint64_t s = base;
  std::uint64_t h = splitmix64(s);
  for (std::uint64_t w : words) {
    s = h ^ (w + 0x9e3779b97f4a7c15ull);
    h = splitmix64(s);
  }
  return h;
}

// Stream purpose tags, so distinct uses of the same (seed, index) pair never
// collide.
namespace stream {
inline constexpr std::uint64_t population = 0x01;
inline constexpr std::uint64_t area_sizes = 0x02;
inline constexpr std::uint64_t draw_areas = 0x03;
inline constexpr std::uint64_t draw_units = 0x04;
inline constexpr std::uint64_t split = 0x05;
inline constexpr std::uint64_t tree = 0x06;
inline constexpr std::uint64_t permutation = 0x07;
inline constexpr std::uint64_t null_refit = 0x08;
inline constexpr std::uint64_t cv_fold = 0x09;
inline constexpr std::uint64_t chain = 0x0a;
inline constexpr std::uint64_t predictive = 0x0b;
inline constexpr std::uint64_t replicate = 0x0c;
inline constexpr std::uint64_t kfold = 0x0d;
inline constexpr std::uint64_t standin = 0x0e;
inline constexpr std::uint64_t method_tag = 0x0f;
}  // namespace stream

// xoshiro256++ with SplitMix64 seeding.  Self-contained so that results do
// not depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  Rng(std::uint64_t base, std::initializer_list<std::uint64_t> words)
      : Rng(derive_seed(base, words)) {}

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer on [0, n), unbiased (rejection on the top range).
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  // Standard normal via the Marsaglia polar method (spare value cached).
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
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Gamma(shape, scale) via Marsaglia-Tsang, boosted for shape < 1.
  double gamma(double shape, double scale) {
    if (shape <= 0.0 || scale <= 0.0)
      throw std::invalid_argument("gamma: shape and scale must be positive");
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return scale * d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return scale * d * v;
    }
  }

  // Inverse-gamma(shape, scale) with density proportional to
  // x^{-shape-1} exp(-scale/x).
  double inv_gamma(double shape, double scale) {
    return scale / gamma(shape, 1.0);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Fisher-Yates shuffle using our own Rng (std::shuffle's draw sequence is
// implementation-defined).
template <typename T>
void shuffle(std::vector<T>& values, Rng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_int(i));
    std::swap(values[i - 1], values[j]);
  }
}

// k distinct indices drawn without replacement from [0, n).
inline std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                           std::size_t k,
                                                           Rng& rng) {
  if (k > n)
    throw std::invalid_argument("sample_without_replacement: k exceeds n");
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace sae

#endif  // SAE_RNG_HPP
