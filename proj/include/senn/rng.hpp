#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <random>

namespace senn {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Every random consumer in a run draws from its own sub-seed:
//   derive_seed(master, consumer, epoch[, index])
// so adding or reordering consumers never perturbs the others.
enum class SeedConsumer : std::uint64_t {
  topology_init = 1,
  batch_shuffle = 2,
  evolution = 3,
  dropout = 4,
  synthetic_data = 5,
  dataset_split = 6,
  subsample = 7,
};

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                    std::uint64_t b = 0, std::uint64_t c = 0) {
  return splitmix64(splitmix64(splitmix64(splitmix64(master) + a) + b) + c);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, SeedConsumer consumer,
                                    std::uint64_t b = 0, std::uint64_t c = 0) {
  return derive_seed(master, static_cast<std::uint64_t>(consumer), b, c);
}

// mt19937_64 with fixed-recipe draws. The recipes (not the standard library's
// distributions, whose algorithms are unspecified) make every sequence
// reproducible across platforms and library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform_in(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform in [0, n), rejection sampled so there is no modulo bias
  std::uint64_t uniform_index(std::uint64_t n) {
    assert(n > 0);
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t x = engine_();
      if (x >= threshold) return x % n;
    }
  }

  // standard normal via Box-Muller
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));  // u1 < 1, so finite
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace senn
