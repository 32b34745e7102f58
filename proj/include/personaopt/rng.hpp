#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace personaopt {

// All randomness in the engine is derived from one base seed. Each consumer
// asks for a sub-seed named by purpose plus a few integer coordinates, e.g.
//
//   derive_seed(seed, "split", trait_index)
//   derive_seed(seed, "questions", step)
//   derive_seed(seed, "candidate", step, j)
//
// The derivation is a fixed function (FNV-1a over the purpose string, then
// SplitMix64 mixing of every coordinate) so results are identical across
// platforms and standard libraries.
std::uint64_t derive_seed(std::uint64_t base, std::string_view purpose,
                          std::initializer_list<std::uint64_t> coords = {});

// Same as derive_seed, but the coordinate is a string (item ids, model names).
std::uint64_t derive_seed(std::uint64_t base, std::string_view purpose,
                          std::string_view key);

std::uint64_t fnv1a64(std::string_view text);
std::uint64_t splitmix64(std::uint64_t x);

// Portable PRNG (xoshiro256**). std::uniform_int_distribution and std::shuffle
// are implementation-defined, so the engine never uses them for anything that
// must be reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t uniform(std::uint64_t bound);
  // Uniform double in [0, 1).
  double uniform_real();

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform(i));
      using std::swap;
      swap(values[i - 1], values[j]);
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& values) {
    shuffle(std::span<T>(values));
  }

  // k distinct indices from [0, n), in draw order. k <= n.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

 private:
  std::uint64_t state_[4];
};

}  // namespace personaopt
