#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace ssmctb {

/// xoshiro256** seeded through splitmix64. Every draw is defined bit-for-bit
/// so datasets and initializations reproduce across platforms:
///   uniform()  = (next() >> 11) * 2^-53
///   normal()   = Box-Muller, sqrt(-2 ln(1 - u1)) * cos(2 pi u2), one value per call
///   below(n)   = next() % n
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  double uniform();
  double uniform(double lo, double hi);
  double normal();
  double normal(double mean, double stddev);
  std::uint64_t below(std::uint64_t n);

  /// Fisher-Yates, iterating from the back.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);

/// Named sub-seed: splitmix64 applied to seed XOR FNV-1a-64(name).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);

}  // namespace ssmctb
