#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "fscil/error.hpp"

namespace fscil {

// Deterministic 64-bit generator (splitmix64). The same seed produces the
// same sequence on every platform, and the state is a single u64, so it
// checkpoints and resumes exactly. Standard-library distributions are
// deliberately not used anywhere: their output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // uniform in [0,1), 53-bit resolution
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // uniform in the open interval (0,1)
  double open_unit() {
    double u = next_double();
    while (u == 0.0) u = next_double();
    return u;
  }

  double uniform(double lo, double hi) {
    if (!(lo <= hi)) throw InvalidInput("uniform: lo > hi");
    return lo + (hi - lo) * next_double();
  }

  // unbiased integer in [0, n) via rejection sampling
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw InvalidInput("below: n must be positive");
    const std::uint64_t rem = (~n + 1) % n;  // 2^64 mod n
    std::uint64_t x = next_u64();
    while (x < rem) x = next_u64();
    return x % n;
  }

  // Fisher-Yates
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(below(i))]);
    }
  }

  // Independent child stream; does not advance this generator. Children with
  // distinct tags (or chained tags) are decorrelated by a mix round.
  Rng derive(std::uint64_t tag) const {
    Rng child(state_ ^ (0xBF58476D1CE4E5B9ULL * (tag + 0x9E3779B97F4A7C15ULL)));
    child.next_u64();
    return child;
  }

  std::uint64_t state() const { return state_; }
  void restore(std::uint64_t s) { state_ = s; }

  friend bool operator==(const Rng& a, const Rng& b) = default;

 private:
  std::uint64_t state_;
};

}  // namespace fscil
