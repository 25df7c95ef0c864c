#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "marc/tensor.hpp"

namespace marc {

/// splitmix64 generator. Chosen over the platform default so datasets and
/// weights reproduce bit-for-bit across compilers and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform draw in [lo, hi); degenerate lo == hi returns lo.
  double uniform(double lo, double hi) {
    if (lo > hi) throw std::invalid_argument("rng: lo > hi");
    const double u = static_cast<double>(next() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

  /// Uniform integer in [0, n).
  Index below(Index n) {
    if (n <= 0) throw std::invalid_argument("rng: below(n) needs n > 0");
    return static_cast<Index>(
        (static_cast<unsigned __int128>(next()) * static_cast<std::uint64_t>(n)) >> 64);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (Index i = static_cast<Index>(v.size()) - 1; i > 0; --i) {
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(below(i + 1))]);
    }
  }

  /// Independent stream derived from a base seed; draws never overlap the
  /// parent's for distinct stream ids.
  static Rng derived(std::uint64_t seed, std::uint64_t stream) {
    Rng mix(seed);
    mix.state_ ^= 0xd1342543de82ef95ULL * (stream + 1);
    mix.state_ = mix.next();
    return mix;
  }

 private:
  std::uint64_t state_;
};

}  // namespace marc
