#pragma once

#include <cstdint>
#include <vector>

namespace unirel {

// splitmix64-seeded xoshiro256** with hand-rolled distributions, so that
// sequences are identical across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // uniform in [0, 1)
  double next_double();

  // uniform in [lo, hi)
  double uniform(double lo, double hi);

  // uniform integer in [0, n), n >= 1
  std::uint64_t uniform_int(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t s_[4];
};

}  // namespace unirel
