// rng.hpp
// Philox4x32-10 counter-based generator with stream splitting.
//
// A generator is identified by (seed, stream). The 128-bit Philox counter is
// (stream, draw index), so stream s of seed k yields the same sequence no
// matter how many other streams were consumed or in which order. Parallel
// trials use stream = trial index.

#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace qperm {

class Philox {
 public:
  using result_type = std::uint32_t;

  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (pos_ == 4) {
      block_ = generate(counter_++);
      pos_ = 0;
    }
    return block_[pos_++];
  }

  std::uint64_t next_u64() {
    std::uint64_t hi = (*this)();
    return (hi << 32) | (*this)();
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, bound) by rejection (no modulo bias).
  std::uint64_t below(std::uint64_t bound);

  // Independent generator for a child stream.
  Philox split(std::uint64_t child) const { return Philox(seed_ ^ (0x9E3779B97F4A7C15ULL * (stream_ + 1)), child); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::array<std::uint32_t, 4> generate(std::uint64_t index) const;

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int pos_ = 4;
};

// Standard normal via Box-Muller (portable, unlike std::normal_distribution).
double standard_normal(Philox& rng);

}  // namespace qperm
