// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace rhnlm {

// Counter-based generator: output i of stream s under seed k is a pure
// function of (k, s, i). Two generators built from the same (seed, stream)
// produce the same sequence, and draws from different streams never
// interact, so the order in which streams are consumed does not matter.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  // Independent child stream; does not advance this generator.
  Rng split(std::uint64_t substream) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }
  void set_counter(std::uint64_t c) { counter_ = c; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

// Stable 64-bit FNV-1a hash, used to derive stream ids from tensor names.
std::uint64_t stable_hash(const char* text);

}  // namespace rhnlm
