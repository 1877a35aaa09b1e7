// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

// Portable random streams. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; the distributions below are written out
// so that draws do not depend on the standard library implementation.

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mofe {

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view s);
// Seed for a sub-stream identified by (seed, key), e.g. a record id.
std::uint64_t stream_seed(std::uint64_t seed, std::string_view key);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();  // Box-Muller, standard normal
  bool coin() { return (engine_() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0;
};

}  // namespace mofe
