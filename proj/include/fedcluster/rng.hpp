// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

namespace fedcluster {

/// Path component naming a stream. Build textual labels with `tag("name")`.
using Label = std::uint64_t;

/// FNV-1a hash of a string, used to turn readable names into path labels.
constexpr Label tag(std::string_view name) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Counter-based random stream.
///
/// The key is derived from (master seed, path) by chained 64-bit mixing; the
/// n-th draw is mix(key + (n + 1) * golden), i.e. a SplitMix64 sequence. Equal
/// (seed, path) pairs replay the same sequence; distinct paths give unrelated
/// keys. Satisfies UniformRandomBitGenerator, but the helpers below should be
/// preferred over <random> distributions, whose output is implementation-defined.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t key) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return next_u64(); }
  std::uint64_t next_u64() noexcept;

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() noexcept;
  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) noexcept;
  /// Unbiased integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) noexcept;
  /// Standard normal variate (Box-Muller, one draw pair per call).
  double normal() noexcept;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t position() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Stream keyed by (master_seed, path). Throws ConfigError on an empty path.
RngStream derive_stream(std::uint64_t master_seed, std::span<const Label> path);
RngStream derive_stream(std::uint64_t master_seed, std::initializer_list<Label> path);

/// In-place Fisher-Yates shuffle driven by `rng`.
template <typename T>
void shuffle(std::vector<T>& items, RngStream& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(rng.uniform_index(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace fedcluster
