// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#include "fedcluster/rng.hpp"

#include <cmath>
#include <numbers>

#include "fedcluster/error.hpp"

namespace fedcluster {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// Stafford variant 13, the SplitMix64 output function.
constexpr std::uint64_t mix_stafford(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// MurmurHash3 finalizer; used for key chaining so that key derivation and the
// output function do not share a mixer.
constexpr std::uint64_t mix_murmur(std::uint64_t z) noexcept {
  z ^= z >> 33;
  z *= 0xFF51AFD7ED558CCDULL;
  z ^= z >> 33;
  z *= 0xC4CEB9FE1A85EC53ULL;
  z ^= z >> 33;
  return z;
}

}  // namespace

std::uint64_t RngStream::next_u64() noexcept {
  ++counter_;
  return mix_stafford(key_ + counter_ * kGolden);
}

double RngStream::uniform01() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(); }

std::uint64_t RngStream::uniform_index(std::uint64_t n) noexcept {
  // Lemire's multiply-shift with rejection.
  std::uint64_t x = next_u64();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = -n % n;
    while (low < threshold) {
      x = next_u64();
      m = static_cast<__uint128_t>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double RngStream::normal() noexcept {
  double u1 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

RngStream derive_stream(std::uint64_t master_seed, std::span<const Label> path) {
  if (path.empty()) throw ConfigError("derive_stream: path must be non-empty");
  std::uint64_t key = mix_murmur(master_seed ^ 0x6A09E667F3BCC909ULL);
  std::uint64_t position = 0;
  for (Label label : path) {
    ++position;
    key = mix_murmur(key ^ mix_stafford(label + position * kGolden));
  }
  return RngStream(key);
}

RngStream derive_stream(std::uint64_t master_seed, std::initializer_list<Label> path) {
  return derive_stream(master_seed, std::span<const Label>(path.begin(), path.size()));
}

}  // namespace fedcluster
