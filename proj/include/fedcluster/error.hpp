// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fedcluster {

// Invalid configuration or precondition violation detected before or during a run.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. `offset` is the byte position where parsing failed.
class IngestError : public std::runtime_error {
 public:
  IngestError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class UnsupportedTaskError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite parameters or losses. Device and step are -1 when the failure was
// detected outside local training (e.g. in round metrics).
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int round, int cycle, int device, int step)
      : std::runtime_error("divergence: non-finite value at round " + std::to_string(round) +
                           ", cycle " + std::to_string(cycle) + ", device " +
                           std::to_string(device) + ", step " + std::to_string(step)),
        round_(round), cycle_(cycle), device_(device), step_(step) {}

  int round() const noexcept { return round_; }
  int cycle() const noexcept { return cycle_; }
  int device() const noexcept { return device_; }
  int step() const noexcept { return step_; }

 private:
  int round_, cycle_, device_, step_;
};

// Broken internal invariant; indicates a bug rather than bad input.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace fedcluster
