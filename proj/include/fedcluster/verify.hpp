// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "fedcluster/engine.hpp"

namespace fedcluster {

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;  // failure description, empty on success
  double seconds = 0.0;
};

struct VerifyOptions {
  /// Faults to inject for the duration of the suite, e.g. "quadratic-grad-sign".
  std::vector<std::string> faults;
  std::size_t threads = 2;
};

/// Fault names accepted by VerifyOptions::faults.
std::vector<std::string> known_faults();

/// Runs the property battery. Throws ConfigError on an unknown fault name.
/// Exceptions thrown by a property are reported as its failure.
std::vector<PropertyResult> run_verify_suite(const VerifyOptions& options);

nlohmann::json verify_report_json(const std::vector<PropertyResult>& results,
                                  const VerifyOptions& options);

/// True when both logs agree on every field except wall_ms, bit for bit.
bool same_trajectory(const RunLog& a, const RunLog& b);

}  // namespace fedcluster
