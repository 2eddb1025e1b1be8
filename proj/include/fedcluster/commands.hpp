// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedcluster/config.hpp"
#include "fedcluster/engine.hpp"
#include "fedcluster/verify.hpp"

namespace fedcluster {

/// Stable process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitIo = 1,
  kExitConfig = 2,
  kExitDivergence = 3,
  kExitVerifyFailed = 4,
};

struct CommandContext {
  std::optional<std::filesystem::path> out_dir;  // overrides output.dir
  std::size_t threads = 1;
  std::vector<std::uint64_t> seeds;  // overrides seed (run) or the seed axis (sweep)
  std::ostream* out = nullptr;       // stdout when null
  std::ostream* err = nullptr;       // stderr when null
};

/// Maps the error hierarchy onto exit codes: IoError and IngestError -> 1,
/// ConfigError and UnsupportedTaskError -> 2, DivergenceError -> 3, anything else -> 1.
int exit_code_for(const std::exception& e);

/// Runs `body` and converts a thrown exception into its exit code, printing the message to `err`.
int guarded(const std::function<int()>& body, std::ostream& err);

/// Everything produced by one configured run.
struct RunOutcome {
  std::string run_id;
  RunLog log;
  nlohmann::json summary;
};

/// Builds the problem from `cfg`, runs it and computes the analysis summary
/// (constants, heterogeneity, bounds, rounds to target). Throws on failure.
RunOutcome execute(const ExperimentConfig& cfg, std::size_t threads);

/// Writes metrics.csv, summary.json and config.resolved.json into `dir`.
void write_run_directory(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                         const RunOutcome& outcome);

int cmd_run(const std::filesystem::path& config_path, const CommandContext& ctx);
int cmd_sweep(const std::filesystem::path& config_path, const CommandContext& ctx);
int cmd_hetero(const std::filesystem::path& config_path, const CommandContext& ctx);
/// Writes the JSON report to `json_path` when set and to stdout otherwise.
int cmd_verify(const VerifyOptions& options, const std::optional<std::filesystem::path>& json_path,
               const CommandContext& ctx);
int cmd_plot(const std::vector<std::filesystem::path>& csv_paths,
             const std::filesystem::path& out_svg, const std::string& x_field,
             const std::string& y_field, bool log_y, const CommandContext& ctx);

/// Expands the sweep section into one config per cell, FedAvg baselines included
/// when requested. Cell run ids are unique.
std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& cfg,
                                           const std::vector<std::uint64_t>& seed_override = {});

}  // namespace fedcluster
