// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedcluster/clustering.hpp"
#include "fedcluster/engine.hpp"
#include "fedcluster/fedsets.hpp"
#include "fedcluster/tasks.hpp"

namespace fedcluster {

enum class Algorithm { FedCluster, FedAvg };

std::string to_string(Algorithm a);

struct DataSection {
  std::string source = "synthetic";  // synthetic | idx | inline
  int n_classes = 10;
  int feature_dim = 20;
  int samples_per_class = 600;
  double spread = 2.0;
  std::string images;  // idx only
  std::string labels;  // idx only
  std::vector<std::vector<Sample>> devices;  // inline only, one entry per device
};

struct ScheduleSection {
  ScheduleKind kind = ScheduleKind::ConstantExplicit;
  double eta = 0.1;
  bool scale_with_clusters = true;  // constant schedule uses eta / M
  double mu = 1.0;
  double smoothness = 1.0;
};

struct AnalysisSection {
  int probes = 16;
  double radius = 1.0;
  int samples_per_probe = 16;
  double target_fraction = 0.6;
};

struct SweepSection {
  std::vector<int> clusters;
  std::vector<double> rho_device;
  std::vector<double> rho_cluster;
  std::vector<LocalOptimizerSpec> optimizers;
  std::vector<std::uint64_t> seeds;
  bool include_fedavg = false;
};

/// File form of a run: everything needed to rebuild the problem and the
/// RunConfig bit-exactly.
struct ExperimentConfig {
  Algorithm algorithm = Algorithm::FedCluster;
  std::uint64_t seed = 1;
  TaskKind task = TaskKind::SoftmaxRegression;
  int hidden = 32;
  DataSection data;
  PartitionConfig partition;  // partition.seed mirrors `seed`
  ClusterStrategy strategy = ClusterStrategy::RandomUniform;
  int clusters = 10;
  double rho_cluster = 0.5;
  int rounds = 50;
  int local_steps = 20;
  double participation = 0.1;
  bool reshuffle = true;
  bool strict_weights = false;
  ScheduleSection schedule;
  LocalOptimizerSpec optimizer;
  AnalysisSection analysis;
  std::optional<SweepSection> sweep;
  std::string output_dir = "out";
  std::string run_id;  // derived from the algorithm and seed when empty
  std::string comment;
};

/// Validates and converts a parsed JSON document. Unknown keys and out-of-range
/// values raise ConfigError naming the offending key.
ExperimentConfig parse_config(const nlohmann::json& doc);

/// Reads a config file. Relative idx paths are resolved against the file's directory.
/// Throws IoError when unreadable and ConfigError on malformed JSON.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Fully resolved config with every field explicit; parse_config inverts it exactly.
nlohmann::json to_json(const ExperimentConfig& cfg);

std::string effective_run_id(const ExperimentConfig& cfg);

Federation build_federation(const ExperimentConfig& cfg);
TaskModel build_task(const ExperimentConfig& cfg, const Federation& fed);
/// Clustering used by the run: the configured strategy for FedCluster, one cluster for FedAvg.
Clustering build_clustering(const ExperimentConfig& cfg, const Federation& fed);
Problem build_problem(const ExperimentConfig& cfg);
/// Schedule values depend on the effective cluster count (1 for FedAvg).
RunConfig build_run_config(const ExperimentConfig& cfg, int effective_clusters);

}  // namespace fedcluster
