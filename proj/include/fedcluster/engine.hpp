// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedcluster/clustering.hpp"
#include "fedcluster/fedsets.hpp"
#include "fedcluster/num.hpp"
#include "fedcluster/tasks.hpp"

namespace fedcluster {

class ThreadPool;

enum class ScheduleKind { ConstantTheory, ConstantExplicit, InverseTime };

/// Learning rate as a function of (round j, cycle K, local step t).
///
/// ConstantTheory:   (T M E)^(-1/2)
/// ConstantExplicit: eta
/// InverseTime:      2 / (mu [(j M + K) E + t + gamma]),  gamma = max(8 L / mu, M E)
struct LrSchedule {
  ScheduleKind kind = ScheduleKind::ConstantExplicit;
  double eta = 0.01;
  double mu = 1.0;
  double smoothness = 1.0;
  int rounds = 1;
  int clusters = 1;
  int local_steps = 1;

  static LrSchedule constant_theory(int rounds, int clusters, int local_steps);
  static LrSchedule constant(double eta);
  static LrSchedule inverse_time(double mu, double smoothness, int clusters, int local_steps);

  double gamma() const;
  double value(int round, int cycle, int step) const;
};

double lr_value(const LrSchedule& schedule, int round, int cycle, int step);

std::string to_string(ScheduleKind kind);

enum class OptimizerKind { Sgd, SgdMomentum, Adam, FedProxSgd };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

struct LocalOptimizerSpec {
  OptimizerKind kind = OptimizerKind::Sgd;
  double momentum = 0.5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double mu_prox = 0.1;
  int batch = 1;

  /// Throws ConfigError for out-of-range hyperparameters.
  void validate(std::size_t min_device_samples) const;
};

/// Cluster activation order and sampled devices of one round.
/// sampled[K] lists (ascending) the devices of cluster order[K] trained in cycle K.
struct RoundPlan {
  std::vector<int> order;
  std::vector<std::vector<int>> sampled;
};

/// ceil(participation * cluster_size) with a small tolerance for representation error.
int sample_count(double participation, std::size_t cluster_size);

/// Per-round plan drawn from streams keyed by (seed, round). The permutation is
/// uniform when `reshuffle` is set and the identity otherwise; each cycle samples
/// devices of its cluster without replacement.
RoundPlan plan_round(int round, const Clustering& clustering, double participation, bool reshuffle,
                     std::uint64_t seed);

/// Per-step observation of a device's local training (used by trace hooks).
struct LocalStep {
  int step = 0;
  double lr = 0.0;
  ParamVector params;    // w_t before the update
  ParamVector gradient;  // stochastic gradient used at step t (proximal term included)
};

/// E optimizer steps from w_init on minibatches drawn uniformly with replacement
/// from the device's data. Optimizer state starts fresh. Throws DivergenceError
/// on non-finite parameters. When `trace` is non-null, every step is appended.
ParamVector local_train(const TaskModel& task, const DeviceDataset& device, const ParamVector& w_init,
                        int local_steps, const LrSchedule& schedule, int round, int cycle,
                        const LocalOptimizerSpec& opt, std::uint64_t seed,
                        std::vector<LocalStep>* trace = nullptr);

/// Weighted average of sampled cluster members.
///
/// Default: weights p_k / sum of sampled p_k. With `strict_weights`,
/// weights are p_k / q_K even when only part of the cluster was sampled.
/// Throws InternalError if members span more than one cluster.
ParamVector cluster_average(std::span<const std::pair<int, ParamVector>> members,
                            const Federation& fed, const Clustering& clustering,
                            bool strict_weights = false);

/// Everything the engine needs about the learning problem.
struct Problem {
  TaskModel task;
  Federation federation;
  Clustering clustering;
  ParamVector initial;
};

struct RunConfig {
  int rounds = 10;       // T
  int local_steps = 20;  // E
  double participation = 1.0;
  LrSchedule schedule;
  LocalOptimizerSpec optimizer;
  bool reshuffle = true;
  bool strict_weights = false;
  std::uint64_t seed = 1;
};

struct RoundRecord {
  int round = 0;
  long long cycle_count = 0;  // global updates completed before this round
  double train_loss = 0.0;
  double grad_sq_norm = 0.0;
  double lr = 0.0;
  long long elapsed_steps = 0;  // local steps per device completed before this round
  int max_activations = 0;      // highest per-device training count in this round
  double wall_ms = 0.0;
};

struct RunLog {
  std::vector<RoundRecord> records;
  ParamVector final_model;
  double final_loss = 0.0;
  double final_grad_sq_norm = 0.0;
};

/// Cycle-level trace: the model broadcast to the cluster, each sampled device's
/// local trajectory, and the averaged result. Invoked serially in cycle order.
struct CycleTrace {
  int round = 0;
  int cycle = 0;
  int cluster = 0;
  ParamVector broadcast;
  std::vector<int> devices;
  std::vector<std::vector<LocalStep>> steps;
  std::vector<ParamVector> local_models;
  ParamVector averaged;
};

struct RunOptions {
  std::size_t threads = 1;
  ThreadPool* pool = nullptr;  // used instead of `threads` when set
  std::function<void(const CycleTrace&)> on_cycle;
  /// Records at round starts W_{jM}; set to capture the checkpoints.
  std::vector<ParamVector>* checkpoints = nullptr;
};

/// FedCluster with local training: T rounds of M cycles over the clustering.
RunLog run(const Problem& problem, const RunConfig& cfg, const RunOptions& options = {});

/// FedAvg: `run` with one cluster holding every device.
RunLog run_fedavg(const Problem& problem, const RunConfig& cfg, const RunOptions& options = {});

}  // namespace fedcluster
