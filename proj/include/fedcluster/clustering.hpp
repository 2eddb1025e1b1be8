// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedcluster/fedsets.hpp"
#include "fedcluster/num.hpp"
#include "fedcluster/tasks.hpp"

namespace fedcluster {

/// Partition of devices into M clusters with weights q_K = sum of member p_k.
class Clustering {
 public:
  /// Validates that `assignment` is total over [0, M) with every cluster non-empty.
  Clustering(std::vector<int> assignment, int clusters, const Federation& fed);

  int clusters() const noexcept { return clusters_; }
  int cluster_of(int device) const { return assignment_.at(device); }
  const std::vector<int>& assignment() const noexcept { return assignment_; }
  /// Member device ids of cluster K in ascending order.
  const std::vector<int>& members(int cluster) const { return members_.at(cluster); }
  double weight(int cluster) const { return q_.at(cluster); }
  const std::vector<double>& weights() const noexcept { return q_; }

 private:
  std::vector<int> assignment_;
  int clusters_;
  std::vector<std::vector<int>> members_;
  std::vector<double> q_;
};

enum class ClusterStrategy { RandomUniform, MajorClass, Singleton };

std::string to_string(ClusterStrategy s);
ClusterStrategy cluster_strategy_from_string(const std::string& name);

struct ClusterPlanConfig {
  ClusterStrategy strategy = ClusterStrategy::RandomUniform;
  int clusters = 10;
  double rho_cluster = 0.5;
  std::uint64_t seed = 1;
};

/// Equal-size clusters from a seeded uniform shuffle. Requires M | n.
Clustering cluster_random_uniform(const Federation& fed, int clusters, std::uint64_t seed);

/// Cluster K is built around major class K: round(rho * n/M) devices with that
/// major class, the remaining slots spread over the other classes with the
/// remainder rotated through classes K+1, K+2, ... (mod n_classes). Throws
/// ConfigError naming the class whose devices cannot cover the demand.
Clustering cluster_major_class(const Federation& fed, int clusters, double rho_cluster,
                               std::uint64_t seed);

/// Every device is its own cluster.
Clustering cluster_singleton(const Federation& fed);

/// A single cluster containing the whole federation (FedAvg).
Clustering cluster_all(const Federation& fed);

Clustering make_clustering(const Federation& fed, const ClusterPlanConfig& cfg);

/// Per-class device-count demand of the major-class strategy, [cluster][class].
std::vector<std::vector<int>> major_class_demand(int n_devices, int n_classes, int clusters,
                                                 double rho_cluster);

// ---------------------------------------------------------------------------
// Global objective over a federation.

double global_loss(const TaskModel& task, const Federation& fed, const ParamVector& w);
ParamVector global_grad(const TaskModel& task, const Federation& fed, const ParamVector& w);
/// Per-device full gradients, index-aligned with fed.devices.
std::vector<ParamVector> device_grads(const TaskModel& task, const Federation& fed,
                                      const ParamVector& w);

// ---------------------------------------------------------------------------
// Quadratic closed forms.

/// Minimizers and minimum values of the global, per-device and per-cluster
/// objectives of a QuadraticMean federation.
struct AnalyticSolution {
  ParamVector w_star;
  double f_star = 0.0;
  std::vector<double> per_device_f_star;
  std::vector<double> per_cluster_f_star;
};

/// Throws UnsupportedTaskError unless task.kind is QuadraticMean.
AnalyticSolution quadratic_analytic(const TaskModel& task, const Federation& fed,
                                    const Clustering& clustering);

// ---------------------------------------------------------------------------
// Heterogeneity.

struct HeterogeneityReport {
  double h_device = 0.0;
  double h_cluster = 0.0;
  std::optional<double> gamma_device;
  std::optional<double> gamma_cluster;
  std::vector<ParamVector> probe_points;
};

/// Weighted gradient dissimilarity at device and cluster level, maximized over
/// the probe points. Exact for QuadraticMean, where the summand does not depend on w.
HeterogeneityReport estimate_H(const TaskModel& task, const Federation& fed,
                               const Clustering& clustering, std::span<const ParamVector> probes);

struct GammaPair {
  double device = 0.0;
  double cluster = 0.0;
};

/// Gap between the global minimum and the weighted per-device / per-cluster minima.
GammaPair estimate_Gamma(const TaskModel& task, const Federation& fed, const Clustering& clustering);

/// `center` followed by `count` points drawn uniformly from the cube of half-width `radius`.
std::vector<ParamVector> default_probes(const ParamVector& center, int count, double radius,
                                        std::uint64_t seed);

}  // namespace fedcluster
