// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#include "fedcluster/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedcluster/error.hpp"
#include "fedcluster/rng.hpp"

namespace fedcluster {

Clustering::Clustering(std::vector<int> assignment, int clusters, const Federation& fed)
    : assignment_(std::move(assignment)), clusters_(clusters) {
  if (clusters_ < 1) throw ConfigError("clustering.M must be at least 1");
  if (assignment_.size() != fed.size())
    throw ConfigError("clustering: assignment covers " + std::to_string(assignment_.size()) +
                      " devices but the federation has " + std::to_string(fed.size()));
  members_.assign(clusters_, {});
  q_.assign(clusters_, 0.0);
  for (std::size_t k = 0; k < assignment_.size(); ++k) {
    const int c = assignment_[k];
    if (c < 0 || c >= clusters_)
      throw ConfigError("clustering: device " + std::to_string(k) + " assigned to cluster " +
                        std::to_string(c) + " outside [0, " + std::to_string(clusters_) + ")");
    members_[c].push_back(static_cast<int>(k));
    q_[c] += fed.devices[k].weight;
  }
  for (int c = 0; c < clusters_; ++c)
    if (members_[c].empty()) throw ConfigError("clustering: cluster " + std::to_string(c) + " is empty");
  // The p_k sum to one by construction; drop the summation residue.
  if (clusters_ == 1) q_[0] = 1.0;
}

std::string to_string(ClusterStrategy s) {
  switch (s) {
    case ClusterStrategy::RandomUniform: return "random_uniform";
    case ClusterStrategy::MajorClass: return "major_class";
    case ClusterStrategy::Singleton: return "singleton";
  }
  return "unknown";
}

ClusterStrategy cluster_strategy_from_string(const std::string& name) {
  if (name == "random_uniform") return ClusterStrategy::RandomUniform;
  if (name == "major_class") return ClusterStrategy::MajorClass;
  if (name == "singleton") return ClusterStrategy::Singleton;
  throw ConfigError("clustering.strategy: unknown strategy '" + name +
                    "' (expected random_uniform, major_class or singleton)");
}

Clustering cluster_random_uniform(const Federation& fed, int clusters, std::uint64_t seed) {
  const int n = static_cast<int>(fed.size());
  if (clusters < 1) throw ConfigError("clustering.M must be at least 1");
  if (n % clusters != 0)
    throw ConfigError("clustering.M (" + std::to_string(clusters) +
                      ") must divide the number of devices (" + std::to_string(n) + ")");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  RngStream rng = derive_stream(seed, {tag("cluster"), tag("random_uniform")});
  shuffle(order, rng);
  const int size = n / clusters;
  std::vector<int> assignment(n);
  for (int i = 0; i < n; ++i) assignment[order[i]] = i / size;
  return Clustering(std::move(assignment), clusters, fed);
}

std::vector<std::vector<int>> major_class_demand(int n_devices, int n_classes, int clusters,
                                                 double rho_cluster) {
  if (clusters < 1) throw ConfigError("clustering.M must be at least 1");
  if (clusters > n_classes)
    throw ConfigError("clustering.M (" + std::to_string(clusters) +
                      ") must not exceed the number of classes (" + std::to_string(n_classes) +
                      ") for major_class clustering");
  if (n_devices % clusters != 0)
    throw ConfigError("clustering.M (" + std::to_string(clusters) +
                      ") must divide the number of devices (" + std::to_string(n_devices) + ")");
  if (!(rho_cluster >= 0.0 && rho_cluster <= 1.0))
    throw ConfigError("clustering.rho_cluster must lie in [0, 1]");
  const int slots = n_devices / clusters;
  const int own = static_cast<int>(std::lround(rho_cluster * slots));
  const int rest = slots - own;
  std::vector<std::vector<int>> demand(clusters, std::vector<int>(n_classes, 0));
  for (int K = 0; K < clusters; ++K) {
    demand[K][K] = own;
    if (n_classes == 1) {
      demand[K][K] = slots;
      continue;
    }
    const int others = n_classes - 1;
    const int base = rest / others;
    const int extra = rest % others;
    for (int r = 0; r < others; ++r) {
      const int c = (K + 1 + r) % n_classes;
      demand[K][c] = base + (r < extra ? 1 : 0);
    }
  }
  return demand;
}

Clustering cluster_major_class(const Federation& fed, int clusters, double rho_cluster,
                               std::uint64_t seed) {
  const int n = static_cast<int>(fed.size());
  const int n_classes = fed.n_classes;
  const auto demand = major_class_demand(n, n_classes, clusters, rho_cluster);

  std::vector<std::vector<int>> by_class(n_classes);
  for (const auto& d : fed.devices) {
    if (d.major_class < 0 || d.major_class >= n_classes)
      throw ConfigError("clustering: device " + std::to_string(d.device_id) +
                        " has no valid major class");
    by_class[d.major_class].push_back(d.device_id);
  }
  for (int c = 0; c < n_classes; ++c) {
    int need = 0;
    for (int K = 0; K < clusters; ++K) need += demand[K][c];
    const int have = static_cast<int>(by_class[c].size());
    if (need != have)
      throw ConfigError("clustering: major class " + std::to_string(c) + " has " +
                        std::to_string(have) + " devices but rho_cluster=" +
                        std::to_string(rho_cluster) + " with M=" + std::to_string(clusters) +
                        " requires " + std::to_string(need));
    RngStream rng = derive_stream(seed, {tag("cluster"), tag("major_class"), static_cast<Label>(c)});
    shuffle(by_class[c], rng);
  }

  std::vector<int> assignment(n, -1);
  std::vector<std::size_t> cursor(n_classes, 0);
  for (int K = 0; K < clusters; ++K)
    for (int c = 0; c < n_classes; ++c)
      for (int i = 0; i < demand[K][c]; ++i) assignment[by_class[c][cursor[c]++]] = K;
  return Clustering(std::move(assignment), clusters, fed);
}

Clustering cluster_singleton(const Federation& fed) {
  std::vector<int> assignment(fed.size());
  std::iota(assignment.begin(), assignment.end(), 0);
  return Clustering(std::move(assignment), static_cast<int>(fed.size()), fed);
}

Clustering cluster_all(const Federation& fed) {
  return Clustering(std::vector<int>(fed.size(), 0), 1, fed);
}

Clustering make_clustering(const Federation& fed, const ClusterPlanConfig& cfg) {
  switch (cfg.strategy) {
    case ClusterStrategy::RandomUniform: return cluster_random_uniform(fed, cfg.clusters, cfg.seed);
    case ClusterStrategy::MajorClass:
      return cluster_major_class(fed, cfg.clusters, cfg.rho_cluster, cfg.seed);
    case ClusterStrategy::Singleton: return cluster_singleton(fed);
  }
  throw ConfigError("clustering.strategy: unsupported");
}

double global_loss(const TaskModel& task, const Federation& fed, const ParamVector& w) {
  double s = 0.0;
  for (const auto& d : fed.devices) s += d.weight * dataset_loss(task, w, d.samples);
  return s;
}

ParamVector global_grad(const TaskModel& task, const Federation& fed, const ParamVector& w) {
  ParamVector g(w.dim());
  for (const auto& d : fed.devices) axpy(d.weight, dataset_grad(task, w, d.samples), g);
  return g;
}

std::vector<ParamVector> device_grads(const TaskModel& task, const Federation& fed,
                                      const ParamVector& w) {
  std::vector<ParamVector> out;
  out.reserve(fed.size());
  for (const auto& d : fed.devices) out.push_back(dataset_grad(task, w, d.samples));
  return out;
}

AnalyticSolution quadratic_analytic(const TaskModel& task, const Federation& fed,
                                    const Clustering& clustering) {
  if (task.kind != TaskKind::QuadraticMean)
    throw UnsupportedTaskError("closed-form minimizers exist only for the quadratic task, not '" +
                               to_string(task.kind) + "'");
  const std::size_t d = task.feature_dim;
  const std::size_t n = fed.size();

  // f(w; D_k) = 0.5 |w - mean_k|^2 + 0.5 spread_k
  std::vector<ParamVector> mean(n, ParamVector(d));
  std::vector<double> spread(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& samples = fed.devices[k].samples;
    if (samples.empty()) throw ConfigError("quadratic_analytic: device without samples");
    for (const auto& xi : samples)
      for (std::size_t i = 0; i < d; ++i) mean[k][i] += xi.features[i];
    for (std::size_t i = 0; i < d; ++i) mean[k][i] /= static_cast<double>(samples.size());
    for (const auto& xi : samples)
      for (std::size_t i = 0; i < d; ++i) {
        const double r = xi.features[i] - mean[k][i];
        spread[k] += r * r;
      }
    spread[k] /= static_cast<double>(samples.size());
  }

  // Minimizer and minimum of sum_k a_k f(w; D_k) with sum_k a_k = 1 over `members`.
  auto solve = [&](const std::vector<int>& members, const std::vector<double>& coeff) {
    ParamVector center(d);
    for (std::size_t m = 0; m < members.size(); ++m) axpy(coeff[m], mean[members[m]], center);
    double value = 0.0;
    for (std::size_t m = 0; m < members.size(); ++m) {
      const int k = members[m];
      value += coeff[m] * 0.5 * (sq_norm(center - mean[k]) + spread[k]);
    }
    return std::pair{center, value};
  };

  AnalyticSolution sol;
  std::vector<int> everyone(n);
  std::iota(everyone.begin(), everyone.end(), 0);
  auto [w_star, f_star] = solve(everyone, fed.weights());
  sol.w_star = std::move(w_star);
  sol.f_star = f_star;
  sol.per_device_f_star.resize(n);
  for (std::size_t k = 0; k < n; ++k) sol.per_device_f_star[k] = 0.5 * spread[k];
  for (int K = 0; K < clustering.clusters(); ++K) {
    const auto& members = clustering.members(K);
    std::vector<double> coeff;
    for (int k : members) coeff.push_back(fed.devices[k].weight / clustering.weight(K));
    sol.per_cluster_f_star.push_back(solve(members, coeff).second);
  }
  return sol;
}

HeterogeneityReport estimate_H(const TaskModel& task, const Federation& fed,
                               const Clustering& clustering, std::span<const ParamVector> probes) {
  if (probes.empty()) throw ConfigError("estimate_H: probe set is empty");
  HeterogeneityReport report;
  report.probe_points.assign(probes.begin(), probes.end());
  for (const ParamVector& w : probes) {
    const auto grads = device_grads(task, fed, w);
    ParamVector global(w.dim());
    for (std::size_t k = 0; k < grads.size(); ++k) axpy(fed.devices[k].weight, grads[k], global);

    double h_device = 0.0;
    for (std::size_t k = 0; k < grads.size(); ++k)
      h_device += fed.devices[k].weight * sq_norm(grads[k] - global);

    double h_cluster = 0.0;
    for (int K = 0; K < clustering.clusters(); ++K) {
      // A cluster holding every device has the global gradient exactly (q = 1).
      if (clustering.members(K).size() == fed.size()) continue;
      ParamVector cluster_grad(w.dim());
      for (int k : clustering.members(K)) axpy(fed.devices[k].weight, grads[k], cluster_grad);
      const double q = clustering.weight(K);
      for (double& v : cluster_grad.values()) v /= q;
      h_cluster += q * sq_norm(cluster_grad - global);
    }
    report.h_device = std::max(report.h_device, h_device);
    report.h_cluster = std::max(report.h_cluster, h_cluster);
  }
  return report;
}

GammaPair estimate_Gamma(const TaskModel& task, const Federation& fed, const Clustering& clustering) {
  const AnalyticSolution sol = quadratic_analytic(task, fed, clustering);
  GammaPair g;
  g.device = sol.f_star;
  for (std::size_t k = 0; k < fed.size(); ++k) g.device -= fed.devices[k].weight * sol.per_device_f_star[k];
  g.cluster = sol.f_star;
  for (int K = 0; K < clustering.clusters(); ++K)
    g.cluster -= clustering.weight(K) * sol.per_cluster_f_star[K];
  return g;
}

std::vector<ParamVector> default_probes(const ParamVector& center, int count, double radius,
                                        std::uint64_t seed) {
  std::vector<ParamVector> probes{center};
  RngStream rng = derive_stream(seed, {tag("probes")});
  for (int i = 0; i < count; ++i) {
    ParamVector p = center;
    for (double& v : p.values()) v += rng.uniform(-radius, radius);
    probes.push_back(std::move(p));
  }
  return probes;
}

}  // namespace fedcluster
