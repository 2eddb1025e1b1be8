// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedcluster/clustering.hpp"
#include "fedcluster/engine.hpp"

namespace fedcluster {

/// Problem constants consumed by the convergence bounds.
struct BoundInputs {
  double smoothness = 1.0;        // L
  std::optional<double> mu;       // strong convexity, when applicable
  double g_sq = 0.0;              // G^2
  std::vector<double> s_sq;       // per-device stochastic-gradient variance bounds s_k^2
  std::vector<double> p;          // device weights
  std::vector<int> cluster_of;    // device -> cluster
  std::vector<double> q;          // cluster weights
  double h_cluster = 0.0;
  std::optional<double> gamma_cluster;
  double f0_gap = 0.0;            // f(W_0) - inf f
  int rounds = 1;                 // T
  int clusters = 1;               // M
  int local_steps = 1;            // E

  /// Fills p, cluster_of and q from a federation and clustering.
  void set_partition(const Federation& fed, const Clustering& clustering);
};

/// sum_K q_K^{-1} sum_{k in S_K} p_k^2 s_k^2
double local_variance_term(const BoundInputs& in);

struct NonconvexBound {
  double c = 0.0;
  double bound = 0.0;
};

/// C = 2 f0_gap + 4 L (H_cluster + variance term); bound on the average squared
/// gradient norm = 2 C / sqrt(T M E).
NonconvexBound bound_nonconvex(const BoundInputs& in);

struct StronglyConvexBound {
  double gamma = 0.0;
  double b = 0.0;
  double bound = 0.0;
};

/// gamma = max(8 L / mu, M E);
/// B = (4 E M + 0.75 E^2) G^2 + 4 L Gamma_cluster + variance term;
/// bound on f(W_TM) - f* = L (gamma G^2 + 4 B) / (2 mu^2 T M E).
/// Throws UnsupportedTaskError when mu is absent; Gamma_cluster defaults to 0.
StronglyConvexBound bound_strongly_convex(const BoundInputs& in);

/// Rounds sufficient for an epsilon-stationary average: 4 C^2 / (eps^2 M E).
double required_rounds(const BoundInputs& in, double epsilon);

/// Precondition warnings for the constant (TME)^{-1/2} schedule: M E <= C / (8 L G^2)
/// and T >= L^2 max(1, 16 / (E M)).
std::vector<std::string> nonconvex_precondition_warnings(const BoundInputs& in);

struct ConstantEstimates {
  double l_hat = 0.0;
  double g_hat = 0.0;     // sqrt of g_sq_hat
  double g_sq_hat = 0.0;  // largest sampled stochastic-gradient squared norm
  std::vector<double> s_sq_hat;
};

/// Empirical lower estimates of L, G and s_k over the probe points.
///
/// L: largest secant ratio |grad f(u) - grad f(v)| / |u - v| over probe pairs.
/// G^2: largest squared norm among `samples_per_probe` sampled per-device
/// stochastic gradients at each probe.
/// s_k^2: largest exact per-device gradient variance over the probes.
ConstantEstimates estimate_constants(const TaskModel& task, const Federation& fed,
                                     std::span<const ParamVector> probes, int samples_per_probe,
                                     std::uint64_t seed);

/// (1/T) sum_j |grad f(W_{jM})|^2 over the logged rounds.
double avg_grad_norm(const RunLog& log);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<std::pair<double, double>> points;  // (log budget, log metric)
};

/// Ordinary least squares on (log x, log y). Needs at least three points with positive values.
RateFit rate_fit(std::span<const std::pair<double, double>> budget_metric);

/// First logged round whose train loss is at or below `target`.
std::optional<int> rounds_to_target(const RunLog& log, double target);

struct Comparison {
  std::optional<int> rounds_fedcluster;
  std::optional<int> rounds_fedavg;
  double final_loss_fedcluster = 0.0;
  double final_loss_fedavg = 0.0;
};

Comparison compare_runs(const RunLog& fedcluster, const RunLog& fedavg, double target);

}  // namespace fedcluster
