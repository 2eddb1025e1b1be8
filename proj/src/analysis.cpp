// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#include "fedcluster/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fedcluster/error.hpp"
#include "fedcluster/rng.hpp"

namespace fedcluster {

void BoundInputs::set_partition(const Federation& fed, const Clustering& clustering) {
  p = fed.weights();
  cluster_of = clustering.assignment();
  q = clustering.weights();
  clusters = clustering.clusters();
}

double local_variance_term(const BoundInputs& in) {
  if (in.s_sq.empty()) return 0.0;
  if (in.s_sq.size() != in.p.size() || in.cluster_of.size() != in.p.size())
    throw ConfigError("bound inputs: s_sq, p and cluster_of must have one entry per device");
  std::vector<double> per_cluster(in.q.size(), 0.0);
  for (std::size_t k = 0; k < in.p.size(); ++k)
    per_cluster.at(in.cluster_of[k]) += in.p[k] * in.p[k] * in.s_sq[k];
  double total = 0.0;
  for (std::size_t K = 0; K < in.q.size(); ++K)
    if (per_cluster[K] > 0.0) total += per_cluster[K] / in.q[K];
  return total;
}

NonconvexBound bound_nonconvex(const BoundInputs& in) {
  NonconvexBound out;
  out.c = 2.0 * in.f0_gap + 4.0 * in.smoothness * (in.h_cluster + local_variance_term(in));
  const double budget = static_cast<double>(in.rounds) * in.clusters * in.local_steps;
  out.bound = 2.0 * out.c / std::sqrt(budget);
  return out;
}

StronglyConvexBound bound_strongly_convex(const BoundInputs& in) {
  if (!in.mu || !(*in.mu > 0.0))
    throw UnsupportedTaskError("strongly-convex bound needs a positive mu");
  const double mu = *in.mu;
  const double L = in.smoothness;
  const double E = in.local_steps;
  const double M = in.clusters;
  StronglyConvexBound out;
  out.gamma = std::max(8.0 * L / mu, M * E);
  out.b = (4.0 * E * M + 0.75 * E * E) * in.g_sq + 4.0 * L * in.gamma_cluster.value_or(0.0) +
          local_variance_term(in);
  out.bound = L * (out.gamma * in.g_sq + 4.0 * out.b) / (2.0 * mu * mu * in.rounds * M * E);
  return out;
}

double required_rounds(const BoundInputs& in, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("required_rounds: epsilon must be positive");
  const double c = bound_nonconvex(in).c;
  return 4.0 * c * c / (epsilon * epsilon * in.clusters * in.local_steps);
}

std::vector<std::string> nonconvex_precondition_warnings(const BoundInputs& in) {
  std::vector<std::string> warnings;
  const double c = bound_nonconvex(in).c;
  const double L = in.smoothness;
  const double me = static_cast<double>(in.clusters) * in.local_steps;
  if (L > 0.0 && in.g_sq > 0.0) {
    const double cap = c / (8.0 * L * in.g_sq);
    if (me > cap) {
      std::ostringstream os;
      os << "M*E = " << me << " exceeds C/(8 L G^2) = " << cap
         << " (estimated constants); the nonconvex bound may not apply";
      warnings.push_back(os.str());
    }
  }
  const double t_min = L * L * std::max(1.0, 16.0 / me);
  if (in.rounds < t_min) {
    std::ostringstream os;
    os << "T = " << in.rounds << " is below L^2 max(1, 16/(E M)) = " << t_min
       << " (estimated constants)";
    warnings.push_back(os.str());
  }
  return warnings;
}

ConstantEstimates estimate_constants(const TaskModel& task, const Federation& fed,
                                     std::span<const ParamVector> probes, int samples_per_probe,
                                     std::uint64_t seed) {
  if (probes.empty()) throw ConfigError("estimate_constants: probe set is empty");
  ConstantEstimates out;
  out.s_sq_hat.assign(fed.size(), 0.0);

  std::vector<ParamVector> global;
  global.reserve(probes.size());
  for (std::size_t pi = 0; pi < probes.size(); ++pi) {
    const ParamVector& w = probes[pi];
    ParamVector g(w.dim());
    for (std::size_t k = 0; k < fed.size(); ++k) {
      const auto& samples = fed.devices[k].samples;
      const ParamVector mean = dataset_grad(task, w, samples);
      axpy(fed.devices[k].weight, mean, g);

      double var = 0.0;
      for (const Sample& xi : samples) var += sq_norm(sample_grad(task, w, xi) - mean);
      var /= static_cast<double>(samples.size());
      out.s_sq_hat[k] = std::max(out.s_sq_hat[k], var);

      RngStream rng = derive_stream(
          seed, {tag("constants"), static_cast<Label>(pi), static_cast<Label>(k)});
      for (int s = 0; s < samples_per_probe; ++s) {
        const Sample& xi = samples[rng.uniform_index(samples.size())];
        out.g_sq_hat = std::max(out.g_sq_hat, sq_norm(sample_grad(task, w, xi)));
      }
    }
    global.push_back(std::move(g));
  }

  for (std::size_t a = 0; a < probes.size(); ++a)
    for (std::size_t b = a + 1; b < probes.size(); ++b) {
      const double dw = std::sqrt(sq_norm(probes[a] - probes[b]));
      if (dw <= 0.0) continue;
      out.l_hat = std::max(out.l_hat, std::sqrt(sq_norm(global[a] - global[b])) / dw);
    }
  out.g_hat = std::sqrt(out.g_sq_hat);
  return out;
}

double avg_grad_norm(const RunLog& log) {
  if (log.records.empty()) throw ConfigError("avg_grad_norm: empty run log");
  double s = 0.0;
  for (const auto& r : log.records) s += r.grad_sq_norm;
  return s / static_cast<double>(log.records.size());
}

RateFit rate_fit(std::span<const std::pair<double, double>> budget_metric) {
  if (budget_metric.size() < 3) throw ConfigError("rate_fit: at least three points are required");
  RateFit fit;
  for (std::size_t i = 0; i < budget_metric.size(); ++i) {
    const auto [x, y] = budget_metric[i];
    if (!(x > 0.0) || !(y > 0.0))
      throw ConfigError("rate_fit: point " + std::to_string(i) + " has a non-positive value");
    fit.points.emplace_back(std::log(x), std::log(y));
  }
  const double n = static_cast<double>(fit.points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : fit.points) {
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [x, y] : fit.points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  if (sxx <= 0.0) throw ConfigError("rate_fit: budgets must not all be equal");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

std::optional<int> rounds_to_target(const RunLog& log, double target) {
  for (const auto& r : log.records)
    if (r.train_loss <= target) return r.round;
  return std::nullopt;
}

Comparison compare_runs(const RunLog& fedcluster, const RunLog& fedavg, double target) {
  Comparison c;
  c.rounds_fedcluster = rounds_to_target(fedcluster, target);
  c.rounds_fedavg = rounds_to_target(fedavg, target);
  c.final_loss_fedcluster = fedcluster.final_loss;
  c.final_loss_fedavg = fedavg.final_loss;
  return c;
}

}  // namespace fedcluster
