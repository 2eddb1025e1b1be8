// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#include "fedcluster/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <numeric>

#include "fedcluster/error.hpp"
#include "fedcluster/parallel.hpp"
#include "fedcluster/rng.hpp"

namespace fedcluster {

LrSchedule LrSchedule::constant_theory(int rounds, int clusters, int local_steps) {
  LrSchedule s;
  s.kind = ScheduleKind::ConstantTheory;
  s.rounds = rounds;
  s.clusters = clusters;
  s.local_steps = local_steps;
  return s;
}

LrSchedule LrSchedule::constant(double eta) {
  LrSchedule s;
  s.kind = ScheduleKind::ConstantExplicit;
  s.eta = eta;
  return s;
}

LrSchedule LrSchedule::inverse_time(double mu, double smoothness, int clusters, int local_steps) {
  LrSchedule s;
  s.kind = ScheduleKind::InverseTime;
  s.mu = mu;
  s.smoothness = smoothness;
  s.clusters = clusters;
  s.local_steps = local_steps;
  return s;
}

double LrSchedule::gamma() const {
  return std::max(8.0 * smoothness / mu, static_cast<double>(clusters) * local_steps);
}

double LrSchedule::value(int round, int cycle, int step) const {
  switch (kind) {
    case ScheduleKind::ConstantTheory:
      return 1.0 / std::sqrt(static_cast<double>(rounds) * clusters * local_steps);
    case ScheduleKind::ConstantExplicit: return eta;
    case ScheduleKind::InverseTime: {
      const double s = (static_cast<double>(round) * clusters + cycle) * local_steps + step;
      return 2.0 / (mu * (s + gamma()));
    }
  }
  return 0.0;
}

double lr_value(const LrSchedule& schedule, int round, int cycle, int step) {
  return schedule.value(round, cycle, step);
}

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::ConstantTheory: return "constant_theory";
    case ScheduleKind::ConstantExplicit: return "constant";
    case ScheduleKind::InverseTime: return "inverse_time";
  }
  return "unknown";
}

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::SgdMomentum: return "sgdm";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::FedProxSgd: return "fedprox";
  }
  return "unknown";
}

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "sgdm") return OptimizerKind::SgdMomentum;
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "fedprox") return OptimizerKind::FedProxSgd;
  throw ConfigError("optimizer.kind: unknown optimizer '" + name +
                    "' (expected sgd, sgdm, adam or fedprox)");
}

void LocalOptimizerSpec::validate(std::size_t min_device_samples) const {
  if (batch < 1) throw ConfigError("optimizer.batch must be at least 1");
  if (static_cast<std::size_t>(batch) > min_device_samples)
    throw ConfigError("optimizer.batch (" + std::to_string(batch) +
                      ") exceeds the smallest device dataset (" +
                      std::to_string(min_device_samples) + ")");
  if (kind == OptimizerKind::SgdMomentum && !(momentum >= 0.0 && momentum < 1.0))
    throw ConfigError("optimizer.momentum must lie in [0, 1)");
  if (kind == OptimizerKind::Adam) {
    if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("optimizer.beta1 must lie in (0, 1)");
    if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("optimizer.beta2 must lie in (0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("optimizer.epsilon must be positive");
  }
  if (kind == OptimizerKind::FedProxSgd && !(mu_prox >= 0.0))
    throw ConfigError("optimizer.mu_prox must be non-negative");
}

int sample_count(double participation, std::size_t cluster_size) {
  const double raw = participation * static_cast<double>(cluster_size);
  const auto m = static_cast<long long>(std::ceil(raw - 1e-9));
  return static_cast<int>(std::clamp<long long>(m, 0, static_cast<long long>(cluster_size)));
}

RoundPlan plan_round(int round, const Clustering& clustering, double participation, bool reshuffle,
                     std::uint64_t seed) {
  if (!(participation > 0.0 && participation <= 1.0))
    throw ConfigError("engine.participation must lie in (0, 1]");
  const int M = clustering.clusters();
  RoundPlan plan;
  plan.order.resize(M);
  std::iota(plan.order.begin(), plan.order.end(), 0);
  if (reshuffle && M > 1) {
    RngStream rng = derive_stream(seed, {tag("plan"), static_cast<Label>(round), tag("order")});
    shuffle(plan.order, rng);
  }
  plan.sampled.resize(M);
  for (int K = 0; K < M; ++K) {
    const auto& members = clustering.members(plan.order[K]);
    const int m = sample_count(participation, members.size());
    if (m < 1)
      throw ConfigError("engine.participation=" + std::to_string(participation) +
                        " samples no device from cluster " + std::to_string(plan.order[K]));
    std::vector<int> chosen = members;
    if (static_cast<std::size_t>(m) < members.size()) {
      RngStream rng = derive_stream(
          seed, {tag("plan"), static_cast<Label>(round), tag("sample"), static_cast<Label>(K)});
      for (int i = 0; i < m; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.uniform_index(chosen.size() - i));
        std::swap(chosen[i], chosen[j]);
      }
      chosen.resize(m);
      std::sort(chosen.begin(), chosen.end());
    }
    plan.sampled[K] = std::move(chosen);
  }
  return plan;
}

ParamVector local_train(const TaskModel& task, const DeviceDataset& device, const ParamVector& w_init,
                        int local_steps, const LrSchedule& schedule, int round, int cycle,
                        const LocalOptimizerSpec& opt, std::uint64_t seed,
                        std::vector<LocalStep>* trace) {
  if (local_steps < 0) throw ConfigError("engine.E must be non-negative");
  if (device.samples.empty()) throw ConfigError("local_train: device has no samples");
  ParamVector w = w_init;
  if (local_steps == 0) return w;

  RngStream rng = derive_stream(seed, {tag("local"), static_cast<Label>(round),
                                       static_cast<Label>(cycle), static_cast<Label>(device.device_id)});
  const std::size_t dim = w.dim();
  ParamVector grad(dim);
  ParamVector state1(dim), state2(dim);
  const double inv_batch = 1.0 / static_cast<double>(opt.batch);
  const std::size_t n = device.samples.size();

  for (int t = 0; t < local_steps; ++t) {
    std::fill(grad.values().begin(), grad.values().end(), 0.0);
    for (int b = 0; b < opt.batch; ++b) {
      const Sample& xi = device.samples[rng.uniform_index(n)];
      accumulate_sample_grad(task, w, xi, inv_batch, grad);
    }
    if (opt.kind == OptimizerKind::FedProxSgd)
      for (std::size_t i = 0; i < dim; ++i) grad[i] += opt.mu_prox * (w[i] - w_init[i]);

    const double lr = schedule.value(round, cycle, t);
    if (trace) trace->push_back({t, lr, w, grad});

    switch (opt.kind) {
      case OptimizerKind::Sgd:
      case OptimizerKind::FedProxSgd:
        for (std::size_t i = 0; i < dim; ++i) w[i] -= lr * grad[i];
        break;
      case OptimizerKind::SgdMomentum:
        for (std::size_t i = 0; i < dim; ++i) {
          state1[i] = opt.momentum * state1[i] + grad[i];
          w[i] -= lr * state1[i];
        }
        break;
      case OptimizerKind::Adam: {
        const double c1 = 1.0 - std::pow(opt.beta1, t + 1);
        const double c2 = 1.0 - std::pow(opt.beta2, t + 1);
        for (std::size_t i = 0; i < dim; ++i) {
          state1[i] = opt.beta1 * state1[i] + (1.0 - opt.beta1) * grad[i];
          state2[i] = opt.beta2 * state2[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
          w[i] -= lr * (state1[i] / c1) / (std::sqrt(state2[i] / c2) + opt.epsilon);
        }
        break;
      }
    }
    if (!w.all_finite()) throw DivergenceError(round, cycle, device.device_id, t);
  }
  return w;
}

ParamVector cluster_average(std::span<const std::pair<int, ParamVector>> members,
                            const Federation& fed, const Clustering& clustering,
                            bool strict_weights) {
  if (members.empty()) throw ConfigError("cluster_average: no members");
  const int cluster = clustering.cluster_of(members.front().first);
  std::vector<std::size_t> order(members.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return members[a].first < members[b].first; });

  double normalizer = 0.0;
  for (std::size_t i : order) {
    if (clustering.cluster_of(members[i].first) != cluster)
      throw InternalError("cluster_average: members from clusters " + std::to_string(cluster) +
                          " and " + std::to_string(clustering.cluster_of(members[i].first)));
    normalizer += fed.devices[members[i].first].weight;
  }
  if (strict_weights) normalizer = clustering.weight(cluster);

  std::vector<ParamVector> vectors;
  std::vector<double> weights;
  vectors.reserve(members.size());
  weights.reserve(members.size());
  for (std::size_t i : order) {
    vectors.push_back(members[i].second);
    weights.push_back(fed.devices[members[i].first].weight / normalizer);
  }
  return weighted_sum(vectors, weights);
}

namespace {

struct Metrics {
  double loss;
  double grad_sq;
  ParamVector grad;
};

Metrics full_metrics(const TaskModel& task, const Federation& fed, const ParamVector& w,
                     ThreadPool& pool) {
  const std::size_t n = fed.size();
  std::vector<double> losses(n);
  std::vector<ParamVector> grads(n);
  pool.parallel_for(n, [&](std::size_t k) {
    losses[k] = dataset_loss(task, w, fed.devices[k].samples);
    grads[k] = dataset_grad(task, w, fed.devices[k].samples);
  });
  Metrics m{0.0, 0.0, ParamVector(w.dim())};
  for (std::size_t k = 0; k < n; ++k) {
    m.loss += fed.devices[k].weight * losses[k];
    axpy(fed.devices[k].weight, grads[k], m.grad);
  }
  m.grad_sq = sq_norm(m.grad);
  return m;
}

void validate(const Problem& problem, const RunConfig& cfg) {
  if (cfg.rounds < 1) throw ConfigError("engine.T must be at least 1");
  if (cfg.local_steps < 0) throw ConfigError("engine.E must be non-negative");
  if (!(cfg.participation > 0.0 && cfg.participation <= 1.0))
    throw ConfigError("engine.participation must lie in (0, 1]");
  if (problem.federation.size() == 0) throw ConfigError("federation has no devices");
  if (problem.initial.dim() != problem.task.param_count())
    throw ConfigError("initial model dimension does not match the task");
  std::size_t smallest = problem.federation.devices.front().samples.size();
  for (const auto& d : problem.federation.devices) smallest = std::min(smallest, d.samples.size());
  cfg.optimizer.validate(smallest);
  if (cfg.schedule.kind == ScheduleKind::InverseTime && !(cfg.schedule.mu > 0.0))
    throw ConfigError("schedule.mu must be positive for inverse_time");
}

RunLog run_with_clustering(const Problem& problem, const Clustering& clustering,
                          const RunConfig& cfg, const RunOptions& options) {
  validate(problem, cfg);
  const auto& fed = problem.federation;
  const int M = clustering.clusters();

  std::unique_ptr<ThreadPool> owned;
  ThreadPool* pool = options.pool;
  if (!pool) {
    owned = std::make_unique<ThreadPool>(std::max<std::size_t>(options.threads, 1));
    pool = owned.get();
  }

  const auto started = std::chrono::steady_clock::now();
  RunLog log;
  log.records.reserve(cfg.rounds);
  ParamVector global = problem.initial;
  std::vector<int> activations(fed.size(), 0);

  for (int j = 0; j < cfg.rounds; ++j) {
    const Metrics m = full_metrics(problem.task, fed, global, *pool);
    if (!std::isfinite(m.loss) || !std::isfinite(m.grad_sq)) throw DivergenceError(j, -1, -1, -1);
    if (options.checkpoints) options.checkpoints->push_back(global);

    RoundRecord rec;
    rec.round = j;
    rec.cycle_count = static_cast<long long>(j) * M;
    rec.train_loss = m.loss;
    rec.grad_sq_norm = m.grad_sq;
    rec.lr = cfg.schedule.value(j, 0, 0);
    rec.elapsed_steps = static_cast<long long>(j) * M * cfg.local_steps;

    const RoundPlan plan = plan_round(j, clustering, cfg.participation, cfg.reshuffle, cfg.seed);
    std::fill(activations.begin(), activations.end(), 0);

    for (int K = 0; K < M; ++K) {
      const auto& devices = plan.sampled[K];
      std::vector<std::pair<int, ParamVector>> results(devices.size());
      std::vector<std::vector<LocalStep>> traces(options.on_cycle ? devices.size() : 0);
      pool->parallel_for(devices.size(), [&](std::size_t i) {
        const int k = devices[i];
        results[i] = {k, local_train(problem.task, fed.devices[k], global, cfg.local_steps,
                                     cfg.schedule, j, K, cfg.optimizer, cfg.seed,
                                     options.on_cycle ? &traces[i] : nullptr)};
      });
      for (int k : devices)
        if (++activations[k] > 1)
          throw InternalError("device " + std::to_string(k) + " activated twice in round " +
                              std::to_string(j));

      ParamVector next = cluster_average(results, fed, clustering, cfg.strict_weights);
      if (!next.all_finite()) throw DivergenceError(j, K, -1, cfg.local_steps);

      if (options.on_cycle) {
        CycleTrace trace;
        trace.round = j;
        trace.cycle = K;
        trace.cluster = plan.order[K];
        trace.broadcast = global;
        trace.devices = devices;
        trace.steps = std::move(traces);
        for (auto& r : results) trace.local_models.push_back(r.second);
        trace.averaged = next;
        options.on_cycle(trace);
      }
      global = std::move(next);
    }
    rec.max_activations = *std::max_element(activations.begin(), activations.end());
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
                      .count();
    log.records.push_back(rec);
  }

  const Metrics final_metrics = full_metrics(problem.task, fed, global, *pool);
  if (!std::isfinite(final_metrics.loss) || !std::isfinite(final_metrics.grad_sq))
    throw DivergenceError(cfg.rounds, -1, -1, -1);
  log.final_model = std::move(global);
  log.final_loss = final_metrics.loss;
  log.final_grad_sq_norm = final_metrics.grad_sq;
  return log;
}

}  // namespace

RunLog run(const Problem& problem, const RunConfig& cfg, const RunOptions& options) {
  return run_with_clustering(problem, problem.clustering, cfg, options);
}

RunLog run_fedavg(const Problem& problem, const RunConfig& cfg, const RunOptions& options) {
  return run_with_clustering(problem, cluster_all(problem.federation), cfg, options);
}

}  // namespace fedcluster
