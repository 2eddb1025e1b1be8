// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#include "fedcluster/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>

#include "fedcluster/analysis.hpp"
#include "fedcluster/clustering.hpp"
#include "fedcluster/error.hpp"
#include "fedcluster/rng.hpp"

namespace fedcluster {
namespace {

using Check = std::function<std::optional<std::string>()>;

struct FaultGuard {
  explicit FaultGuard(const std::vector<std::string>& faults) {
    for (const auto& f : faults) {
      if (f == "quadratic-grad-sign")
        testing::set_quadratic_grad_sign_fault(true);
      else
        throw ConfigError("unknown fault '" + f + "'");
    }
  }
  ~FaultGuard() { testing::set_quadratic_grad_sign_fault(false); }
  FaultGuard(const FaultGuard&) = delete;
  FaultGuard& operator=(const FaultGuard&) = delete;
};

std::string str(double x) {
  std::ostringstream os;
  os.precision(10);
  os << x;
  return os.str();
}

Sample random_sample(const TaskModel& task, RngStream& rng) {
  Sample s;
  s.features.resize(task.feature_dim);
  for (double& v : s.features) v = rng.normal();
  s.label = task.kind == TaskKind::QuadraticMean
                ? 0
                : static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(task.n_classes)));
  return s;
}

ParamVector random_params(const TaskModel& task, RngStream& rng, double scale) {
  ParamVector w(task.param_count());
  for (std::size_t i = 0; i < w.dim(); ++i) w[i] = scale * rng.normal();
  return w;
}

std::optional<std::string> gradient_check(const TaskModel& task, std::uint64_t seed) {
  constexpr double h = 1e-5, tol = 1e-6;
  RngStream rng = derive_stream(seed, {tag("verify"), tag("fd"), static_cast<Label>(task.kind)});
  for (int trial = 0; trial < 100; ++trial) {
    ParamVector w = random_params(task, rng, 0.5);
    const Sample xi = random_sample(task, rng);
    const ParamVector g = sample_grad(task, w, xi);
    ParamVector fd(w.dim());
    for (std::size_t i = 0; i < w.dim(); ++i) {
      const double wi = w[i];
      w[i] = wi + h;
      const double fp = sample_loss(task, w, xi);
      w[i] = wi - h;
      const double fm = sample_loss(task, w, xi);
      w[i] = wi;
      fd[i] = (fp - fm) / (2 * h);
    }
    const double denom = std::max({std::sqrt(sq_norm(g)), std::sqrt(sq_norm(fd)), 1e-8});
    const double rel = std::sqrt(sq_norm(fd - g)) / denom;
    if (!(rel <= tol))
      return to_string(task.kind) + " gradient disagrees with finite differences at trial " +
             std::to_string(trial) + ": relative error " + str(rel);
  }
  return std::nullopt;
}

Federation random_quadratic_federation(std::uint64_t seed, int devices, int dim) {
  RngStream rng = derive_stream(seed, {tag("verify"), tag("quad-fed")});
  std::vector<std::vector<Sample>> data(devices);
  for (int k = 0; k < devices; ++k) {
    const int count = 1 + static_cast<int>(rng.uniform_index(6));
    const double shift = 2.0 * rng.normal();
    for (int i = 0; i < count; ++i) {
      Sample s;
      for (int j = 0; j < dim; ++j) s.features.push_back(shift + rng.normal());
      data[k].push_back(std::move(s));
    }
  }
  return make_federation(std::move(data), 1, dim);
}

Problem small_softmax_problem(std::uint64_t seed, int clusters) {
  SamplePool pool = synth_pool(4, 6, 60, 2.0, seed);
  PartitionConfig pc;
  pc.n_devices = 12;
  pc.samples_per_device = 10;
  pc.rho_device = 0.6;
  pc.seed = seed;
  Federation fed = partition(pool, pc);
  TaskModel task = TaskModel::softmax(6, 4);
  Clustering cl = cluster_random_uniform(fed, clusters, seed);
  ParamVector w0 = initial_params(task, seed);
  return Problem{task, std::move(fed), std::move(cl), std::move(w0)};
}

RunConfig small_run_config(std::uint64_t seed, int clusters) {
  RunConfig rc;
  rc.rounds = 4;
  rc.local_steps = 5;
  rc.participation = 0.5;
  rc.schedule = LrSchedule::constant(0.1 / clusters);
  rc.optimizer.batch = 2;
  rc.seed = seed;
  return rc;
}

std::vector<std::pair<std::string, Check>> build_checks(std::size_t threads) {
  std::vector<std::pair<std::string, Check>> checks;

  checks.emplace_back("grad_fd_quadratic", [] { return gradient_check(TaskModel::quadratic(5), 11); });
  checks.emplace_back("grad_fd_softmax", [] { return gradient_check(TaskModel::softmax(5, 4), 12); });
  checks.emplace_back("grad_fd_mlp", [] { return gradient_check(TaskModel::mlp(4, 3, 6), 13); });

  checks.emplace_back("dataset_grad_is_sample_mean", []() -> std::optional<std::string> {
    const TaskModel task = TaskModel::mlp(3, 3, 4);
    RngStream rng = derive_stream(21, {tag("verify"), tag("mean")});
    std::vector<Sample> data;
    for (int i = 0; i < 7; ++i) data.push_back(random_sample(task, rng));
    const ParamVector w = random_params(task, rng, 0.5);
    ParamVector manual(w.dim());
    for (const auto& s : data) manual = manual + sample_grad(task, w, s);
    manual = (1.0 / static_cast<double>(data.size())) * manual;
    const double err = std::sqrt(sq_norm(manual - dataset_grad(task, w, data)));
    if (err > 1e-12) return "dataset gradient deviates from the sample mean by " + str(err);
    return std::nullopt;
  });

  checks.emplace_back("weighted_sum_identical_exact", []() -> std::optional<std::string> {
    RngStream rng = derive_stream(22, {tag("verify"), tag("wsum")});
    for (int trial = 0; trial < 50; ++trial) {
      ParamVector v(5);
      for (std::size_t i = 0; i < 5; ++i) v[i] = rng.normal() * 1e3;
      const std::size_t n = 1 + rng.uniform_index(7);
      std::vector<double> w(n);
      double total = 0.0;
      for (double& x : w) total += (x = rng.uniform01() + 1e-3);
      for (double& x : w) x /= total;
      double s = 0.0;
      for (double x : w) s += x;
      w.back() += 1.0 - s;
      std::vector<ParamVector> copies(n, v);
      if (!(weighted_sum(copies, w) == v))
        return "convex combination of identical vectors is not exact at trial " + std::to_string(trial);
    }
    return std::nullopt;
  });

  checks.emplace_back("rng_streams_reproducible", []() -> std::optional<std::string> {
    RngStream a = derive_stream(5, {tag("x"), 1, 2});
    RngStream b = derive_stream(5, {tag("x"), 1, 2});
    RngStream c = derive_stream(5, {tag("x"), 2, 1});
    int collisions = 0;
    for (int i = 0; i < 1000; ++i) {
      const auto va = a.next_u64();
      if (va != b.next_u64()) return std::string("identical paths produced different draws");
      if (va == c.next_u64()) ++collisions;
    }
    if (collisions > 0) return "distinct paths collided " + std::to_string(collisions) + " times";
    RngStream u = derive_stream(6, {tag("uniform")});
    double mean = 0.0;
    constexpr int n = 20000;
    for (int i = 0; i < n; ++i) mean += u.uniform01() / n;
    if (std::abs(mean - 0.5) > 5.0 * std::sqrt(1.0 / 12.0 / n))
      return "uniform01 mean " + str(mean) + " is more than 5 standard errors from 0.5";
    return std::nullopt;
  });

  checks.emplace_back("partition_class_counts", []() -> std::optional<std::string> {
    SamplePool pool = synth_pool(5, 3, 40, 1.0, 31);
    PartitionConfig pc;
    pc.n_devices = 10;
    pc.samples_per_device = 20;
    pc.rho_device = 0.4;
    pc.seed = 31;
    Federation fed = partition(pool, pc);
    double total = 0.0;
    for (const auto& dev : fed.devices) {
      std::vector<int> counts(5, 0);
      for (const auto& s : dev.samples) ++counts[s.label];
      if (counts != device_class_counts(5, 20, 0.4, dev.major_class))
        return "device " + std::to_string(dev.device_id) + " class counts differ from the plan";
      total += dev.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) return "device weights sum to " + str(total);
    return std::nullopt;
  });

  checks.emplace_back("clustering_is_partition", []() -> std::optional<std::string> {
    SamplePool pool = synth_pool(10, 2, 30, 1.0, 32);
    PartitionConfig pc;
    pc.n_devices = 100;
    pc.samples_per_device = 5;
    pc.seed = 32;
    Federation fed = partition(pool, pc);
    for (const Clustering& cl : {cluster_random_uniform(fed, 10, 32), cluster_major_class(fed, 10, 0.5, 32),
                                 cluster_singleton(fed), cluster_all(fed)}) {
      std::vector<int> seen(fed.size(), 0);
      double q = 0.0;
      for (int K = 0; K < cl.clusters(); ++K) {
        for (int k : cl.members(K)) ++seen[k];
        q += cl.weight(K);
      }
      if (std::any_of(seen.begin(), seen.end(), [](int s) { return s != 1; }))
        return "a device is not in exactly one cluster (M=" + std::to_string(cl.clusters()) + ")";
      if (std::abs(q - 1.0) > 1e-12) return "cluster weights sum to " + str(q);
    }
    return std::nullopt;
  });

  checks.emplace_back("hetero_two_device_closed_form", []() -> std::optional<std::string> {
    Federation fed = make_federation({{Sample{{0.0}, 0}}, {Sample{{2.0}, 0}}}, 1, 1);
    const TaskModel task = TaskModel::quadratic(1);
    const Clustering singles = cluster_singleton(fed);
    std::vector<ParamVector> probes{ParamVector{-1.0}, ParamVector{1.0}, ParamVector{3.0}};
    const auto h = estimate_H(task, fed, singles, probes);
    const auto g = estimate_Gamma(task, fed, singles);
    if (std::abs(h.h_device - 1.0) > 1e-10) return "H_device = " + str(h.h_device) + ", expected 1";
    if (std::abs(g.device - 0.5) > 1e-10) return "Gamma_device = " + str(g.device) + ", expected 0.5";
    return std::nullopt;
  });

  checks.emplace_back("hetero_cluster_le_device", []() -> std::optional<std::string> {
    const TaskModel task = TaskModel::quadratic(3);
    for (int trial = 0; trial < 100; ++trial) {
      const std::uint64_t seed = 1000 + static_cast<std::uint64_t>(trial);
      RngStream rng = derive_stream(seed, {tag("verify"), tag("hetero")});
      const int n = 2 + static_cast<int>(rng.uniform_index(9));
      Federation fed = random_quadratic_federation(seed, n, 3);
      const int M = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n)));
      std::vector<int> assignment(n);
      for (int k = 0; k < n; ++k) assignment[k] = k < M ? k : static_cast<int>(rng.uniform_index(M));
      shuffle(assignment, rng);
      Clustering cl(assignment, M, fed);
      auto probes = default_probes(ParamVector(3), 3, 1.0, seed);
      const auto h = estimate_H(task, fed, cl, probes);
      const auto g = estimate_Gamma(task, fed, cl);
      if (h.h_cluster > h.h_device * (1 + 1e-12) + 1e-12)
        return "H_cluster " + str(h.h_cluster) + " > H_device " + str(h.h_device) + " (trial " +
               std::to_string(trial) + ")";
      if (g.cluster > g.device * (1 + 1e-12) + 1e-12)
        return "Gamma_cluster " + str(g.cluster) + " > Gamma_device " + str(g.device) + " (trial " +
               std::to_string(trial) + ")";
    }
    return std::nullopt;
  });

  checks.emplace_back("fedavg_equals_single_cluster", []() -> std::optional<std::string> {
    for (std::uint64_t seed : {41u, 42u}) {
      Problem p = small_softmax_problem(seed, 3);
      const RunConfig rc = small_run_config(seed, 1);
      const RunLog avg = run_fedavg(p, rc);
      Problem one{p.task, p.federation, cluster_all(p.federation), p.initial};
      const RunLog cyc = run(one, rc);
      if (!same_trajectory(avg, cyc))
        return "single-cluster run differs from FedAvg for seed " + std::to_string(seed);
    }
    return std::nullopt;
  });

  checks.emplace_back("thread_count_invariance", [threads]() -> std::optional<std::string> {
    Problem p = small_softmax_problem(51, 3);
    const RunConfig rc = small_run_config(51, 3);
    RunOptions one, many;
    many.threads = std::max<std::size_t>(threads, 2);
    if (!same_trajectory(run(p, rc, one), run(p, rc, many)))
      return "run differs between 1 and " + std::to_string(many.threads) + " threads";
    return std::nullopt;
  });

  checks.emplace_back("cycle_recursion", []() -> std::optional<std::string> {
    Problem p = small_softmax_problem(61, 4);
    RunConfig rc = small_run_config(61, 4);
    rc.participation = 1.0;
    std::vector<ParamVector> checkpoints;
    std::vector<CycleTrace> traces;
    RunOptions opt;
    opt.checkpoints = &checkpoints;
    opt.on_cycle = [&](const CycleTrace& t) { traces.push_back(t); };
    const RunLog log = run(p, rc, opt);
    const int M = p.clustering.clusters();
    if (traces.size() != static_cast<std::size_t>(rc.rounds * M))
      return "expected " + std::to_string(rc.rounds * M) + " cycles, saw " + std::to_string(traces.size());
    for (std::size_t i = 0; i < traces.size(); ++i) {
      const CycleTrace& t = traces[i];
      if (t.cycle == 0 && !(t.broadcast == checkpoints.at(t.round)))
        return "round " + std::to_string(t.round) + " does not start from W_{jM}";
      if (i > 0 && !(t.broadcast == traces[i - 1].averaged))
        return "cycle " + std::to_string(i) + " does not start from the previous average";
      std::vector<double> w;
      double q = 0.0;
      for (int k : t.devices) q += p.federation.devices[k].weight;
      for (int k : t.devices) w.push_back(p.federation.devices[k].weight / q);
      const ParamVector expected = weighted_sum(t.local_models, w);
      const double err = std::sqrt(sq_norm(expected - t.averaged));
      if (err > 1e-12) return "cycle " + std::to_string(i) + " average off by " + str(err);
      if (t.devices != p.clustering.members(t.cluster))
        return "full participation did not train every member of cluster " + std::to_string(t.cluster);
    }
    if (!(traces.back().averaged == log.final_model))
      return std::string("final model is not the last cycle average");
    return std::nullopt;
  });

  checks.emplace_back("single_activation_per_round", []() -> std::optional<std::string> {
    Problem p = small_softmax_problem(71, 4);
    RunConfig rc = small_run_config(71, 4);
    rc.participation = 1.0;
    const RunLog log = run(p, rc);
    for (const auto& r : log.records)
      if (r.max_activations != 1)
        return "round " + std::to_string(r.round) + " trained a device " +
               std::to_string(r.max_activations) + " times";
    return std::nullopt;
  });

  checks.emplace_back("bound_formula_examples", []() -> std::optional<std::string> {
    BoundInputs in;
    in.smoothness = 1;
    in.f0_gap = 1;
    in.rounds = 100;
    in.clusters = 10;
    in.local_steps = 20;
    const auto nc = bound_nonconvex(in);
    if (std::abs(nc.c - 2) > 1e-9 || std::abs(nc.bound - 4 / std::sqrt(20000.0)) > 1e-9)
      return "nonconvex bound example mismatch: C=" + str(nc.c) + " bound=" + str(nc.bound);
    if (std::abs(required_rounds(in, 0.1) - 8) > 1e-9)
      return "required_rounds example mismatch: " + str(required_rounds(in, 0.1));
    in.mu = 1;
    in.g_sq = 1;
    const auto sc = bound_strongly_convex(in);
    if (std::abs(sc.gamma - 200) > 1e-9 || std::abs(sc.b - 1100) > 1e-9)
      return "strongly convex example mismatch: gamma=" + str(sc.gamma) + " B=" + str(sc.b);
    return std::nullopt;
  });

  checks.emplace_back("bounds_monotone_in_T_and_M", []() -> std::optional<std::string> {
    RngStream rng = derive_stream(81, {tag("verify"), tag("monotone")});
    for (int trial = 0; trial < 200; ++trial) {
      BoundInputs in;
      in.smoothness = 0.5 + 2 * rng.uniform01();
      in.mu = in.smoothness * (0.1 + 0.9 * rng.uniform01());
      in.g_sq = 3 * rng.uniform01();
      in.h_cluster = rng.uniform01();
      in.gamma_cluster = rng.uniform01();
      in.f0_gap = 5 * rng.uniform01();
      in.rounds = 1 + static_cast<int>(rng.uniform_index(500));
      in.clusters = 1 + static_cast<int>(rng.uniform_index(20));
      in.local_steps = 1 + static_cast<int>(rng.uniform_index(30));
      BoundInputs t2 = in, m2 = in;
      t2.rounds += 1 + static_cast<int>(rng.uniform_index(100));
      m2.clusters += 1 + static_cast<int>(rng.uniform_index(10));
      for (const BoundInputs* more : {&t2, &m2}) {
        if (bound_nonconvex(*more).bound > bound_nonconvex(in).bound * (1 + 1e-12))
          return "nonconvex bound increased at trial " + std::to_string(trial);
        if (bound_strongly_convex(*more).bound > bound_strongly_convex(in).bound * (1 + 1e-12))
          return "strongly convex bound increased at trial " + std::to_string(trial);
      }
    }
    return std::nullopt;
  });

  checks.emplace_back("strongly_convex_bound_holds", []() -> std::optional<std::string> {
    constexpr int seeds = 5, M = 2, E = 5, T = 40;
    double gap = 0.0, bound = 0.0;
    for (int s = 1; s <= seeds; ++s) {
      SamplePool pool = synth_pool(2, 3, 40, 2.0, 90 + s);
      PartitionConfig pc;
      pc.n_devices = 8;
      pc.samples_per_device = 8;
      pc.seed = 90 + s;
      Federation fed = partition(pool, pc);
      const TaskModel task = TaskModel::quadratic(3);
      Clustering cl = cluster_random_uniform(fed, M, 90 + s);
      const auto an = quadratic_analytic(task, fed, cl);
      Problem p{task, fed, cl, initial_params(task, 90 + s)};
      RunConfig rc;
      rc.rounds = T;
      rc.local_steps = E;
      rc.schedule = LrSchedule::inverse_time(1, 1, M, E);
      rc.seed = 90 + s;
      gap += (run(p, rc).final_loss - an.f_star) / seeds;
      std::vector<ParamVector> probes = default_probes(an.w_star, 6, 2.0, 90 + s);
      probes.push_back(p.initial);
      const auto est = estimate_constants(task, fed, probes, 8, 90 + s);
      BoundInputs in;
      in.smoothness = 1;
      in.mu = 1;
      in.g_sq = est.g_sq_hat;
      in.s_sq = est.s_sq_hat;
      in.set_partition(fed, cl);
      in.gamma_cluster = estimate_Gamma(task, fed, cl).cluster;
      in.rounds = T;
      in.local_steps = E;
      bound = std::max(bound, bound_strongly_convex(in).bound);
    }
    if (!(gap <= bound)) return "mean gap " + str(gap) + " exceeds bound " + str(bound);
    return std::nullopt;
  });

  checks.emplace_back("rate_fit_power_law", []() -> std::optional<std::string> {
    std::vector<std::pair<double, double>> pts;
    for (double x : {10.0, 100.0, 1000.0, 5000.0}) pts.emplace_back(x, 3.0 / std::sqrt(x));
    const double slope = rate_fit(pts).slope;
    if (std::abs(slope + 0.5) > 1e-9) return "fitted slope " + str(slope) + ", expected -0.5";
    return std::nullopt;
  });

  return checks;
}

}  // namespace

bool same_trajectory(const RunLog& a, const RunLog& b) {
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& x = a.records[i];
    const auto& y = b.records[i];
    if (x.round != y.round || x.cycle_count != y.cycle_count || x.train_loss != y.train_loss ||
        x.grad_sq_norm != y.grad_sq_norm || x.lr != y.lr || x.elapsed_steps != y.elapsed_steps ||
        x.max_activations != y.max_activations)
      return false;
  }
  return a.final_model == b.final_model && a.final_loss == b.final_loss &&
         a.final_grad_sq_norm == b.final_grad_sq_norm;
}

std::vector<std::string> known_faults() { return {"quadratic-grad-sign"}; }

std::vector<PropertyResult> run_verify_suite(const VerifyOptions& options) {
  FaultGuard guard(options.faults);
  std::vector<PropertyResult> results;
  for (auto& [name, check] : build_checks(options.threads)) {
    PropertyResult r;
    r.name = name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const auto failure = check();
      r.passed = !failure.has_value();
      if (failure) r.detail = *failure;
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    results.push_back(std::move(r));
  }
  return results;
}

nlohmann::json verify_report_json(const std::vector<PropertyResult>& results,
                                  const VerifyOptions& options) {
  nlohmann::json props = nlohmann::json::array();
  int passed = 0;
  std::vector<std::string> failures;
  for (const auto& r : results) {
    props.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}, {"seconds", r.seconds}});
    if (r.passed)
      ++passed;
    else
      failures.push_back(r.name);
  }
  return {{"ok", failures.empty()},
          {"passed", passed},
          {"failed", static_cast<int>(failures.size())},
          {"failures", failures},
          {"injected_faults", options.faults},
          {"properties", std::move(props)}};
}

}  // namespace fedcluster
