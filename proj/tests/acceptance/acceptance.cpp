// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance battery: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "fedcluster/analysis.hpp"
#include "fedcluster/clustering.hpp"
#include "fedcluster/commands.hpp"
#include "fedcluster/config.hpp"
#include "fedcluster/engine.hpp"
#include "fedcluster/error.hpp"
#include "fedcluster/parallel.hpp"
#include "fedcluster/report.hpp"
#include "fedcluster/verify.hpp"
#include "support.hpp"

using namespace fedcluster;
using testsupport::Gen;

namespace {

struct Outcome {
  bool passed = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      passed = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(const char* pattern, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, x);
  return buf;
}

std::string join(const std::vector<int>& xs) {
  std::string s;
  for (int x : xs) s += (s.empty() ? "" : ",") + std::to_string(x);
  return s;
}

int median(std::vector<int> xs) {
  std::sort(xs.begin(), xs.end());
  return xs[xs.size() / 2];
}

constexpr int kNeverReached = std::numeric_limits<int>::max() / 2;

// ---- 1. reduction equivalence ---------------------------------------------------------

Outcome reduction_equivalence() {
  Outcome out;
  Gen gen(101);
  for (int trial = 0; trial < 5; ++trial) {
    const int kind = trial % 3;
    const int n = gen.integer(4, 12), d = gen.integer(2, 5), classes = gen.integer(2, 4);
    const auto fed = gen.federation(n, d, classes, 3, 8);
    const TaskModel task = kind == 0   ? TaskModel::quadratic(d)
                           : kind == 1 ? TaskModel::softmax(d, classes)
                                       : TaskModel::mlp(d, classes, 6);
    const std::uint64_t seed = 1000 + trial;
    const Problem problem{task, fed, cluster_all(fed), initial_params(task, seed)};
    RunConfig cfg;
    cfg.rounds = gen.integer(3, 8);
    cfg.local_steps = gen.integer(1, 6);
    cfg.participation = gen.real(0.2, 1.0);
    cfg.schedule = LrSchedule::constant(gen.real(0.01, 0.1));
    cfg.optimizer.batch = gen.integer(1, 3);
    cfg.optimizer.kind = trial == 3 ? OptimizerKind::SgdMomentum : OptimizerKind::Sgd;
    cfg.seed = seed;
    const RunLog a = run(problem, cfg);
    const RunLog b = run_fedavg(problem, cfg);
    out.require(same_trajectory(a, b), "config " + std::to_string(trial) + " diverges from FedAvg");
  }
  out.note("5 configs bit-identical");
  return out;
}

// ---- 2. determinism -----------------------------------------------------------------

// Metrics CSV with the wall_ms column removed.
std::string csv_without_wall(const ExperimentConfig& cfg, std::size_t threads) {
  const RunOutcome o = execute(cfg, threads);
  std::ostringstream raw;
  write_metrics_rows(raw, RunLabel{o.run_id, to_string(cfg.algorithm), cfg.seed}, o.log);
  std::istringstream in(raw.str());
  std::string line, kept;
  while (std::getline(in, line)) kept += line.substr(0, line.rfind(',')) + "\n";
  return kept;
}

Outcome determinism() {
  Outcome out;
  const std::filesystem::path examples = std::filesystem::path(FEDCLUSTER_SOURCE_DIR) / "configs/examples";
  std::vector<ExperimentConfig> configs;
  for (const char* name : {"quadratic_minimal.json", "softmax_default.json", "mlp_theory.json"}) {
    auto cfg = load_config(examples / name);
    cfg.rounds = std::min(cfg.rounds, 10);
    configs.push_back(cfg);
  }
  auto adam = configs[1];
  adam.optimizer.kind = OptimizerKind::Adam;
  adam.participation = 0.3;
  configs.push_back(adam);
  auto fedavg = configs[0];
  fedavg.algorithm = Algorithm::FedAvg;
  configs.push_back(fedavg);

  const std::size_t max_threads = std::max<std::size_t>(4, default_thread_count());
  for (const auto& cfg : configs) {
    const std::string id = effective_run_id(cfg) + "/" + to_string(cfg.task);
    const std::string one = csv_without_wall(cfg, 1);
    out.require(!one.empty(), id + " produced no rows");
    out.require(one == csv_without_wall(cfg, 1), id + " differs between repeated runs");
    out.require(one == csv_without_wall(cfg, max_threads), id + " differs at " +
                                                                std::to_string(max_threads) + " threads");
  }
  out.note(std::to_string(configs.size()) + " configs, 1 vs " + std::to_string(max_threads) + " threads");
  return out;
}

// ---- 3. gradient correctness -----------------------------------------------------------

Outcome gradient_correctness() {
  Outcome out;
  Gen gen(303);
  const std::vector<std::pair<std::string, TaskModel>> families{
      {"quadratic", TaskModel::quadratic(6)},
      {"softmax", TaskModel::softmax(5, 4)},
      {"mlp", TaskModel::mlp(4, 3, 6)}};
  for (const auto& [name, task] : families) {
    double worst = 0.0;
    for (int i = 0; i < 120; ++i) {
      const ParamVector w = gen.vec(task.param_count(), 1.0);
      const Sample xi = gen.sample(task.feature_dim, task.n_classes, 2.0);
      const auto loss = [&](const ParamVector& v) { return sample_loss(task, v, xi); };
      worst = std::max(worst, testsupport::vec_rel_err(sample_grad(task, w, xi),
                                                       testsupport::fd_grad(loss, w, 1e-5)));
    }
    out.require(worst <= 1e-6, name + " rel err " + fmt("%.3g", worst));
    out.note(name + " max rel err " + fmt("%.2e", worst) + " over 120 points");
  }
  return out;
}

// ---- 4. heterogeneity oracle -----------------------------------------------------------

Outcome heterogeneity_oracle() {
  Outcome out;
  const auto fed = make_federation({{Sample{{0.0}, 0}}, {Sample{{2.0}, 0}}}, 1, 1);
  const auto task1 = TaskModel::quadratic(1);
  const std::vector<ParamVector> probes{ParamVector{0.0}, ParamVector{-3.0}, ParamVector{4.5}};
  const auto rep = estimate_H(task1, fed, cluster_singleton(fed), probes);
  const auto gamma = estimate_Gamma(task1, fed, cluster_singleton(fed));
  out.require(std::abs(rep.h_device - 1.0) <= 1e-10, "H_device " + fmt("%.17g", rep.h_device));
  out.require(std::abs(gamma.device - 0.5) <= 1e-10, "Gamma_device " + fmt("%.17g", gamma.device));

  Gen gen(404);
  int violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = gen.integer(2, 16), M = gen.integer(1, n), d = gen.integer(1, 4);
    const auto f = gen.federation(n, d, 3, 1, 6, 3.0);
    const Clustering cl(gen.assignment(n, M), M, f);
    const auto task = TaskModel::quadratic(d);
    const auto h = estimate_H(task, f, cl, default_probes(gen.vec(d, 2.0), 4, 1.0, trial));
    const auto g = estimate_Gamma(task, f, cl);
    if (h.h_cluster > h.h_device + 1e-12 || g.cluster > g.device + 1e-12) ++violations;
  }
  out.require(violations == 0, std::to_string(violations) + " orderings violated");
  out.note("fixture H=" + fmt("%.12g", rep.h_device) + " Gamma=" + fmt("%.12g", gamma.device) +
           ", 100 random clusterings ordered");
  return out;
}

// ---- 5. strongly convex rate ------------------------------------------------------------

Outcome strongly_convex_rate(ThreadPool& pool) {
  Outcome out;
  constexpr int kClusters = 4, kSteps = 5, kSeeds = 20;
  const auto task = TaskModel::quadratic(5);
  std::vector<std::pair<double, double>> points;
  for (int rounds : {100, 400, 1600}) {
    double mean_gap = 0.0;
    double bound = std::numeric_limits<double>::infinity();
    for (int seed = 1; seed <= kSeeds; ++seed) {
      const auto fed = partition(synth_pool(4, 5, 200, 2.0, seed), {32, 20, 0.5, std::uint64_t(seed)});
      const auto cl = cluster_random_uniform(fed, kClusters, seed);
      const Problem problem{task, fed, cl, initial_params(task, seed)};
      RunConfig cfg;
      cfg.rounds = rounds;
      cfg.local_steps = kSteps;
      cfg.participation = 1.0;
      cfg.schedule = LrSchedule::inverse_time(1.0, 1.0, kClusters, kSteps);
      cfg.seed = seed;
      RunOptions opts;
      opts.pool = &pool;
      const RunLog log = run(problem, cfg, opts);
      const auto analytic = quadratic_analytic(task, fed, cl);
      mean_gap += (log.final_loss - analytic.f_star) / kSeeds;

      auto probes = default_probes(analytic.w_star, 8, 2.0, seed);
      probes.push_back(problem.initial);
      const auto est = estimate_constants(task, fed, probes, 16, seed);
      BoundInputs in;
      in.smoothness = 1.0;
      in.mu = 1.0;
      in.g_sq = 2.0 * est.g_sq_hat;
      in.s_sq = est.s_sq_hat;
      in.set_partition(fed, cl);
      in.gamma_cluster = estimate_Gamma(task, fed, cl).cluster;
      in.rounds = rounds;
      in.clusters = kClusters;
      in.local_steps = kSteps;
      bound = std::min(bound, bound_strongly_convex(in).bound);
    }
    const double budget = double(rounds) * kClusters * kSteps;
    points.emplace_back(budget, mean_gap);
    out.require(mean_gap <= bound, "gap " + fmt("%.4g", mean_gap) + " above bound " + fmt("%.4g", bound) +
                                       " at TME=" + fmt("%.0f", budget));
    out.note("TME=" + fmt("%.0f", budget) + " gap=" + fmt("%.4g", mean_gap) + " bound=" + fmt("%.4g", bound));
  }
  const double slope = rate_fit(points).slope;
  out.require(std::abs(slope + 1.0) <= 0.2, "slope outside -1.0 +/- 0.2");
  out.note("slope=" + fmt("%.3f", slope));
  return out;
}

// ---- 6. nonconvex rate ------------------------------------------------------------------

Outcome nonconvex_rate(ThreadPool& pool) {
  Outcome out;
  constexpr int kClusters = 4, kSteps = 10, kSeeds = 10;
  const auto task = TaskModel::mlp(10, 4, 32);
  std::vector<std::pair<double, double>> points;
  for (int rounds : {100, 400, 1600}) {
    double mean = 0.0;
    for (int seed = 1; seed <= kSeeds; ++seed) {
      const auto fed = partition(synth_pool(4, 10, 200, 2.0, seed), {16, 20, 0.5, std::uint64_t(seed)});
      const Problem problem{task, fed, cluster_random_uniform(fed, kClusters, seed),
                            initial_params(task, seed)};
      RunConfig cfg;
      cfg.rounds = rounds;
      cfg.local_steps = kSteps;
      cfg.participation = 1.0;
      cfg.schedule = LrSchedule::constant_theory(rounds, kClusters, kSteps);
      cfg.seed = seed;
      RunOptions opts;
      opts.pool = &pool;
      mean += avg_grad_norm(run(problem, cfg, opts)) / kSeeds;
    }
    const double budget = double(rounds) * kClusters * kSteps;
    points.emplace_back(budget, mean);
    out.note("TME=" + fmt("%.0f", budget) + " avg_grad_norm=" + fmt("%.4g", mean));
  }
  const double slope = rate_fit(points).slope;
  out.require(std::abs(slope + 0.5) <= 0.2, "slope outside -0.5 +/- 0.2");
  out.note("slope=" + fmt("%.3f", slope));
  return out;
}

// ---- 7-9. softmax trends --------------------------------------------------------------

constexpr int kTrendSeeds = 5;
constexpr int kTrendRounds = 60;
constexpr double kTrendEta = 0.1;

Federation trend_federation(int seed) {
  return partition(synth_pool(10, 20, 600, 2.0, seed), {100, 50, 0.5, std::uint64_t(seed)});
}

// Rounds until the train loss reaches 60% of its initial value; kNeverReached otherwise.
int trend_rounds(const Federation& fed, const Clustering& cl, int seed, ThreadPool& pool) {
  const auto task = TaskModel::softmax(20, 10);
  const Problem problem{task, fed, cl, initial_params(task, seed)};
  RunConfig cfg;
  cfg.rounds = kTrendRounds;
  cfg.local_steps = 20;
  cfg.participation = 0.1;
  cfg.schedule = LrSchedule::constant(kTrendEta / cl.clusters());
  cfg.optimizer.batch = 5;
  cfg.seed = seed;
  RunOptions opts;
  opts.pool = &pool;
  const RunLog log = run(problem, cfg, opts);
  const auto r = rounds_to_target(log, 0.6 * log.records.front().train_loss);
  return r ? *r : kNeverReached;
}

std::vector<int> random_uniform_rounds(int clusters, ThreadPool& pool) {
  std::vector<int> rounds;
  for (int seed = 1; seed <= kTrendSeeds; ++seed) {
    const auto fed = trend_federation(seed);
    const auto cl = clusters == 1 ? cluster_all(fed) : cluster_random_uniform(fed, clusters, seed);
    rounds.push_back(trend_rounds(fed, cl, seed, pool));
  }
  return rounds;
}

Outcome cluster_speedup(ThreadPool& pool) {
  Outcome out;
  const auto fedavg = random_uniform_rounds(1, pool);
  const auto fc = random_uniform_rounds(10, pool);
  out.require(median(fc) <= median(fedavg), "FedCluster median above FedAvg");
  out.note("FedAvg rounds [" + join(fedavg) + "] median " + std::to_string(median(fedavg)));
  out.note("M=10 rounds [" + join(fc) + "] median " + std::to_string(median(fc)));
  return out;
}

Outcome cluster_sweep(ThreadPool& pool) {
  Outcome out;
  std::vector<int> medians;
  for (int M : {5, 10, 20}) {
    const auto r = random_uniform_rounds(M, pool);
    medians.push_back(median(r));
    out.note("M=" + std::to_string(M) + " median " + std::to_string(medians.back()));
  }
  int inversions = 0;
  for (std::size_t i = 1; i < medians.size(); ++i) {
    if (medians[i] <= medians[i - 1]) continue;
    ++inversions;
    out.require(medians[i] <= 1.1 * medians[i - 1], "inversion beyond the 10% band");
  }
  out.require(inversions <= 1, std::to_string(inversions) + " inversions");
  return out;
}

Outcome rho_cluster_trend(ThreadPool& pool) {
  Outcome out;
  const auto task = TaskModel::softmax(20, 10);
  std::vector<double> h;
  std::vector<int> medians;
  for (double rho : {0.1, 0.5, 0.9}) {
    std::vector<int> rounds;
    double mean_h = 0.0;
    for (int seed = 1; seed <= kTrendSeeds; ++seed) {
      const auto fed = trend_federation(seed);
      const auto cl = cluster_major_class(fed, 10, rho, seed);
      mean_h += estimate_H(task, fed, cl, default_probes(initial_params(task, seed), 8, 1.0, seed)).h_cluster /
                kTrendSeeds;
      rounds.push_back(trend_rounds(fed, cl, seed, pool));
    }
    h.push_back(mean_h);
    medians.push_back(median(rounds));
    out.note("rho_cluster=" + fmt("%.1f", rho) + " H_cluster=" + fmt("%.4g", mean_h) + " median rounds " +
             std::to_string(medians.back()));
  }
  out.require(medians.front() <= 1.1 * medians.back(), "rho_cluster 0.1 slower than 1.1x rho_cluster 0.9");
  out.require(h[0] < h[1] && h[1] < h[2], "H_cluster not strictly increasing");
  return out;
}

// ---- 10. constant formulas ------------------------------------------------------------

Outcome constant_formulas() {
  Outcome out;
  const auto close = [&](double got, double want, const std::string& what) {
    out.require(std::abs(got - want) <= 1e-9, what + " = " + fmt("%.17g", got));
  };
  close(lr_value(LrSchedule::constant_theory(100, 10, 20), 0, 0, 0), 1.0 / std::sqrt(20000.0),
        "constant_theory lr");
  const auto inv = LrSchedule::inverse_time(1.0, 1.0, 10, 20);
  close(inv.gamma(), 200.0, "inverse_time gamma");
  close(lr_value(inv, 0, 0, 0), 0.01, "inverse_time lr");

  BoundInputs nc;
  nc.smoothness = 1.0;
  nc.f0_gap = 1.0;
  nc.rounds = 100;
  nc.clusters = 10;
  nc.local_steps = 20;
  const auto b = bound_nonconvex(nc);
  close(b.c, 2.0, "C");
  close(b.bound, 4.0 / std::sqrt(20000.0), "nonconvex bound");
  close(required_rounds(nc, 0.1), 8.0, "required_rounds");

  BoundInputs sc = nc;
  sc.mu = 1.0;
  sc.g_sq = 1.0;
  sc.gamma_cluster = 0.0;
  const auto s = bound_strongly_convex(sc);
  close(s.gamma, 200.0, "strongly convex gamma");
  close(s.b, 1100.0, "B");
  // L (gamma G^2 + 4 B) / (2 mu^2 T M E) = (200 + 4400) / 40000.
  close(s.bound, 0.115, "strongly convex bound");
  out.note("9 values within 1e-9");
  return out;
}

// ---- 11. interface conformance -------------------------------------------------------

int count_elements(const boost::property_tree::ptree& tree, const std::string& name) {
  int n = 0;
  for (const auto& [key, child] : tree) n += (key == name) + count_elements(child, name);
  return n;
}

long long ingest_offset(const testsupport::TempDir& dir, const std::string& img, const std::string& lbl) {
  testsupport::write_bytes(dir / "img", img);
  testsupport::write_bytes(dir / "lbl", lbl);
  try {
    load_idx(dir / "img", dir / "lbl");
  } catch (const IngestError& e) {
    return static_cast<long long>(e.offset());
  }
  return -1;
}

Outcome interface_conformance() {
  Outcome out;
  std::ostringstream sink;
  CommandContext ctx;
  ctx.out = &sink;
  ctx.err = &sink;
  const int clean = cmd_verify({}, std::nullopt, ctx);
  VerifyOptions faulty;
  faulty.faults = {"quadratic-grad-sign"};
  const int broken = cmd_verify(faulty, std::nullopt, ctx);
  VerifyOptions unknown;
  unknown.faults = {"no-such-fault"};
  const int bad_fault = cmd_verify(unknown, std::nullopt, ctx);
  out.require(clean == kExitOk, "verify exit " + std::to_string(clean));
  out.require(broken == kExitVerifyFailed, "verify with fault exit " + std::to_string(broken));
  out.require(bad_fault == kExitConfig, "verify with unknown fault exit " + std::to_string(bad_fault));
  out.require(!testing::quadratic_grad_sign_fault(), "fault left enabled");

  testsupport::TempDir dir("acceptance");
  RunLog log;
  log.records.resize(2);
  log.records[1].round = 1;
  write_metrics_csv(dir / "m.csv", {{RunLabel{"id", "fedcluster", 1}, &log}});
  const std::string csv = testsupport::read_file(dir / "m.csv");
  const std::string header = "run_id,algorithm,seed,round,cycle_count,train_loss,grad_sq_norm,lr,wall_ms\n";
  out.require(csv.compare(0, header.size(), header) == 0, "CSV header differs");

  const std::string svg = render_svg({{"a <&> b", {0, 1, 2}, {1.0, 0.5, 0.25}}, {"c", {0, 1}, {2.0, 1.0}}},
                                     "round", "train_loss", true);
  try {
    std::istringstream in(svg);
    boost::property_tree::ptree tree;
    boost::property_tree::read_xml(in, tree);
    out.require(tree.count("svg") == 1 && count_elements(tree, "polyline") == 2, "SVG structure");
  } catch (const std::exception& e) {
    out.require(false, std::string("SVG parse: ") + e.what());
  }

  const auto img = testsupport::idx_images(10, 4, 4, 255);
  const auto lbl = testsupport::idx_labels(10);
  out.require(ingest_offset(dir, img, lbl) == -1, "well-formed IDX rejected");
  const auto pool = load_idx(dir / "img", dir / "lbl");
  out.require(pool.size() == 10 && pool.feature_dim == 16 && pool.by_class[0][0].features[0] == 1.0,
              "IDX contents");
  out.require(ingest_offset(dir, img, testsupport::idx_labels(9)) == 4, "count mismatch offset");
  out.require(ingest_offset(dir, testsupport::idx_images(10, 4, 4, 0, 0x802), lbl) == 0, "bad magic offset");
  const auto short_img = img.substr(0, img.size() - 3);
  out.require(ingest_offset(dir, short_img, lbl) == static_cast<long long>(short_img.size()),
              "truncation offset");
  bool io_error = false;
  try {
    load_idx(dir / "absent", dir / "lbl");
  } catch (const IoError&) {
    io_error = true;
  }
  out.require(io_error, "missing IDX file is not an IoError");
  out.note("verify exits 0/4/2, header, SVG and IDX checks");
  return out;
}

struct Criterion {
  int id;
  std::string name;
  double limit_seconds;
  std::function<Outcome()> body;
};

}  // namespace

int main() {
  ThreadPool pool(std::max<std::size_t>(1, default_thread_count()));
  const std::vector<Criterion> criteria{
      {1, "reduction equivalence", 60, reduction_equivalence},
      {2, "determinism", 120, determinism},
      {3, "gradient correctness", 60, gradient_correctness},
      {4, "heterogeneity oracle", 60, heterogeneity_oracle},
      {5, "strongly convex rate", 300, [&] { return strongly_convex_rate(pool); }},
      {6, "nonconvex rate", 900, [&] { return nonconvex_rate(pool); }},
      {7, "cluster speedup", 600, [&] { return cluster_speedup(pool); }},
      {8, "cluster count trend", 900, [&] { return cluster_sweep(pool); }},
      {9, "rho_cluster trend", 600, [&] { return rho_cluster_trend(pool); }},
      {10, "constant formulas", 1, constant_formulas},
      {11, "interface conformance", 60, interface_conformance},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    o.require(seconds < c.limit_seconds, "runtime over " + fmt("%.0f", c.limit_seconds) + " s");
    failures += !o.passed;
    std::printf("%s [%d] %s (%.1f s): %s\n", o.passed ? "PASS" : "FAIL", c.id, c.name.c_str(), seconds,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
