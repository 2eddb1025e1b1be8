// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#include "fedcluster/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "fedcluster/analysis.hpp"
#include "fedcluster/clustering.hpp"
#include "fedcluster/error.hpp"
#include "fedcluster/parallel.hpp"
#include "fedcluster/report.hpp"

namespace fedcluster {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::ostream& out_of(const CommandContext& ctx) { return ctx.out ? *ctx.out : std::cout; }
std::ostream& err_of(const CommandContext& ctx) { return ctx.err ? *ctx.err : std::cerr; }

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string short_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

json bound_block(const BoundInputs& in) {
  json b;
  const auto nc = bound_nonconvex(in);
  b["nonconvex"] = {{"C", nc.c}, {"bound", nc.bound}};
  if (in.mu) {
    const auto sc = bound_strongly_convex(in);
    b["strongly_convex"] = {{"gamma", sc.gamma}, {"B", sc.b}, {"bound", sc.bound}};
  } else {
    b["strongly_convex"] = nullptr;
  }
  return b;
}

std::string csv_safe(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const UnsupportedTaskError*>(&e))
    return kExitConfig;
  if (dynamic_cast<const DivergenceError*>(&e)) return kExitDivergence;
  return kExitIo;
}

int guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    const char* kind = code == kExitConfig       ? "configuration error"
                       : code == kExitDivergence ? "divergence"
                       : dynamic_cast<const IoError*>(&e) || dynamic_cast<const IngestError*>(&e)
                           ? "I/O error"
                           : "error";
    err << "fedcluster: " << kind << ": " << e.what() << '\n';
    return code;
  }
}

RunOutcome execute(const ExperimentConfig& cfg, std::size_t threads) {
  Problem p = build_problem(cfg);
  const RunConfig rc = build_run_config(cfg, p.clustering.clusters());
  RunOptions opt;
  opt.threads = std::max<std::size_t>(threads, 1);

  RunOutcome outcome;
  outcome.run_id = effective_run_id(cfg);
  outcome.log = cfg.algorithm == Algorithm::FedAvg ? run_fedavg(p, rc, opt) : run(p, rc, opt);
  const RunLog& log = outcome.log;

  const bool quad = p.task.kind == TaskKind::QuadraticMean;
  std::optional<AnalyticSolution> an;
  if (quad) an = quadratic_analytic(p.task, p.federation, p.clustering);

  std::vector<ParamVector> probes =
      default_probes(p.initial, cfg.analysis.probes, cfg.analysis.radius, cfg.seed);
  if (an) probes.push_back(an->w_star);
  probes.push_back(log.final_model);

  const auto est = estimate_constants(p.task, p.federation, probes, cfg.analysis.samples_per_probe,
                                      cfg.seed);
  const auto het = estimate_H(p.task, p.federation, p.clustering, probes);
  std::optional<GammaPair> gamma;
  if (quad) gamma = estimate_Gamma(p.task, p.federation, p.clustering);

  const double initial_loss = log.records.front().train_loss;
  const double inf_f = an ? an->f_star : 0.0;

  BoundInputs in;
  in.smoothness = est.l_hat;
  if (quad) in.mu = 1.0;
  in.g_sq = est.g_sq_hat;
  in.s_sq = est.s_sq_hat;
  in.set_partition(p.federation, p.clustering);
  in.h_cluster = het.h_cluster;
  if (gamma) in.gamma_cluster = gamma->cluster;
  in.f0_gap = std::max(0.0, initial_loss - inf_f);
  in.rounds = cfg.rounds;
  in.local_steps = cfg.local_steps;
  BoundInputs inflated = in;
  inflated.smoothness *= 2.0;
  inflated.g_sq *= 2.0;
  if (inflated.mu && *inflated.mu > inflated.smoothness) inflated.mu = inflated.smoothness;

  std::vector<std::string> warnings;
  if (cfg.schedule.kind == ScheduleKind::ConstantTheory)
    warnings = nonconvex_precondition_warnings(in);
  if (cfg.participation < 1.0)
    warnings.push_back("participation < 1: the bounds assume full participation and are reported for reference only");

  const double target = cfg.analysis.target_fraction * initial_loss;
  const auto rtt = rounds_to_target(log, target);
  double wall = 0.0;
  for (const auto& r : log.records) wall += r.wall_ms;

  double s_max = 0.0;
  for (double s : est.s_sq_hat) s_max = std::max(s_max, s);

  outcome.summary = {
      {"run_id", outcome.run_id},
      {"algorithm", to_string(cfg.algorithm)},
      {"seed", cfg.seed},
      {"task", to_string(p.task.kind)},
      {"devices", p.federation.size()},
      {"clusters", p.clustering.clusters()},
      {"rounds", cfg.rounds},
      {"local_steps", cfg.local_steps},
      {"participation", cfg.participation},
      {"initial_loss", initial_loss},
      {"final_loss", log.final_loss},
      {"final_grad_sq_norm", log.final_grad_sq_norm},
      {"avg_grad_norm", avg_grad_norm(log)},
      {"target_loss", target},
      {"rounds_to_target", rtt ? json(*rtt) : json(nullptr)},
      {"f_star", an ? json(an->f_star) : json(nullptr)},
      {"final_gap", an ? json(log.final_loss - an->f_star) : json(nullptr)},
      {"constants",
       {{"L_hat", est.l_hat},
        {"G_hat", est.g_hat},
        {"G_sq_hat", est.g_sq_hat},
        {"s_sq_hat_max", s_max},
        {"s_sq_hat", est.s_sq_hat},
        {"mu", optional_json(in.mu)},
        {"f0_gap", in.f0_gap},
        {"note", "empirical estimates over probe points; lower bounds on the true suprema"}}},
      {"heterogeneity",
       {{"h_device", het.h_device},
        {"h_cluster", het.h_cluster},
        {"gamma_device", gamma ? json(gamma->device) : json(nullptr)},
        {"gamma_cluster", gamma ? json(gamma->cluster) : json(nullptr)}}},
      {"bounds", bound_block(in)},
      {"bounds_inflated_x2", bound_block(inflated)},
      {"warnings", warnings},
      {"wall_ms_total", wall},
  };
  return outcome;
}

void write_run_directory(const fs::path& dir, const ExperimentConfig& cfg, const RunOutcome& o) {
  write_text_file(dir / "config.resolved.json", to_json(cfg).dump(2) + "\n");
  write_metrics_csv(dir / "metrics.csv",
                    {{RunLabel{o.run_id, to_string(cfg.algorithm), cfg.seed}, &o.log}});
  write_text_file(dir / "summary.json", o.summary.dump(2) + "\n");
}

int cmd_run(const fs::path& config_path, const CommandContext& ctx) {
  return guarded(
      [&] {
        ExperimentConfig base = load_config(config_path);
        if (ctx.out_dir) base.output_dir = ctx.out_dir->string();
        base.sweep.reset();
        const std::vector<std::uint64_t> seeds =
            ctx.seeds.empty() ? std::vector<std::uint64_t>{base.seed} : ctx.seeds;
        for (std::uint64_t seed : seeds) {
          ExperimentConfig c = base;
          c.seed = seed;
          c.partition.seed = seed;
          const fs::path dir = seeds.size() == 1 ? fs::path(c.output_dir)
                                                 : fs::path(c.output_dir) / ("seed_" + std::to_string(seed));
          c.output_dir = dir.string();
          // Echo the config first so a failed run can be reproduced.
          write_text_file(dir / "config.resolved.json", to_json(c).dump(2) + "\n");
          const RunOutcome o = execute(c, ctx.threads);
          write_run_directory(dir, c, o);
          const auto& s = o.summary;
          out_of(ctx) << o.run_id << ": final_loss=" << format_real(o.log.final_loss)
                      << " avg_grad_norm=" << format_real(s["avg_grad_norm"].get<double>())
                      << " rounds_to_target="
                      << (s["rounds_to_target"].is_null() ? std::string("none")
                                                          : std::to_string(s["rounds_to_target"].get<int>()))
                      << " -> " << dir.string() << '\n';
          for (const auto& w : s["warnings"]) err_of(ctx) << "warning: " << w.get<std::string>() << '\n';
        }
        return int{kExitOk};
      },
      err_of(ctx));
}

std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& cfg,
                                           const std::vector<std::uint64_t>& seed_override) {
  if (!cfg.sweep) throw ConfigError("config: 'sweep' section is required for a sweep");
  const SweepSection& sw = *cfg.sweep;

  const auto ms = sw.clusters.empty() ? std::vector<int>{cfg.clusters} : sw.clusters;
  const auto rds = sw.rho_device.empty() ? std::vector<double>{cfg.partition.rho_device} : sw.rho_device;
  const auto rcs = sw.rho_cluster.empty() ? std::vector<double>{cfg.rho_cluster} : sw.rho_cluster;
  const auto opts = sw.optimizers.empty() ? std::vector<LocalOptimizerSpec>{cfg.optimizer} : sw.optimizers;
  const auto seeds = !seed_override.empty() ? seed_override
                     : sw.seeds.empty()     ? std::vector<std::uint64_t>{cfg.seed}
                                            : sw.seeds;

  std::map<std::string, int> kind_count;
  for (const auto& o : opts) ++kind_count[to_string(o.kind)];
  auto opt_label = [&](std::size_t i) {
    const std::string k = to_string(opts[i].kind);
    return kind_count[k] > 1 ? k + std::to_string(i) : k;
  };

  std::vector<ExperimentConfig> cells;
  std::set<std::string> ids;
  auto add = [&](ExperimentConfig c, const std::string& id) {
    if (!ids.insert(id).second) return;
    c.run_id = id;
    c.sweep.reset();
    c.output_dir = (fs::path(cfg.output_dir) / id).string();
    cells.push_back(std::move(c));
  };

  for (int m : ms)
    for (double rd : rds)
      for (double rc : rcs)
        for (std::size_t oi = 0; oi < opts.size(); ++oi)
          for (std::uint64_t seed : seeds) {
            ExperimentConfig c = cfg;
            c.clusters = m;
            c.partition.rho_device = rd;
            c.rho_cluster = rc;
            c.optimizer = opts[oi];
            c.seed = seed;
            c.partition.seed = seed;

            auto id_for = [&](Algorithm a) {
              std::string id = to_string(a);
              if (a == Algorithm::FedCluster) {
                id += "_M" + std::to_string(m);
                if (!sw.rho_cluster.empty()) id += "_rc" + short_real(rc);
              }
              if (!sw.rho_device.empty()) id += "_rd" + short_real(rd);
              if (!sw.optimizers.empty()) id += "_" + opt_label(oi);
              return id + "_s" + std::to_string(seed);
            };
            add(c, id_for(c.algorithm));
            if (sw.include_fedavg && c.algorithm != Algorithm::FedAvg) {
              ExperimentConfig f = c;
              f.algorithm = Algorithm::FedAvg;
              add(f, id_for(Algorithm::FedAvg));
            }
          }
  return cells;
}

int cmd_sweep(const fs::path& config_path, const CommandContext& ctx) {
  return guarded(
      [&] {
        ExperimentConfig cfg = load_config(config_path);
        if (ctx.out_dir) cfg.output_dir = ctx.out_dir->string();
        const auto cells = expand_sweep(cfg, ctx.seeds);

        struct CellReport {
          bool ok = false;
          int code = kExitOk;
          std::string error;
          json summary;
        };
        std::vector<CellReport> reports(cells.size());
        const std::size_t workers = std::clamp<std::size_t>(ctx.threads, 1, cells.size());
        ThreadPool pool(workers);
        pool.parallel_for(cells.size(), [&](std::size_t i) {
          CellReport& r = reports[i];
          const ExperimentConfig& c = cells[i];
          try {
            write_text_file(fs::path(c.output_dir) / "config.resolved.json", to_json(c).dump(2) + "\n");
            const RunOutcome o = execute(c, 1);
            write_run_directory(c.output_dir, c, o);
            r.summary = o.summary;
            r.ok = true;
          } catch (const std::exception& e) {
            r.code = exit_code_for(e);
            r.error = e.what();
          }
        });

        std::ostringstream table;
        table << "run_id,algorithm,M,rho_device,rho_cluster,optimizer,seed,status,initial_loss,"
                 "final_loss,target_loss,rounds_to_target,avg_grad_norm,h_cluster\n";
        json cell_json = json::array();
        bool any_failed = false;
        for (std::size_t i = 0; i < cells.size(); ++i) {
          const ExperimentConfig& c = cells[i];
          const CellReport& r = reports[i];
          const bool fedavg = c.algorithm == Algorithm::FedAvg;
          table << c.run_id << ',' << to_string(c.algorithm) << ',' << (fedavg ? 1 : c.clusters) << ','
                << short_real(c.partition.rho_device) << ','
                << (fedavg ? std::string() : short_real(c.rho_cluster)) << ','
                << to_string(c.optimizer.kind) << ',' << c.seed << ',';
          json entry{{"run_id", c.run_id}, {"ok", r.ok}};
          if (r.ok) {
            const json& s = r.summary;
            table << "ok," << format_real(s["initial_loss"].get<double>()) << ','
                  << format_real(s["final_loss"].get<double>()) << ','
                  << format_real(s["target_loss"].get<double>()) << ','
                  << (s["rounds_to_target"].is_null() ? std::string()
                                                      : std::to_string(s["rounds_to_target"].get<int>()))
                  << ',' << format_real(s["avg_grad_norm"].get<double>()) << ','
                  << format_real(s["heterogeneity"]["h_cluster"].get<double>()) << '\n';
            entry["summary"] = s;
            out_of(ctx) << "[ok]     " << c.run_id << '\n';
          } else {
            any_failed = true;
            table << "failed: " << csv_safe(r.error) << ",,,,,,\n";
            entry["error"] = r.error;
            entry["exit_code"] = r.code;
            err_of(ctx) << "[failed] " << c.run_id << ": " << r.error << '\n';
          }
          cell_json.push_back(std::move(entry));
        }
        write_text_file(fs::path(cfg.output_dir) / "summary.csv", table.str());
        write_text_file(fs::path(cfg.output_dir) / "summary.json",
                        json{{"cells", std::move(cell_json)}}.dump(2) + "\n");
        out_of(ctx) << cells.size() << " cells -> " << cfg.output_dir << '\n';
        return any_failed ? int{kExitDivergence} : int{kExitOk};
      },
      err_of(ctx));
}

int cmd_hetero(const fs::path& config_path, const CommandContext& ctx) {
  return guarded(
      [&] {
        ExperimentConfig cfg = load_config(config_path);
        if (ctx.out_dir) cfg.output_dir = ctx.out_dir->string();
        if (!ctx.seeds.empty()) {
          cfg.seed = ctx.seeds.front();
          cfg.partition.seed = cfg.seed;
        }
        const Problem p = build_problem(cfg);
        std::vector<ParamVector> probes =
            default_probes(p.initial, cfg.analysis.probes, cfg.analysis.radius, cfg.seed);
        std::optional<GammaPair> gamma;
        if (p.task.kind == TaskKind::QuadraticMean) {
          probes.push_back(quadratic_analytic(p.task, p.federation, p.clustering).w_star);
          gamma = estimate_Gamma(p.task, p.federation, p.clustering);
        }
        const auto h = estimate_H(p.task, p.federation, p.clustering, probes);
        const json report{
            {"task", to_string(p.task.kind)},
            {"devices", p.federation.size()},
            {"clusters", p.clustering.clusters()},
            {"probes", probes.size()},
            {"h_device", h.h_device},
            {"h_cluster", h.h_cluster},
            {"gamma_available", gamma.has_value()},
            {"gamma_device", gamma ? json(gamma->device) : json(nullptr)},
            {"gamma_cluster", gamma ? json(gamma->cluster) : json(nullptr)},
        };
        write_text_file(fs::path(cfg.output_dir) / "hetero.json", report.dump(2) + "\n");
        out_of(ctx) << report.dump(2) << '\n';
        return int{kExitOk};
      },
      err_of(ctx));
}

int cmd_verify(const VerifyOptions& options, const std::optional<fs::path>& json_path,
               const CommandContext& ctx) {
  return guarded(
      [&] {
        const auto results = run_verify_suite(options);
        const json report = verify_report_json(results, options);
        std::ostream& log = json_path ? out_of(ctx) : err_of(ctx);
        for (const auto& r : results)
          log << (r.passed ? "PASS " : "FAIL ") << r.name << (r.passed ? "" : ": " + r.detail) << '\n';
        if (json_path)
          write_text_file(*json_path, report.dump(2) + "\n");
        else
          out_of(ctx) << report.dump(2) << '\n';
        return report["ok"].get<bool>() ? int{kExitOk} : int{kExitVerifyFailed};
      },
      err_of(ctx));
}

int cmd_plot(const std::vector<fs::path>& csv_paths, const fs::path& out_svg,
             const std::string& x_field, const std::string& y_field, bool log_y,
             const CommandContext& ctx) {
  return guarded(
      [&] {
        if (csv_paths.empty()) throw ConfigError("plot: at least one CSV is required");
        std::vector<PlotSeries> series;
        std::vector<std::string> header;
        for (const auto& path : csv_paths) {
          const CsvTable t = read_csv(path);
          if (header.empty())
            header = t.header;
          else if (t.header != header)
            throw ConfigError("plot: schema mismatch, '" + path.string() +
                              "' has a different header than '" + csv_paths.front().string() + "'");
          const int xi = t.column(x_field), yi = t.column(y_field);
          if (xi < 0) throw ConfigError("plot: field '" + x_field + "' not in '" + path.string() + "'");
          if (yi < 0) throw ConfigError("plot: field '" + y_field + "' not in '" + path.string() + "'");
          const int id_col = t.column("run_id");

          PlotSeries s;
          std::vector<std::string> ids;
          for (std::size_t r = 0; r < t.rows.size(); ++r) {
            auto parse = [&](int col, const std::string& field) {
              const std::string& cell = t.rows[r][col];
              std::size_t used = 0;
              double v = 0.0;
              try {
                v = std::stod(cell, &used);
              } catch (const std::exception&) {
                used = 0;
              }
              if (used == 0 || used != cell.size())
                throw ConfigError("plot: '" + path.string() + "' row " + std::to_string(r + 1) +
                                  " field '" + field + "' is not numeric: '" + cell + "'");
              return v;
            };
            const double x = parse(xi, x_field), y = parse(yi, y_field);
            if (log_y && !(y > 0.0))
              throw ConfigError("plot: log_y requested but '" + path.string() + "' row " +
                                std::to_string(r + 1) + " has " + y_field + " = " + t.rows[r][yi]);
            s.x.push_back(x);
            s.y.push_back(y);
            if (id_col >= 0 && std::find(ids.begin(), ids.end(), t.rows[r][id_col]) == ids.end())
              ids.push_back(t.rows[r][id_col]);
          }
          if (ids.empty()) {
            s.label = path.stem().string();
          } else {
            for (std::size_t i = 0; i < ids.size(); ++i) s.label += (i ? "+" : "") + ids[i];
          }
          series.push_back(std::move(s));
        }
        write_text_file(out_svg, render_svg(series, x_field, y_field, log_y));
        out_of(ctx) << series.size() << " series -> " << out_svg.string() << '\n';
        return int{kExitOk};
      },
      err_of(ctx));
}

}  // namespace fedcluster
