// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fedcluster/commands.hpp"
#include "fedcluster/parallel.hpp"

namespace {

// Accepts "1,2,3" and "1-4" ranges.
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    const auto dash = part.find('-');
    if (dash == std::string::npos) {
      seeds.push_back(std::stoull(part));
    } else {
      const auto lo = std::stoull(part.substr(0, dash));
      const auto hi = std::stoull(part.substr(dash + 1));
      if (hi < lo) throw std::invalid_argument("descending seed range '" + part + "'");
      for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    }
  }
  if (seeds.empty()) throw std::invalid_argument("empty seed list");
  return seeds;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace fedcluster;
  CLI::App app{"Clustered federated learning simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string seeds_text;
  std::size_t threads = 0;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config,-c", config_path, "Experiment config (JSON)");
    if (needs_config) opt->required();
    sub->add_option("--out,-o", out_dir, "Output directory (overrides output.dir)");
    sub->add_option("--threads,-j", threads,
                    "Worker threads (default: FEDCLUSTER_THREADS, else hardware concurrency)");
    sub->add_option("--seeds", seeds_text, "Seed list, e.g. 1,2,3 or 1-5");
  };

  auto* run = app.add_subcommand("run", "Run one experiment");
  add_common(run, true);
  auto* sweep = app.add_subcommand("sweep", "Run the Cartesian product of the sweep axes");
  add_common(sweep, true);
  auto* hetero = app.add_subcommand("hetero", "Report device- and cluster-level heterogeneity");
  add_common(hetero, true);

  auto* verify = app.add_subcommand("verify", "Run the property battery");
  std::vector<std::string> faults;
  std::string verify_json;
  verify->add_option("--threads,-j", threads, "Threads for the thread-invariance property");
  verify->add_option("--json", verify_json, "Write the JSON report here instead of stdout");
  verify->add_option("--inject-fault", faults, "Test hook: inject a named fault")
      ->check(CLI::IsMember(known_faults()));

  auto* plot = app.add_subcommand("plot", "Render metrics CSVs as an SVG line chart");
  std::vector<std::string> csvs;
  std::string svg_path;
  std::string x_field = "round", y_field = "train_loss";
  bool log_y = false;
  plot->add_option("csv", csvs, "Metrics CSV files")->required();
  plot->add_option("--out,-o", svg_path, "Output SVG path")->required();
  plot->add_option("--x", x_field, "X column")->capture_default_str();
  plot->add_option("--y", y_field, "Y column")->capture_default_str();
  plot->add_flag("--log-y", log_y, "Logarithmic y axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    // Usage errors are configuration errors; --help stays 0.
    return code == 0 ? 0 : kExitConfig;
  }

  CommandContext ctx;
  ctx.threads = threads > 0 ? threads : default_thread_count();
  if (!out_dir.empty()) ctx.out_dir = out_dir;
  if (!seeds_text.empty()) {
    try {
      ctx.seeds = parse_seeds(seeds_text);
    } catch (const std::exception& e) {
      std::cerr << "fedcluster: configuration error: --seeds: " << e.what() << '\n';
      return kExitConfig;
    }
  }

  if (*run) return cmd_run(config_path, ctx);
  if (*sweep) return cmd_sweep(config_path, ctx);
  if (*hetero) return cmd_hetero(config_path, ctx);
  if (*verify) {
    VerifyOptions vo;
    vo.faults = faults;
    vo.threads = std::max<std::size_t>(ctx.threads, 2);
    return cmd_verify(vo, verify_json.empty() ? std::nullopt
                                              : std::optional<std::filesystem::path>(verify_json),
                      ctx);
  }
  if (*plot) {
    std::vector<std::filesystem::path> paths(csvs.begin(), csvs.end());
    return cmd_plot(paths, svg_path, x_field, y_field, log_y, ctx);
  }
  return kExitConfig;
}
