// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#include "fedcluster/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "fedcluster/error.hpp"

namespace fedcluster {

using nlohmann::json;

namespace {

std::string join_path(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

// Typed accessor over one JSON object that rejects keys outside `allowed`.
class Section {
 public:
  Section(const json& j, std::string path, std::set<std::string> allowed)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      throw ConfigError("config: '" + (path_.empty() ? std::string("<root>") : path_) +
                        "' must be an object");
    for (const auto& [key, value] : j_.items()) {
      (void)value;
      if (!allowed.count(key)) throw ConfigError("config: unknown key '" + name(key) + "'");
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  const json& at(const std::string& key) const { return j_.at(key); }
  std::string name(const std::string& key) const { return join_path(path_, key); }

  long long integer(const std::string& key, long long fallback, long long min_value) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_number_integer())
      throw ConfigError("config: '" + name(key) + "' must be an integer");
    const long long x = v.get<long long>();
    if (x < min_value)
      throw ConfigError("config: '" + name(key) + "' must be >= " + std::to_string(min_value) +
                        " (got " + std::to_string(x) + ")");
    return x;
  }

  std::uint64_t seed(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      throw ConfigError("config: '" + name(key) + "' must be a nonnegative integer");
    return v.get<std::uint64_t>();
  }

  double real(const std::string& key, double fallback, double lo, double hi,
              bool lo_open = false) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_number()) throw ConfigError("config: '" + name(key) + "' must be a number");
    const double x = v.get<double>();
    const bool below = lo_open ? !(x > lo) : !(x >= lo);
    if (!std::isfinite(x) || below || x > hi) {
      std::ostringstream os;
      os << "config: '" << name(key) << "' must lie in " << (lo_open ? "(" : "[") << lo << ", "
         << hi << "] (got " << x << ")";
      throw ConfigError(os.str());
    }
    return x;
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!at(key).is_boolean()) throw ConfigError("config: '" + name(key) + "' must be a boolean");
    return at(key).get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    if (!at(key).is_string()) throw ConfigError("config: '" + name(key) + "' must be a string");
    return at(key).get<std::string>();
  }

 private:
  const json& j_;
  std::string path_;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

ScheduleKind schedule_kind_from_string(const std::string& s, const std::string& key) {
  if (s == "constant_theory") return ScheduleKind::ConstantTheory;
  if (s == "constant") return ScheduleKind::ConstantExplicit;
  if (s == "inverse_time") return ScheduleKind::InverseTime;
  throw ConfigError("config: '" + key + "' must be one of constant_theory, constant, inverse_time");
}

template <typename F>
auto translate(const std::string& key, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError("config: '" + key + "': " + e.what());
  }
}

LocalOptimizerSpec parse_optimizer(const json& j, const std::string& path) {
  LocalOptimizerSpec o;
  if (j.is_string()) {
    o.kind = translate(path, [&] { return optimizer_kind_from_string(j.get<std::string>()); });
    return o;
  }
  Section s(j, path, {"kind", "momentum", "beta1", "beta2", "epsilon", "mu_prox", "batch"});
  const std::string kind = s.string("kind", "sgd");
  o.kind = translate(s.name("kind"), [&] { return optimizer_kind_from_string(kind); });
  o.momentum = s.real("momentum", o.momentum, 0.0, 1.0);
  if (o.momentum >= 1.0) throw ConfigError("config: '" + s.name("momentum") + "' must be < 1");
  o.beta1 = s.real("beta1", o.beta1, 0.0, 1.0);
  o.beta2 = s.real("beta2", o.beta2, 0.0, 1.0);
  if (o.beta1 >= 1.0 || o.beta2 >= 1.0)
    throw ConfigError("config: '" + s.name("beta1") + "' and '" + s.name("beta2") +
                      "' must be < 1");
  o.epsilon = s.real("epsilon", o.epsilon, 0.0, kInf, true);
  o.mu_prox = s.real("mu_prox", o.mu_prox, 0.0, kInf);
  o.batch = static_cast<int>(s.integer("batch", o.batch, 1));
  return o;
}

json optimizer_json(const LocalOptimizerSpec& o) {
  return json{{"kind", to_string(o.kind)}, {"momentum", o.momentum}, {"beta1", o.beta1},
              {"beta2", o.beta2},          {"epsilon", o.epsilon},   {"mu_prox", o.mu_prox},
              {"batch", o.batch}};
}

Sample parse_inline_sample(const json& j, const std::string& path) {
  Sample s;
  const json* x = &j;
  if (j.is_object()) {
    Section sec(j, path, {"x", "label"});
    if (!sec.has("x")) throw ConfigError("config: '" + sec.name("x") + "' is required");
    x = &sec.at("x");
    s.label = static_cast<int>(sec.integer("label", 0, 0));
  }
  if (!x->is_array() || x->empty())
    throw ConfigError("config: '" + path + "' must be a non-empty array of numbers");
  for (const auto& v : *x) {
    if (!v.is_number()) throw ConfigError("config: '" + path + "' must contain only numbers");
    s.features.push_back(v.get<double>());
  }
  return s;
}

DataSection parse_data(const json& j) {
  Section s(j, "data",
            {"source", "n_classes", "feature_dim", "samples_per_class", "spread", "images",
             "labels", "devices"});
  DataSection d;
  d.source = s.string("source", d.source);
  if (d.source == "synthetic") {
    d.n_classes = static_cast<int>(s.integer("n_classes", d.n_classes, 1));
    d.feature_dim = static_cast<int>(s.integer("feature_dim", d.feature_dim, 1));
    d.samples_per_class = static_cast<int>(s.integer("samples_per_class", d.samples_per_class, 1));
    d.spread = s.real("spread", d.spread, 0.0, kInf);
  } else if (d.source == "idx") {
    d.images = s.string("images", "");
    d.labels = s.string("labels", "");
    if (d.images.empty() || d.labels.empty())
      throw ConfigError("config: 'data.images' and 'data.labels' are required for idx data");
  } else if (d.source == "inline") {
    if (!s.has("devices") || !s.at("devices").is_array() || s.at("devices").empty())
      throw ConfigError("config: 'data.devices' must be a non-empty array for inline data");
    const json& devs = s.at("devices");
    for (std::size_t k = 0; k < devs.size(); ++k) {
      const std::string path = "data.devices[" + std::to_string(k) + "]";
      if (!devs[k].is_array() || devs[k].empty())
        throw ConfigError("config: '" + path + "' must be a non-empty array of samples");
      std::vector<Sample> samples;
      for (std::size_t i = 0; i < devs[k].size(); ++i)
        samples.push_back(parse_inline_sample(devs[k][i], path + "[" + std::to_string(i) + "]"));
      d.devices.push_back(std::move(samples));
    }
    const std::size_t dim = d.devices.front().front().features.size();
    int max_label = 0;
    for (const auto& dev : d.devices)
      for (const auto& smp : dev) {
        if (smp.features.size() != dim)
          throw ConfigError("config: 'data.devices' samples must share one feature dimension");
        max_label = std::max(max_label, smp.label);
      }
    d.feature_dim = static_cast<int>(dim);
    d.n_classes = max_label + 1;
  } else {
    throw ConfigError("config: 'data.source' must be one of synthetic, idx, inline");
  }
  return d;
}

template <typename T, typename F>
std::vector<T> parse_axis(const Section& s, const std::string& key, F&& convert) {
  std::vector<T> out;
  if (!s.has(key)) return out;
  const json& v = s.at(key);
  if (!v.is_array()) throw ConfigError("config: '" + s.name(key) + "' must be an array");
  if (v.empty()) throw ConfigError("config: sweep axis '" + s.name(key) + "' is empty");
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(convert(v[i], s.name(key) + "[" + std::to_string(i) + "]"));
  return out;
}

double axis_real(const json& v, const std::string& path, double lo, double hi) {
  if (!v.is_number()) throw ConfigError("config: '" + path + "' must be a number");
  const double x = v.get<double>();
  if (!(x >= lo && x <= hi))
    throw ConfigError("config: '" + path + "' is out of range");
  return x;
}

SweepSection parse_sweep(const json& j) {
  Section s(j, "sweep", {"M", "rho_device", "rho_cluster", "optimizer", "seed", "include_fedavg"});
  SweepSection sw;
  sw.clusters = parse_axis<int>(s, "M", [](const json& v, const std::string& p) {
    if (!v.is_number_integer() || v.get<long long>() < 1)
      throw ConfigError("config: '" + p + "' (M) must be an integer >= 1");
    return static_cast<int>(v.get<long long>());
  });
  sw.rho_device = parse_axis<double>(s, "rho_device", [](const json& v, const std::string& p) {
    return axis_real(v, p, 0.0, 1.0);
  });
  sw.rho_cluster = parse_axis<double>(s, "rho_cluster", [](const json& v, const std::string& p) {
    return axis_real(v, p, 0.0, 1.0);
  });
  sw.optimizers = parse_axis<LocalOptimizerSpec>(
      s, "optimizer", [](const json& v, const std::string& p) { return parse_optimizer(v, p); });
  sw.seeds = parse_axis<std::uint64_t>(s, "seed", [](const json& v, const std::string& p) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      throw ConfigError("config: '" + p + "' must be a nonnegative integer");
    return v.get<std::uint64_t>();
  });
  sw.include_fedavg = s.boolean("include_fedavg", false);
  if (sw.clusters.empty() && sw.rho_device.empty() && sw.rho_cluster.empty() &&
      sw.optimizers.empty() && sw.seeds.empty())
    throw ConfigError("config: 'sweep' lists no axes");
  return sw;
}

}  // namespace

std::string to_string(Algorithm a) { return a == Algorithm::FedAvg ? "fedavg" : "fedcluster"; }

ExperimentConfig parse_config(const json& doc) {
  Section root(doc, "",
               {"algorithm", "seed", "task", "data", "partition", "clustering", "engine",
                "schedule", "optimizer", "analysis", "sweep", "output", "comment"});
  ExperimentConfig c;

  const std::string algo = root.string("algorithm", "fedcluster");
  if (algo == "fedcluster")
    c.algorithm = Algorithm::FedCluster;
  else if (algo == "fedavg")
    c.algorithm = Algorithm::FedAvg;
  else
    throw ConfigError("config: 'algorithm' must be fedcluster or fedavg");
  c.seed = root.seed("seed", c.seed);
  c.comment = root.string("comment", "");

  if (root.has("task")) {
    Section s(root.at("task"), "task", {"kind", "hidden"});
    const std::string kind = s.string("kind", to_string(c.task));
    c.task = translate("task.kind", [&] { return task_kind_from_string(kind); });
    c.hidden = static_cast<int>(s.integer("hidden", c.hidden, 1));
  }
  if (root.has("data")) c.data = parse_data(root.at("data"));

  if (root.has("partition")) {
    Section s(root.at("partition"), "partition", {"n_devices", "samples_per_device", "rho_device"});
    c.partition.n_devices = static_cast<int>(s.integer("n_devices", c.partition.n_devices, 1));
    c.partition.samples_per_device =
        static_cast<int>(s.integer("samples_per_device", c.partition.samples_per_device, 1));
    c.partition.rho_device = s.real("rho_device", c.partition.rho_device, 0.0, 1.0);
  }
  c.partition.seed = c.seed;

  if (root.has("clustering")) {
    Section s(root.at("clustering"), "clustering", {"strategy", "M", "rho_cluster"});
    const std::string strat = s.string("strategy", to_string(c.strategy));
    c.strategy = translate("clustering.strategy", [&] { return cluster_strategy_from_string(strat); });
    c.clusters = static_cast<int>(s.integer("M", c.clusters, 1));
    c.rho_cluster = s.real("rho_cluster", c.rho_cluster, 0.0, 1.0);
  }

  if (root.has("engine")) {
    Section s(root.at("engine"), "engine",
              {"rounds", "local_steps", "participation", "reshuffle", "strict_weights"});
    c.rounds = static_cast<int>(s.integer("rounds", c.rounds, 1));
    c.local_steps = static_cast<int>(s.integer("local_steps", c.local_steps, 1));
    c.participation = s.real("participation", c.participation, 0.0, 1.0, true);
    c.reshuffle = s.boolean("reshuffle", c.reshuffle);
    c.strict_weights = s.boolean("strict_weights", c.strict_weights);
  }

  if (root.has("schedule")) {
    Section s(root.at("schedule"), "schedule", {"kind", "eta", "scale_with_clusters", "mu", "L"});
    c.schedule.kind = schedule_kind_from_string(s.string("kind", to_string(c.schedule.kind)),
                                                "schedule.kind");
    c.schedule.eta = s.real("eta", c.schedule.eta, 0.0, kInf, true);
    c.schedule.scale_with_clusters = s.boolean("scale_with_clusters", c.schedule.scale_with_clusters);
    c.schedule.mu = s.real("mu", c.schedule.mu, 0.0, kInf, true);
    c.schedule.smoothness = s.real("L", c.schedule.smoothness, 0.0, kInf, true);
    if (c.schedule.mu > c.schedule.smoothness)
      throw ConfigError("config: 'schedule.mu' must not exceed 'schedule.L'");
  }

  if (root.has("optimizer")) c.optimizer = parse_optimizer(root.at("optimizer"), "optimizer");

  if (root.has("analysis")) {
    Section s(root.at("analysis"), "analysis",
              {"probes", "radius", "samples_per_probe", "target_fraction"});
    c.analysis.probes = static_cast<int>(s.integer("probes", c.analysis.probes, 2));
    c.analysis.radius = s.real("radius", c.analysis.radius, 0.0, kInf, true);
    c.analysis.samples_per_probe =
        static_cast<int>(s.integer("samples_per_probe", c.analysis.samples_per_probe, 1));
    c.analysis.target_fraction = s.real("target_fraction", c.analysis.target_fraction, 0.0, kInf, true);
  }

  if (root.has("sweep")) c.sweep = parse_sweep(root.at("sweep"));

  if (root.has("output")) {
    Section s(root.at("output"), "output", {"dir", "run_id"});
    c.output_dir = s.string("dir", c.output_dir);
    c.run_id = s.string("run_id", "");
    if (c.run_id.find_first_of("/\\,\"\n") != std::string::npos)
      throw ConfigError("config: 'output.run_id' must not contain '/', '\\\\', ',', quotes or newlines");
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: malformed JSON in '" + path.string() + "': " + e.what());
  }
  ExperimentConfig c = parse_config(doc);
  if (c.data.source == "idx") {
    const auto base = path.parent_path();
    auto resolve = [&](std::string& p) {
      std::filesystem::path fp(p);
      if (fp.is_relative()) p = (base / fp).lexically_normal().string();
    };
    resolve(c.data.images);
    resolve(c.data.labels);
  }
  return c;
}

json to_json(const ExperimentConfig& c) {
  json data{{"source", c.data.source}};
  if (c.data.source == "synthetic") {
    data["n_classes"] = c.data.n_classes;
    data["feature_dim"] = c.data.feature_dim;
    data["samples_per_class"] = c.data.samples_per_class;
    data["spread"] = c.data.spread;
  } else if (c.data.source == "idx") {
    data["images"] = c.data.images;
    data["labels"] = c.data.labels;
  } else {
    json devs = json::array();
    for (const auto& dev : c.data.devices) {
      json d = json::array();
      for (const auto& s : dev) d.push_back(json{{"x", s.features}, {"label", s.label}});
      devs.push_back(std::move(d));
    }
    data["devices"] = std::move(devs);
  }

  json doc{
      {"algorithm", to_string(c.algorithm)},
      {"seed", c.seed},
      {"task", {{"kind", to_string(c.task)}, {"hidden", c.hidden}}},
      {"data", std::move(data)},
      {"partition",
       {{"n_devices", c.partition.n_devices},
        {"samples_per_device", c.partition.samples_per_device},
        {"rho_device", c.partition.rho_device}}},
      {"clustering",
       {{"strategy", to_string(c.strategy)}, {"M", c.clusters}, {"rho_cluster", c.rho_cluster}}},
      {"engine",
       {{"rounds", c.rounds},
        {"local_steps", c.local_steps},
        {"participation", c.participation},
        {"reshuffle", c.reshuffle},
        {"strict_weights", c.strict_weights}}},
      {"schedule",
       {{"kind", to_string(c.schedule.kind)},
        {"eta", c.schedule.eta},
        {"scale_with_clusters", c.schedule.scale_with_clusters},
        {"mu", c.schedule.mu},
        {"L", c.schedule.smoothness}}},
      {"optimizer", optimizer_json(c.optimizer)},
      {"analysis",
       {{"probes", c.analysis.probes},
        {"radius", c.analysis.radius},
        {"samples_per_probe", c.analysis.samples_per_probe},
        {"target_fraction", c.analysis.target_fraction}}},
      {"output", {{"dir", c.output_dir}, {"run_id", c.run_id}}},
      {"comment", c.comment},
  };
  if (c.sweep) {
    json sw{{"include_fedavg", c.sweep->include_fedavg}};
    if (!c.sweep->clusters.empty()) sw["M"] = c.sweep->clusters;
    if (!c.sweep->rho_device.empty()) sw["rho_device"] = c.sweep->rho_device;
    if (!c.sweep->rho_cluster.empty()) sw["rho_cluster"] = c.sweep->rho_cluster;
    if (!c.sweep->seeds.empty()) sw["seed"] = c.sweep->seeds;
    if (!c.sweep->optimizers.empty()) {
      json opts = json::array();
      for (const auto& o : c.sweep->optimizers) opts.push_back(optimizer_json(o));
      sw["optimizer"] = std::move(opts);
    }
    doc["sweep"] = std::move(sw);
  }
  return doc;
}

std::string effective_run_id(const ExperimentConfig& c) {
  if (!c.run_id.empty()) return c.run_id;
  std::string id = to_string(c.algorithm);
  if (c.algorithm == Algorithm::FedCluster) id += "_M" + std::to_string(c.clusters);
  return id + "_s" + std::to_string(c.seed);
}

Federation build_federation(const ExperimentConfig& c) {
  if (c.data.source == "inline") {
    return make_federation(c.data.devices, c.data.n_classes, c.data.feature_dim);
  }
  SamplePool pool = c.data.source == "idx"
                        ? load_idx(c.data.images, c.data.labels)
                        : synth_pool(c.data.n_classes, c.data.feature_dim,
                                     c.data.samples_per_class, c.data.spread, c.seed);
  PartitionConfig pc = c.partition;
  pc.seed = c.seed;
  return partition(pool, pc);
}

TaskModel build_task(const ExperimentConfig& c, const Federation& fed) {
  switch (c.task) {
    case TaskKind::QuadraticMean: return TaskModel::quadratic(fed.feature_dim);
    case TaskKind::SoftmaxRegression: return TaskModel::softmax(fed.feature_dim, fed.n_classes);
    case TaskKind::Mlp1Hidden: return TaskModel::mlp(fed.feature_dim, fed.n_classes, c.hidden);
  }
  throw InternalError("unknown task kind");
}

Clustering build_clustering(const ExperimentConfig& c, const Federation& fed) {
  if (c.algorithm == Algorithm::FedAvg) return cluster_all(fed);
  if (c.clusters > static_cast<int>(fed.size()))
    throw ConfigError("config: 'clustering.M' = " + std::to_string(c.clusters) +
                      " exceeds the number of devices (" + std::to_string(fed.size()) + ")");
  ClusterPlanConfig pc;
  pc.strategy = c.strategy;
  pc.clusters = c.clusters;
  pc.rho_cluster = c.rho_cluster;
  pc.seed = c.seed;
  return make_clustering(fed, pc);
}

Problem build_problem(const ExperimentConfig& c) {
  Federation fed = build_federation(c);
  TaskModel task = build_task(c, fed);
  Clustering clustering = build_clustering(c, fed);
  ParamVector init = initial_params(task, c.seed);
  return Problem{task, std::move(fed), std::move(clustering), std::move(init)};
}

RunConfig build_run_config(const ExperimentConfig& c, int effective_clusters) {
  RunConfig rc;
  rc.rounds = c.rounds;
  rc.local_steps = c.local_steps;
  rc.participation = c.participation;
  rc.reshuffle = c.reshuffle;
  rc.strict_weights = c.strict_weights;
  rc.optimizer = c.optimizer;
  rc.seed = c.seed;
  switch (c.schedule.kind) {
    case ScheduleKind::ConstantTheory:
      rc.schedule = LrSchedule::constant_theory(c.rounds, effective_clusters, c.local_steps);
      break;
    case ScheduleKind::ConstantExplicit:
      rc.schedule = LrSchedule::constant(
          c.schedule.scale_with_clusters ? c.schedule.eta / effective_clusters : c.schedule.eta);
      break;
    case ScheduleKind::InverseTime:
      rc.schedule = LrSchedule::inverse_time(c.schedule.mu, c.schedule.smoothness,
                                             effective_clusters, c.local_steps);
      break;
  }
  return rc;
}

}  // namespace fedcluster
