// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#include "fedcluster/tasks.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "fedcluster/error.hpp"
#include "fedcluster/rng.hpp"

namespace fedcluster {
namespace {

std::atomic<bool> g_quadratic_sign_fault{false};

void check_shapes(const TaskModel& task, const ParamVector& w, const Sample& xi) {
  if (w.dim() != task.param_count())
    throw ConfigError("parameter dimension " + std::to_string(w.dim()) + " does not match task (" +
                      std::to_string(task.param_count()) + ")");
  if (xi.features.size() != static_cast<std::size_t>(task.feature_dim))
    throw ConfigError("sample feature dimension " + std::to_string(xi.features.size()) +
                      " does not match task (" + std::to_string(task.feature_dim) + ")");
  if (task.kind != TaskKind::QuadraticMean && (xi.label < 0 || xi.label >= task.n_classes))
    throw ConfigError("sample label " + std::to_string(xi.label) + " out of range");
}

// Overwrites logits with softmax probabilities.
void softmax_inplace(std::span<double> logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double& v : logits) {
    v = std::exp(v - peak);
    z += v;
  }
  for (double& v : logits) v /= z;
}

double cross_entropy(std::span<const double> logits, int label) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - peak);
  return std::log(z) + peak - logits[label];
}

// Logits of the linear softmax model.
void linear_logits(const TaskModel& task, std::span<const double> w, std::span<const double> x,
                   std::span<double> logits) {
  const int d = task.feature_dim;
  const double* bias = w.data() + static_cast<std::size_t>(task.n_classes) * d;
  for (int c = 0; c < task.n_classes; ++c) {
    const double* row = w.data() + static_cast<std::size_t>(c) * d;
    double s = bias[c];
    for (int i = 0; i < d; ++i) s += row[i] * x[i];
    logits[c] = s;
  }
}

struct MlpView {
  const double* w1;
  const double* b1;
  const double* w2;
  const double* b2;
};

MlpView mlp_view(const TaskModel& task, std::span<const double> w) {
  const std::size_t d = task.feature_dim, h = task.hidden, c = task.n_classes;
  MlpView v{};
  v.w1 = w.data();
  v.b1 = v.w1 + h * d;
  v.w2 = v.b1 + h;
  v.b2 = v.w2 + c * h;
  return v;
}

void mlp_forward(const TaskModel& task, const MlpView& v, std::span<const double> x,
                 std::vector<double>& hidden, std::vector<double>& logits) {
  const int d = task.feature_dim, h = task.hidden, c = task.n_classes;
  hidden.resize(h);
  logits.resize(c);
  for (int j = 0; j < h; ++j) {
    const double* row = v.w1 + static_cast<std::size_t>(j) * d;
    double s = v.b1[j];
    for (int i = 0; i < d; ++i) s += row[i] * x[i];
    hidden[j] = std::tanh(s);
  }
  for (int k = 0; k < c; ++k) {
    const double* row = v.w2 + static_cast<std::size_t>(k) * h;
    double s = v.b2[k];
    for (int j = 0; j < h; ++j) s += row[j] * hidden[j];
    logits[k] = s;
  }
}

}  // namespace

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::QuadraticMean: return "quadratic";
    case TaskKind::SoftmaxRegression: return "softmax";
    case TaskKind::Mlp1Hidden: return "mlp";
  }
  return "unknown";
}

TaskKind task_kind_from_string(const std::string& name) {
  if (name == "quadratic") return TaskKind::QuadraticMean;
  if (name == "softmax") return TaskKind::SoftmaxRegression;
  if (name == "mlp") return TaskKind::Mlp1Hidden;
  throw ConfigError("task.kind: unknown task '" + name + "' (expected quadratic, softmax or mlp)");
}

std::size_t TaskModel::param_count() const {
  const std::size_t d = feature_dim, c = n_classes, h = hidden;
  switch (kind) {
    case TaskKind::QuadraticMean: return d;
    case TaskKind::SoftmaxRegression: return c * d + c;
    case TaskKind::Mlp1Hidden: return h * d + h + c * h + c;
  }
  return 0;
}

double sample_loss(const TaskModel& task, const ParamVector& w, const Sample& xi) {
  check_shapes(task, w, xi);
  switch (task.kind) {
    case TaskKind::QuadraticMean: {
      double s = 0.0;
      for (int i = 0; i < task.feature_dim; ++i) {
        const double r = w[i] - xi.features[i];
        s += r * r;
      }
      return 0.5 * s;
    }
    case TaskKind::SoftmaxRegression: {
      std::vector<double> logits(task.n_classes);
      linear_logits(task, w.values(), xi.features, logits);
      return cross_entropy(logits, xi.label);
    }
    case TaskKind::Mlp1Hidden: {
      std::vector<double> hidden, logits;
      mlp_forward(task, mlp_view(task, w.values()), xi.features, hidden, logits);
      return cross_entropy(logits, xi.label);
    }
  }
  return 0.0;
}

void accumulate_sample_grad(const TaskModel& task, const ParamVector& w, const Sample& xi,
                            double scale, ParamVector& out) {
  check_shapes(task, w, xi);
  if (out.dim() != w.dim()) throw ConfigError("gradient buffer dimension mismatch");
  std::span<double> g = out.values();
  const int d = task.feature_dim;
  switch (task.kind) {
    case TaskKind::QuadraticMean: {
      const double s = g_quadratic_sign_fault.load(std::memory_order_relaxed) ? -scale : scale;
      for (int i = 0; i < d; ++i) g[i] += s * (w[i] - xi.features[i]);
      return;
    }
    case TaskKind::SoftmaxRegression: {
      const int c = task.n_classes;
      std::vector<double> probs(c);
      linear_logits(task, w.values(), xi.features, probs);
      softmax_inplace(probs);
      probs[xi.label] -= 1.0;
      double* gb = g.data() + static_cast<std::size_t>(c) * d;
      for (int k = 0; k < c; ++k) {
        const double delta = scale * probs[k];
        double* row = g.data() + static_cast<std::size_t>(k) * d;
        for (int i = 0; i < d; ++i) row[i] += delta * xi.features[i];
        gb[k] += delta;
      }
      return;
    }
    case TaskKind::Mlp1Hidden: {
      const int h = task.hidden, c = task.n_classes;
      const MlpView v = mlp_view(task, w.values());
      std::vector<double> hidden, probs;
      mlp_forward(task, v, xi.features, hidden, probs);
      softmax_inplace(probs);
      probs[xi.label] -= 1.0;

      const std::size_t off_b1 = static_cast<std::size_t>(h) * d;
      const std::size_t off_w2 = off_b1 + h;
      const std::size_t off_b2 = off_w2 + static_cast<std::size_t>(c) * h;
      std::vector<double> back(h, 0.0);
      for (int k = 0; k < c; ++k) {
        const double delta = probs[k];
        double* gw2 = g.data() + off_w2 + static_cast<std::size_t>(k) * h;
        const double* w2 = v.w2 + static_cast<std::size_t>(k) * h;
        for (int j = 0; j < h; ++j) {
          gw2[j] += scale * delta * hidden[j];
          back[j] += delta * w2[j];
        }
        g[off_b2 + k] += scale * delta;
      }
      for (int j = 0; j < h; ++j) {
        const double pre = back[j] * (1.0 - hidden[j] * hidden[j]);
        double* gw1 = g.data() + static_cast<std::size_t>(j) * d;
        for (int i = 0; i < d; ++i) gw1[i] += scale * pre * xi.features[i];
        g[off_b1 + j] += scale * pre;
      }
      return;
    }
  }
}

ParamVector sample_grad(const TaskModel& task, const ParamVector& w, const Sample& xi) {
  ParamVector g(w.dim());
  accumulate_sample_grad(task, w, xi, 1.0, g);
  return g;
}

double dataset_loss(const TaskModel& task, const ParamVector& w, std::span<const Sample> data) {
  if (data.empty()) throw ConfigError("dataset_loss: empty dataset");
  double s = 0.0;
  for (const Sample& xi : data) s += sample_loss(task, w, xi);
  return s / static_cast<double>(data.size());
}

ParamVector dataset_grad(const TaskModel& task, const ParamVector& w, std::span<const Sample> data) {
  if (data.empty()) throw ConfigError("dataset_grad: empty dataset");
  ParamVector g(w.dim());
  for (const Sample& xi : data) accumulate_sample_grad(task, w, xi, 1.0, g);
  const double inv = 1.0 / static_cast<double>(data.size());
  for (double& v : g.values()) v *= inv;
  return g;
}

ParamVector initial_params(const TaskModel& task, std::uint64_t master_seed) {
  ParamVector w(task.param_count());
  if (task.kind != TaskKind::Mlp1Hidden) return w;
  const std::size_t d = task.feature_dim, h = task.hidden;
  RngStream rng = derive_stream(master_seed, {tag("init"), tag("mlp")});
  const double s1 = 1.0 / std::sqrt(static_cast<double>(d));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(h));
  std::size_t i = 0;
  for (; i < h * d + h; ++i) w[i] = rng.uniform(-s1, s1);
  for (; i < w.dim(); ++i) w[i] = rng.uniform(-s2, s2);
  return w;
}

namespace testing {

void set_quadratic_grad_sign_fault(bool enabled) noexcept {
  g_quadratic_sign_fault.store(enabled, std::memory_order_relaxed);
}

bool quadratic_grad_sign_fault() noexcept {
  return g_quadratic_sign_fault.load(std::memory_order_relaxed);
}

}  // namespace testing
}  // namespace fedcluster
