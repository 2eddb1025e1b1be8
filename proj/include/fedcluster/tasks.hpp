// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedcluster/num.hpp"

namespace fedcluster {

struct Sample {
  std::vector<double> features;
  int label = 0;
};

enum class TaskKind { QuadraticMean, SoftmaxRegression, Mlp1Hidden };

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& name);

/// Loss family with its shape.
///
/// Parameter layouts (row-major):
///   QuadraticMean:     w (feature_dim); f(w; x) = 0.5 * |w - x|^2, labels ignored
///   SoftmaxRegression: W (n_classes x feature_dim), b (n_classes); cross-entropy
///   Mlp1Hidden:        W1 (hidden x feature_dim), b1 (hidden), W2 (n_classes x hidden),
///                      b2 (n_classes); tanh hidden layer, cross-entropy output
struct TaskModel {
  TaskKind kind = TaskKind::QuadraticMean;
  int feature_dim = 1;
  int n_classes = 2;
  int hidden = 32;

  static TaskModel quadratic(int feature_dim) { return {TaskKind::QuadraticMean, feature_dim, 1, 0}; }
  static TaskModel softmax(int feature_dim, int n_classes) {
    return {TaskKind::SoftmaxRegression, feature_dim, n_classes, 0};
  }
  static TaskModel mlp(int feature_dim, int n_classes, int hidden = 32) {
    return {TaskKind::Mlp1Hidden, feature_dim, n_classes, hidden};
  }

  std::size_t param_count() const;
};

double sample_loss(const TaskModel& task, const ParamVector& w, const Sample& xi);
ParamVector sample_grad(const TaskModel& task, const ParamVector& w, const Sample& xi);

/// Adds scale * grad f(w; xi) into `out` without allocating a result vector.
void accumulate_sample_grad(const TaskModel& task, const ParamVector& w, const Sample& xi,
                            double scale, ParamVector& out);

/// Mean loss over `data`, accumulated in index order. Throws ConfigError when empty.
double dataset_loss(const TaskModel& task, const ParamVector& w, std::span<const Sample> data);
/// Mean gradient over `data`: sum in index order, then scale by 1/|data|.
ParamVector dataset_grad(const TaskModel& task, const ParamVector& w, std::span<const Sample> data);

/// Initial model shared by every algorithm run under one master seed. Zero for
/// the convex families; symmetric uniform with scale 1/sqrt(fan_in) for the MLP.
ParamVector initial_params(const TaskModel& task, std::uint64_t master_seed);

namespace testing {

/// Fault hook for the verification suite: flips the sign of the quadratic
/// gradient process-wide. Never enabled outside `verify --inject-fault`.
void set_quadratic_grad_sign_fault(bool enabled) noexcept;
bool quadratic_grad_sign_fault() noexcept;

}  // namespace testing
}  // namespace fedcluster
