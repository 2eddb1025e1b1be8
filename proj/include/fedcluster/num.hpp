// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace fedcluster {

/// Flat model parameter vector. Dimension is fixed at construction.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t dim, double fill = 0.0) : values_(dim, fill) {}
  explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}
  ParamVector(std::initializer_list<double> values) : values_(values) {}

  std::size_t dim() const noexcept { return values_.size(); }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  const std::vector<double>& raw() const noexcept { return values_; }

  bool all_finite() const noexcept;

  bool operator==(const ParamVector&) const = default;

 private:
  std::vector<double> values_;
};

/// Component-wise sum of weights[i] * vectors[i], accumulated in ascending index order.
///
/// When the weights sum to one (within 1e-12) the result is evaluated as the
/// convex combination v0 + sum_i w_i (v_i - v0), so a list of identical vectors
/// reproduces that vector bit-exactly.
/// Throws ConfigError on an empty list, a length mismatch or a dimension mismatch.
ParamVector weighted_sum(std::span<const ParamVector> vectors, std::span<const double> weights);

double sq_norm(const ParamVector& v);
double dot(const ParamVector& a, const ParamVector& b);

// y += alpha * x
void axpy(double alpha, const ParamVector& x, ParamVector& y);

ParamVector operator-(const ParamVector& a, const ParamVector& b);
ParamVector operator+(const ParamVector& a, const ParamVector& b);
ParamVector operator*(double s, const ParamVector& a);

}  // namespace fedcluster
