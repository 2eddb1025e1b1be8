// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#include "fedcluster/num.hpp"

#include <cmath>
#include <string>

#include "fedcluster/error.hpp"

namespace fedcluster {

bool ParamVector::all_finite() const noexcept {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

ParamVector weighted_sum(std::span<const ParamVector> vectors, std::span<const double> weights) {
  if (vectors.empty()) throw ConfigError("weighted_sum: empty vector list");
  if (vectors.size() != weights.size())
    throw ConfigError("weighted_sum: " + std::to_string(vectors.size()) + " vectors but " +
                      std::to_string(weights.size()) + " weights");
  const std::size_t dim = vectors.front().dim();
  double total = 0.0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].dim() != dim)
      throw ConfigError("weighted_sum: dimension mismatch at item " + std::to_string(i));
    if (!std::isfinite(weights[i]))
      throw ConfigError("weighted_sum: non-finite weight at item " + std::to_string(i));
    total += weights[i];
  }

  if (std::abs(total - 1.0) <= 1e-12) {
    const ParamVector& anchor = vectors.front();
    ParamVector out = anchor;
    for (std::size_t c = 0; c < dim; ++c) {
      double acc = 0.0;
      for (std::size_t i = 1; i < vectors.size(); ++i) acc += weights[i] * (vectors[i][c] - anchor[c]);
      out[c] = anchor[c] + acc;
    }
    return out;
  }

  ParamVector out(dim);
  for (std::size_t i = 0; i < vectors.size(); ++i)
    for (std::size_t c = 0; c < dim; ++c) out[c] += weights[i] * vectors[i][c];
  return out;
}

double sq_norm(const ParamVector& v) {
  double s = 0.0;
  for (double x : v.values()) s += x * x;
  return s;
}

double dot(const ParamVector& a, const ParamVector& b) {
  if (a.dim() != b.dim()) throw ConfigError("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const ParamVector& x, ParamVector& y) {
  if (x.dim() != y.dim()) throw ConfigError("axpy: dimension mismatch");
  for (std::size_t i = 0; i < x.dim(); ++i) y[i] += alpha * x[i];
}

ParamVector operator-(const ParamVector& a, const ParamVector& b) {
  if (a.dim() != b.dim()) throw ConfigError("subtract: dimension mismatch");
  ParamVector out(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) out[i] = a[i] - b[i];
  return out;
}

ParamVector operator+(const ParamVector& a, const ParamVector& b) {
  if (a.dim() != b.dim()) throw ConfigError("add: dimension mismatch");
  ParamVector out(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) out[i] = a[i] + b[i];
  return out;
}

ParamVector operator*(double s, const ParamVector& a) {
  ParamVector out(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) out[i] = s * a[i];
  return out;
}

}  // namespace fedcluster
