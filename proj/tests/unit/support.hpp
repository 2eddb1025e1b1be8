// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Independent oracles and generators shared by the unit tests. Nothing here
// calls into the library code it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "fedcluster/fedsets.hpp"
#include "fedcluster/num.hpp"
#include "fedcluster/tasks.hpp"

namespace testsupport {

using fedcluster::ParamVector;
using fedcluster::Sample;

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

/// Central finite-difference gradient of `loss` at w.
template <typename Loss>
ParamVector fd_grad(const Loss& loss, const ParamVector& w, double h = 1e-5) {
  ParamVector g(w.dim());
  ParamVector probe = w;
  for (std::size_t i = 0; i < w.dim(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = loss(probe);
    probe[i] = orig - h;
    const double down = loss(probe);
    probe[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Relative error in the max norm, scaled by max(1, |a|_inf).
inline double vec_rel_err(const ParamVector& a, const ParamVector& b) {
  double diff = 0.0, scale = 1.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return diff / scale;
}

inline double max_abs_diff(const ParamVector& a, const ParamVector& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

/// Test-side generator; std::mt19937_64 keeps it unrelated to the library RNG.
struct Gen {
  std::mt19937_64 eng;
  explicit Gen(std::uint64_t seed) : eng(seed) {}

  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng); }

  ParamVector vec(std::size_t dim, double scale = 1.0) {
    ParamVector v(dim);
    for (std::size_t i = 0; i < dim; ++i) v[i] = real(-scale, scale);
    return v;
  }

  Sample sample(int dim, int n_classes, double scale = 1.0) {
    Sample s;
    s.features.resize(dim);
    for (auto& x : s.features) x = real(-scale, scale);
    s.label = integer(0, n_classes - 1);
    return s;
  }

  /// Federation with uneven device sizes and random features.
  fedcluster::Federation federation(int n_devices, int dim, int n_classes, int min_samples = 1,
                                    int max_samples = 6, double scale = 2.0) {
    std::vector<std::vector<Sample>> devices(n_devices);
    for (auto& d : devices) {
      const int n = integer(min_samples, max_samples);
      for (int i = 0; i < n; ++i) d.push_back(sample(dim, n_classes, scale));
    }
    return fedcluster::make_federation(std::move(devices), n_classes, dim);
  }

  /// Random total assignment into exactly `clusters` non-empty groups.
  std::vector<int> assignment(int n, int clusters) {
    std::vector<int> a(n);
    for (int k = 0; k < n; ++k) a[k] = k < clusters ? k : integer(0, clusters - 1);
    std::shuffle(a.begin(), a.end(), eng);
    return a;
  }
};

/// Quadratic objective sum_k p_k mean_i 0.5 |w - x_ki|^2 evaluated directly.
inline double quadratic_objective(const fedcluster::Federation& fed, const ParamVector& w) {
  double total = 0.0;
  for (const auto& d : fed.devices) {
    double s = 0.0;
    for (const auto& x : d.samples) {
      double r = 0.0;
      for (std::size_t i = 0; i < w.dim(); ++i) r += (w[i] - x.features[i]) * (w[i] - x.features[i]);
      s += 0.5 * r;
    }
    total += d.weight * s / static_cast<double>(d.samples.size());
  }
  return total;
}

/// Minimizer of the quadratic objective by gradient descent with step 1 (exact for
/// unit curvature after one step, iterated for safety).
inline ParamVector quadratic_minimizer_by_descent(const fedcluster::Federation& fed, int dim) {
  ParamVector w(dim);
  for (int it = 0; it < 3; ++it) {
    ParamVector g(dim);
    for (const auto& d : fed.devices)
      for (const auto& x : d.samples)
        for (int i = 0; i < dim; ++i)
          g[i] += d.weight * (w[i] - x.features[i]) / static_cast<double>(d.samples.size());
    for (int i = 0; i < dim; ++i) w[i] -= g[i];
  }
  return w;
}

/// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) {
    path = std::filesystem::temp_directory_path() /
           ("fedcluster_test_" + name + "_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  static int& counter() {
    static int n = 0;
    return n;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& leaf) const { return path / leaf; }
};

inline void put_be32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

inline std::string idx_images(std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                              unsigned char fill = 0, std::uint32_t magic = 0x00000803) {
  std::string out;
  put_be32(out, magic);
  put_be32(out, count);
  put_be32(out, rows);
  put_be32(out, cols);
  out.append(static_cast<std::size_t>(count) * rows * cols, static_cast<char>(fill));
  return out;
}

inline std::string idx_labels(std::uint32_t count, std::uint32_t magic = 0x00000801) {
  std::string out;
  put_be32(out, magic);
  put_be32(out, count);
  for (std::uint32_t i = 0; i < count; ++i) out.push_back(static_cast<char>(i % 10));
  return out;
}

inline void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

}  // namespace testsupport
