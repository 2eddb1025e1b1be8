// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fedcluster/tasks.hpp"

namespace fedcluster {

/// Samples grouped by class label.
struct SamplePool {
  int n_classes = 0;
  int feature_dim = 0;
  std::vector<std::vector<Sample>> by_class;

  std::size_t size() const;
};

struct DeviceDataset {
  int device_id = 0;
  std::vector<Sample> samples;
  int major_class = 0;
  double weight = 0.0;  // p_k = |D_k| / |D|
};

struct Federation {
  std::vector<DeviceDataset> devices;
  int n_classes = 0;
  int feature_dim = 0;

  std::size_t size() const noexcept { return devices.size(); }
  std::vector<double> weights() const;
};

struct PartitionConfig {
  int n_devices = 100;
  int samples_per_device = 50;
  double rho_device = 0.5;
  std::uint64_t seed = 1;
};

/// Class-conditional Gaussian pool: class c has mean of norm `spread` along a
/// random direction and unit isotropic noise. Deterministic in `seed`.
SamplePool synth_pool(int n_classes, int feature_dim, int samples_per_class, double spread,
                      std::uint64_t seed);

/// Reads an IDX3 image file (magic 0x00000803) and IDX1 label file (0x00000801).
/// Pixels are scaled to [0, 1]. Throws IngestError with the failing byte offset.
SamplePool load_idx(const std::filesystem::path& images_path,
                    const std::filesystem::path& labels_path);

/// Per-class sample counts of one device: round(rho * S) from the major class,
/// the remainder split evenly over the other classes with leftover samples
/// going to the lowest-indexed other classes.
std::vector<int> device_class_counts(int n_classes, int samples_per_device, double rho_device,
                                     int major_class);

/// Builds a non-iid federation. Device k has major class k % n_classes and
/// draws its samples with replacement from the pool.
Federation partition(const SamplePool& pool, const PartitionConfig& cfg);

/// Federation built directly from per-device sample lists; weights are
/// proportional to dataset sizes.
Federation make_federation(std::vector<std::vector<Sample>> device_samples, int n_classes,
                           int feature_dim);

}  // namespace fedcluster
