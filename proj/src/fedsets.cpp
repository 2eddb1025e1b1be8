// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#include "fedcluster/fedsets.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include "fedcluster/error.hpp"
#include "fedcluster/rng.hpp"

namespace fedcluster {
namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset,
                        const std::string& what) {
  if (buf.size() < offset + 4) throw IngestError("truncated " + what, buf.size());
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

}  // namespace

std::size_t SamplePool::size() const {
  std::size_t n = 0;
  for (const auto& c : by_class) n += c.size();
  return n;
}

std::vector<double> Federation::weights() const {
  std::vector<double> p;
  p.reserve(devices.size());
  for (const auto& d : devices) p.push_back(d.weight);
  return p;
}

SamplePool synth_pool(int n_classes, int feature_dim, int samples_per_class, double spread,
                      std::uint64_t seed) {
  if (n_classes <= 0 || feature_dim <= 0 || samples_per_class <= 0)
    throw ConfigError("synth_pool: n_classes, feature_dim and samples_per_class must be positive");
  SamplePool pool;
  pool.n_classes = n_classes;
  pool.feature_dim = feature_dim;
  pool.by_class.resize(n_classes);
  for (int c = 0; c < n_classes; ++c) {
    RngStream mean_rng = derive_stream(seed, {tag("pool"), tag("mean"), static_cast<Label>(c)});
    std::vector<double> mean(feature_dim);
    double norm = 0.0;
    while (norm == 0.0) {
      norm = 0.0;
      for (double& m : mean) {
        m = mean_rng.normal();
        norm += m * m;
      }
      norm = std::sqrt(norm);
    }
    for (double& m : mean) m *= spread / norm;

    RngStream rng = derive_stream(seed, {tag("pool"), tag("sample"), static_cast<Label>(c)});
    auto& samples = pool.by_class[c];
    samples.reserve(samples_per_class);
    for (int s = 0; s < samples_per_class; ++s) {
      Sample xi;
      xi.label = c;
      xi.features.resize(feature_dim);
      for (int i = 0; i < feature_dim; ++i) xi.features[i] = mean[i] + rng.normal();
      samples.push_back(std::move(xi));
    }
  }
  return pool;
}

SamplePool load_idx(const std::filesystem::path& images_path,
                    const std::filesystem::path& labels_path) {
  const auto images = read_all(images_path);
  const auto labels = read_all(labels_path);

  const std::uint32_t img_magic = read_be32(images, 0, "image header");
  if (img_magic != kIdxImagesMagic) throw IngestError("bad image file magic", 0);
  const std::uint32_t n_images = read_be32(images, 4, "image header");
  const std::uint32_t rows = read_be32(images, 8, "image header");
  const std::uint32_t cols = read_be32(images, 12, "image header");

  const std::uint32_t lbl_magic = read_be32(labels, 0, "label header");
  if (lbl_magic != kIdxLabelsMagic) throw IngestError("bad label file magic", 0);
  const std::uint32_t n_labels = read_be32(labels, 4, "label header");

  if (n_images != n_labels)
    throw IngestError("count mismatch: " + std::to_string(n_images) + " images but " +
                          std::to_string(n_labels) + " labels",
                      4);

  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  const std::size_t img_need = 16 + pixels * n_images;
  if (images.size() < img_need)
    throw IngestError("truncated image data: expected " + std::to_string(img_need) + " bytes",
                      images.size());
  if (labels.size() < 8 + static_cast<std::size_t>(n_labels))
    throw IngestError("truncated label data: expected " + std::to_string(8 + n_labels) + " bytes",
                      labels.size());

  int max_label = -1;
  for (std::uint32_t i = 0; i < n_labels; ++i) max_label = std::max<int>(max_label, labels[8 + i]);

  SamplePool pool;
  pool.feature_dim = static_cast<int>(pixels);
  pool.n_classes = max_label + 1;
  pool.by_class.resize(std::max(pool.n_classes, 0));
  for (std::uint32_t i = 0; i < n_images; ++i) {
    Sample xi;
    xi.label = labels[8 + i];
    xi.features.resize(pixels);
    const unsigned char* src = images.data() + 16 + static_cast<std::size_t>(i) * pixels;
    for (std::size_t p = 0; p < pixels; ++p) xi.features[p] = static_cast<double>(src[p]) / 255.0;
    pool.by_class[xi.label].push_back(std::move(xi));
  }
  return pool;
}

std::vector<int> device_class_counts(int n_classes, int samples_per_device, double rho_device,
                                     int major_class) {
  if (n_classes < 1) throw ConfigError("partition: n_classes must be positive");
  if (samples_per_device < 1) throw ConfigError("partition.samples_per_device must be positive");
  if (!(rho_device >= 0.0 && rho_device <= 1.0))
    throw ConfigError("partition.rho_device must lie in [0, 1]");
  std::vector<int> counts(n_classes, 0);
  if (n_classes == 1) {
    counts[0] = samples_per_device;
    return counts;
  }
  const int major = static_cast<int>(std::lround(rho_device * samples_per_device));
  const int rest = samples_per_device - major;
  const int others = n_classes - 1;
  const int base = rest / others;
  int extra = rest % others;
  counts[major_class] = major;
  for (int c = 0; c < n_classes; ++c) {
    if (c == major_class) continue;
    counts[c] = base + (extra > 0 ? 1 : 0);
    if (extra > 0) --extra;
  }
  for (int c = 0; c < n_classes; ++c)
    if (c != major_class && counts[c] > major)
      throw ConfigError("partition: rho_device=" + std::to_string(rho_device) +
                        " is unrealizable; class " + std::to_string(c) + " would receive " +
                        std::to_string(counts[c]) + " samples, more than major class " +
                        std::to_string(major_class) + " (" + std::to_string(major) + ")");
  return counts;
}

Federation partition(const SamplePool& pool, const PartitionConfig& cfg) {
  if (cfg.n_devices < 1) throw ConfigError("partition.n_devices must be positive");
  if (pool.n_classes < 1) throw ConfigError("partition: pool has no classes");
  if (cfg.n_devices % pool.n_classes != 0)
    throw ConfigError("partition.n_devices (" + std::to_string(cfg.n_devices) +
                      ") must be divisible by the number of classes (" +
                      std::to_string(pool.n_classes) + ")");

  Federation fed;
  fed.n_classes = pool.n_classes;
  fed.feature_dim = pool.feature_dim;
  fed.devices.reserve(cfg.n_devices);
  for (int k = 0; k < cfg.n_devices; ++k) {
    DeviceDataset dev;
    dev.device_id = k;
    dev.major_class = k % pool.n_classes;
    const auto counts =
        device_class_counts(pool.n_classes, cfg.samples_per_device, cfg.rho_device, dev.major_class);
    dev.samples.reserve(cfg.samples_per_device);
    for (int c = 0; c < pool.n_classes; ++c) {
      if (counts[c] == 0) continue;
      const auto& source = pool.by_class[c];
      if (source.empty())
        throw ConfigError("partition: class " + std::to_string(c) +
                          " has no samples in the pool but device " + std::to_string(k) +
                          " needs " + std::to_string(counts[c]));
      RngStream rng = derive_stream(
          cfg.seed, {tag("partition"), static_cast<Label>(k), static_cast<Label>(c)});
      for (int s = 0; s < counts[c]; ++s) dev.samples.push_back(source[rng.uniform_index(source.size())]);
    }
    fed.devices.push_back(std::move(dev));
  }

  std::size_t total = 0;
  for (const auto& d : fed.devices) total += d.samples.size();
  for (auto& d : fed.devices)
    d.weight = static_cast<double>(d.samples.size()) / static_cast<double>(total);
  return fed;
}

Federation make_federation(std::vector<std::vector<Sample>> device_samples, int n_classes,
                           int feature_dim) {
  Federation fed;
  fed.n_classes = n_classes;
  fed.feature_dim = feature_dim;
  std::size_t total = 0;
  for (const auto& s : device_samples) {
    if (s.empty()) throw ConfigError("make_federation: every device needs at least one sample");
    total += s.size();
  }
  for (std::size_t k = 0; k < device_samples.size(); ++k) {
    DeviceDataset dev;
    dev.device_id = static_cast<int>(k);
    dev.weight = static_cast<double>(device_samples[k].size()) / static_cast<double>(total);
    dev.samples = std::move(device_samples[k]);
    int best = 0;
    std::vector<int> hist(std::max(n_classes, 1), 0);
    for (const auto& xi : dev.samples)
      if (xi.label >= 0 && xi.label < n_classes) ++hist[xi.label];
    for (int c = 1; c < n_classes; ++c)
      if (hist[c] > hist[best]) best = c;
    dev.major_class = best;
    fed.devices.push_back(std::move(dev));
  }
  return fed;
}

}  // namespace fedcluster
