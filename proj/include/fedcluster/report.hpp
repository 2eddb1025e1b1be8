// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "fedcluster/engine.hpp"

namespace fedcluster {

/// Metrics CSV header. Byte-stable; wall_ms is the only nondeterministic column.
inline constexpr std::string_view kMetricsHeader =
    "run_id,algorithm,seed,round,cycle_count,train_loss,grad_sq_norm,lr,wall_ms";

/// Shortest-round-trip-safe rendering used for every real-valued CSV cell (%.17g).
std::string format_real(double x);

struct RunLabel {
  std::string run_id;
  std::string algorithm;
  std::uint64_t seed = 0;
};

/// One row per round record; no header.
void write_metrics_rows(std::ostream& out, const RunLabel& label, const RunLog& log);

/// Writes header plus rows for each (label, log) pair. Throws IoError.
void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<std::pair<RunLabel, const RunLog*>>& runs);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of `field` in the header, or -1.
  int column(std::string_view field) const;
};

/// Plain comma-separated reader (no quoting). Throws IoError when unreadable and
/// ConfigError on rows whose width differs from the header.
CsvTable read_csv(const std::filesystem::path& path);

/// Writes `text` to `path`, creating parent directories. Throws IoError.
void write_text_file(const std::filesystem::path& path, std::string_view text);

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Self-contained SVG line chart: one polyline per series, axis labels, legend.
/// With `log_y` every y must be positive (checked by the caller).
std::string render_svg(const std::vector<PlotSeries>& series, const std::string& x_label,
                       const std::string& y_label, bool log_y);

}  // namespace fedcluster
