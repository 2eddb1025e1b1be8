// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#include "fedcluster/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "fedcluster/error.hpp"

namespace fedcluster {

std::string format_real(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_metrics_rows(std::ostream& out, const RunLabel& label, const RunLog& log) {
  for (const auto& r : log.records) {
    out << label.run_id << ',' << label.algorithm << ',' << label.seed << ',' << r.round << ','
        << r.cycle_count << ',' << format_real(r.train_loss) << ',' << format_real(r.grad_sq_norm)
        << ',' << format_real(r.lr) << ',' << format_real(r.wall_ms) << '\n';
  }
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<std::pair<RunLabel, const RunLog*>>& runs) {
  std::ostringstream os;
  os << kMetricsHeader << '\n';
  for (const auto& [label, log] : runs) write_metrics_rows(os, label, *log);
  write_text_file(path, os.str());
}

int CsvTable::column(std::string_view field) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == field) return static_cast<int>(i);
  return -1;
}

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double x, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, x);
  return buf;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read CSV file '" + path.string() + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("CSV file '" + path.string() + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split_row(line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_row(line);
    if (cells.size() != t.header.size())
      throw ConfigError("CSV file '" + path.string() + "' line " + std::to_string(line_no) +
                        " has " + std::to_string(cells.size()) + " fields, header has " +
                        std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::string render_svg(const std::vector<PlotSeries>& series, const std::string& x_label,
                       const std::string& y_label, bool log_y) {
  constexpr double W = 800, H = 500, left = 80, right = 200, top = 30, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;

  auto ty = [&](double y) { return log_y ? std::log10(y) : y; };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(ty(s.y[i]))) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  if (!(x0 <= x1)) x0 = 0, x1 = 1;
  if (!(y0 <= y1)) y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return top + ph - (ty(y) - y0) / (y1 - y0) * ph; };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
     << "<g stroke=\"black\" stroke-width=\"1\">\n"
     << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\""
     << top + ph << "\"/>\n"
     << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
     << "\"/>\n"
     << "</g>\n";

  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double fx = x0 + (x1 - x0) * i / kTicks;
    const double px = left + pw * i / kTicks;
    os << "<text x=\"" << px << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">"
       << fmt(fx) << "</text>\n";
    const double fy = y0 + (y1 - y0) * i / kTicks;
    const double py = top + ph - ph * i / kTicks;
    os << "<text x=\"" << left - 6 << "\" y=\"" << py + 4 << "\" text-anchor=\"end\">"
       << fmt(log_y ? std::pow(10.0, fy) : fy) << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">"
     << xml_escape(x_label) << "</text>\n"
     << "<text x=\"20\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
     << top + ph / 2 << ")\">" << xml_escape(log_y ? y_label + " (log scale)" : y_label)
     << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(ty(s.y[i]))) continue;
      os << (first ? "" : " ") << fmt(sx(s.x[i]), 7) << ',' << fmt(sy(s.y[i]), 7);
      first = false;
    }
    os << "\"/>\n";
    const double ly = top + 10 + 18.0 * static_cast<double>(k);
    os << "<line x1=\"" << left + pw + 15 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 40
       << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << left + pw + 46 << "\" y=\"" << ly + 4 << "\">" << xml_escape(s.label)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace fedcluster
