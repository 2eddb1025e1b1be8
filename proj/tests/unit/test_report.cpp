// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <sstream>

#include "fedcluster/error.hpp"
#include "fedcluster/report.hpp"
#include "support.hpp"

using namespace fedcluster;
namespace pt = boost::property_tree;

namespace {

RunLog three_rounds() {
  RunLog log;
  for (int j = 0; j < 3; ++j) {
    RoundRecord r;
    r.round = j;
    r.cycle_count = 2 * j;
    r.train_loss = 1.0 / (j + 1);
    r.grad_sq_norm = 0.1 * (3 - j);
    r.lr = 0.01;
    r.wall_ms = 1.5 * j;
    log.records.push_back(r);
  }
  return log;
}

int count_elements(const pt::ptree& tree, const std::string& name) {
  int n = 0;
  for (const auto& [key, child] : tree) {
    if (key == name) ++n;
    n += count_elements(child, name);
  }
  return n;
}

pt::ptree parse_xml(const std::string& text) {
  std::istringstream in(text);
  pt::ptree tree;
  pt::read_xml(in, tree);
  return tree;
}

}  // namespace

TEST_CASE("metrics header is byte-exact") {
  testsupport::TempDir dir("csv");
  const RunLog log = three_rounds();
  write_metrics_csv(dir / "m.csv", {{RunLabel{"demo", "fedcluster", 4}, &log}});
  const std::string text = testsupport::read_file(dir / "m.csv");
  const std::string expected_header =
      "run_id,algorithm,seed,round,cycle_count,train_loss,grad_sq_norm,lr,wall_ms\n";
  CHECK(text.substr(0, expected_header.size()) == expected_header);
  CHECK(kMetricsHeader == std::string_view(expected_header).substr(0, expected_header.size() - 1));

  const auto table = read_csv(dir / "m.csv");
  CHECK(table.rows.size() == 3);
  CHECK(table.rows[1][0] == "demo");
  CHECK(table.rows[1][2] == "4");
  CHECK(table.rows[1][4] == "2");
  CHECK(std::stod(table.rows[1][table.column("train_loss")]) == 0.5);
  CHECK(table.column("nope") == -1);
}

TEST_CASE("reals round-trip through text") {
  testsupport::Gen gen(1);
  for (int i = 0; i < 1000; ++i) {
    const double x = gen.real(-1e6, 1e6) * std::pow(10.0, gen.integer(-20, 20));
    CHECK(std::stod(format_real(x)) == x);
  }
}

TEST_CASE("csv reader errors") {
  testsupport::TempDir dir("csv_bad");
  CHECK_THROWS_AS(read_csv(dir / "missing.csv"), IoError);
  testsupport::write_bytes(dir / "empty.csv", "");
  CHECK_THROWS_AS(read_csv(dir / "empty.csv"), ConfigError);
  testsupport::write_bytes(dir / "ragged.csv", "a,b\n1,2\n3\n");
  CHECK_THROWS_AS(read_csv(dir / "ragged.csv"), ConfigError);
}

TEST_CASE("svg output is well-formed") {
  std::vector<PlotSeries> series{{"fedcluster <M=10> & co", {0, 1, 2}, {3.0, 2.0, 1.0}},
                                 {"fedavg", {0, 1, 2}, {3.0, 2.5, 2.0}}};
  for (bool log_y : {false, true}) {
    const std::string svg = render_svg(series, "round", "train_loss", log_y);
    pt::ptree tree;
    REQUIRE_NOTHROW(tree = parse_xml(svg));
    CHECK(tree.count("svg") == 1);
    CHECK(count_elements(tree, "polyline") == 2);
    CHECK(svg.find("fedcluster &lt;M=10&gt; &amp; co") != std::string::npos);
    CHECK(svg.find("train_loss") != std::string::npos);
  }
  // A single point and a flat line still render.
  const std::string flat = render_svg({{"one", {5}, {1.0}}}, "x", "y", false);
  CHECK(count_elements(parse_xml(flat), "polyline") == 1);
}

TEST_CASE("text files create their directories") {
  testsupport::TempDir dir("text");
  write_text_file(dir.path / "a" / "b" / "c.txt", "hello");
  CHECK(testsupport::read_file(dir.path / "a" / "b" / "c.txt") == "hello");
  testsupport::write_bytes(dir / "blocker", "x");
  CHECK_THROWS_AS(write_text_file(dir.path / "blocker" / "c.txt", "x"), IoError);
}
