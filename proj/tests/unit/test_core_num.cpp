// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cstring>
#include <set>
#include <vector>

#include "fedcluster/error.hpp"
#include "fedcluster/num.hpp"
#include "fedcluster/parallel.hpp"
#include "fedcluster/rng.hpp"
#include "support.hpp"

using namespace fedcluster;

namespace {

std::vector<std::uint64_t> draws(RngStream s, int n) {
  std::vector<std::uint64_t> out(n);
  for (auto& x : out) x = s.next_u64();
  return out;
}

bool bit_equal(const ParamVector& a, const ParamVector& b) {
  return a.dim() == b.dim() &&
         std::memcmp(a.raw().data(), b.raw().data(), a.dim() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("derive_stream replays and separates paths") {
  const auto a = draws(derive_stream(42, {0, 0, 3}), 100);
  CHECK(a == draws(derive_stream(42, {0, 0, 3}), 100));

  const auto first10 = [](RngStream s) { return draws(s, 10); };
  CHECK(first10(derive_stream(42, {0, 0, 3})) != first10(derive_stream(42, {0, 0, 4})));
  CHECK(first10(derive_stream(42, {0, 0, 3})) != first10(derive_stream(43, {0, 0, 3})));

  CHECK_THROWS_AS(derive_stream(42, std::span<const Label>{}), ConfigError);
}

TEST_CASE("rng replay holds over random seed/path pairs") {
  testsupport::Gen gen(7);
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t seed = gen.eng();
    std::vector<Label> path(1 + gen.integer(0, 4));
    for (auto& p : path) p = gen.eng();
    CHECK(draws(derive_stream(seed, path), 16) == draws(derive_stream(seed, path), 16));
  }
}

TEST_CASE("rng helpers stay in range") {
  RngStream s = derive_stream(5, {tag("range")});
  for (int i = 0; i < 10000; ++i) {
    const double u = s.uniform01();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(s.uniform_index(7) < 7u);
  }
  CHECK(tag("a") != tag("b"));
}

TEST_CASE("uniform_index is roughly uniform") {
  RngStream s = derive_stream(11, {tag("hist")});
  std::vector<int> counts(6, 0);
  const int n = 60000;
  for (int i = 0; i < n; ++i) ++counts[s.uniform_index(6)];
  for (int c : counts) CHECK(std::abs(c / double(n) - 1.0 / 6.0) < 0.01);
}

TEST_CASE("normal draws have unit moments") {
  RngStream s = derive_stream(3, {tag("normal")});
  double m = 0.0, v = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = s.normal();
    m += x;
    v += x * x;
  }
  m /= n;
  v = v / n - m * m;
  CHECK(std::abs(m) < 0.01);
  CHECK(std::abs(v - 1.0) < 0.02);
}

TEST_CASE("weighted_sum examples") {
  std::vector<ParamVector> a{{1.0, 0.0}, {0.0, 2.0}};
  std::vector<double> wa{0.5, 0.5};
  CHECK(weighted_sum(a, wa) == ParamVector{0.5, 1.0});

  std::vector<ParamVector> b{{7.0, 7.0}};
  std::vector<double> wb{1.0};
  CHECK(weighted_sum(b, wb) == ParamVector{7.0, 7.0});

  std::vector<ParamVector> c{{1.0}, {2.0}};
  std::vector<double> wc{0.4, 0.6};
  CHECK(weighted_sum(c, wc)[0] == doctest::Approx(0.4 * 1.0 + 0.6 * 2.0).epsilon(1e-15));
}

TEST_CASE("weighted_sum rejects bad input") {
  std::vector<ParamVector> none;
  std::vector<double> w0;
  CHECK_THROWS_AS(weighted_sum(none, w0), ConfigError);
  std::vector<ParamVector> mixed{{1.0}, {1.0, 2.0}};
  std::vector<double> w2{0.5, 0.5};
  CHECK_THROWS_AS(weighted_sum(mixed, w2), ConfigError);
  std::vector<ParamVector> one{{1.0}};
  CHECK_THROWS_AS(weighted_sum(one, w2), ConfigError);
}

TEST_CASE("weighted_sum of identical vectors is exact") {
  testsupport::Gen gen(21);
  for (int trial = 0; trial < 500; ++trial) {
    const ParamVector v = gen.vec(1 + gen.integer(0, 8), 1e3);
    const int n = gen.integer(1, 12);
    std::vector<double> w(n);
    double total = 0.0;
    for (auto& x : w) total += (x = gen.real(0.01, 1.0));
    for (auto& x : w) x /= total;
    std::vector<ParamVector> copies(n, v);
    CHECK(bit_equal(weighted_sum(copies, w), v));
  }
}

TEST_CASE("weighted_sum after parallel evaluation equals serial") {
  testsupport::Gen gen(4);
  const int n = 40;
  std::vector<ParamVector> serial(n);
  for (int i = 0; i < n; ++i) serial[i] = gen.vec(17, 3.0);
  std::vector<double> w(n);
  for (auto& x : w) x = gen.real(0.0, 1.0);

  for (std::size_t threads : {1u, 2u, 4u}) {
    ThreadPool pool(threads);
    std::vector<ParamVector> slots(n);
    pool.parallel_for(n, [&](std::size_t i) { slots[i] = serial[i]; });
    CHECK(bit_equal(weighted_sum(slots, w), weighted_sum(serial, w)));
  }
}

TEST_CASE("sq_norm examples") {
  CHECK(sq_norm(ParamVector{0.0, 0.0, 0.0}) == 0.0);
  CHECK(sq_norm(ParamVector{3.0, 4.0}) == 25.0);
  CHECK(sq_norm(ParamVector{1.0, 1.0, 1.0, 1.0}) == 4.0);
  CHECK(dot(ParamVector{1.0, 2.0}, ParamVector{3.0, 4.0}) == 11.0);
}

TEST_CASE("vector operators") {
  ParamVector y{1.0, 1.0};
  axpy(2.0, ParamVector{1.0, -1.0}, y);
  CHECK(y == ParamVector{3.0, -1.0});
  CHECK(ParamVector{3.0, 1.0} - ParamVector{1.0, 1.0} == ParamVector{2.0, 0.0});
  CHECK(ParamVector{3.0, 1.0} + ParamVector{1.0, 1.0} == ParamVector{4.0, 2.0});
  CHECK(2.0 * ParamVector{3.0, 1.0} == ParamVector{6.0, 2.0});
  CHECK(ParamVector{1.0, 2.0}.all_finite());
  CHECK_FALSE(ParamVector{1.0, std::numeric_limits<double>::quiet_NaN()}.all_finite());
}

TEST_CASE("thread pool covers every index once and rethrows") {
  for (std::size_t threads : {1u, 3u}) {
    ThreadPool pool(threads);
    CHECK(pool.size() == threads);
    std::vector<std::atomic<int>> hits(1000);
    pool.parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](const auto& h) { return h.load() == 1; }));

    CHECK_THROWS_WITH(pool.parallel_for(50,
                                        [](std::size_t i) {
                                          if (i == 7 || i == 30) throw ConfigError("fail " + std::to_string(i));
                                        }),
                      "fail 7");
    pool.parallel_for(0, [](std::size_t) { FAIL("called on empty range"); });
  }
}
