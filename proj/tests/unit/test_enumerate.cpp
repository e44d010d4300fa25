// Copyright 2026 The convex-snn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "csnn/enumerate.hpp"
#include "test_util.hpp"

using namespace csnn;

namespace {

std::set<Pattern> as_set(const std::vector<Pattern>& v) { return {v.begin(), v.end()}; }

Pattern sign_pattern(const RealMatrix& z, const RealVector& u) {
  Pattern p(z.rows());
  const RealVector v = z * u;
  for (Index i = 0; i < z.rows(); ++i) p[i] = v[i] >= 0.0;
  return p;
}

std::set<Pattern> final_columns(const SpikeDictionary& d) {
  std::set<Pattern> out;
  for (Index c = 0; c < d.size(); ++c) {
    Pattern p(d.n);
    for (Index i = 0; i < d.n; ++i) p[i] = d.columns.get(i, c);
    out.insert(p);
  }
  return out;
}

RealMatrix integer_matrix(Index rows, Index cols, Rng& rng) {
  std::uniform_int_distribution<int> v(-3, 3);
  RealMatrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = v(rng);
  return m;
}

}  // namespace

TEST_CASE("one-dimensional arrangements") {
  RealMatrix z(2, 1);
  z << 1, -1;
  CHECK(as_set(exact_enumerate_arrangement(z)) ==
        std::set<Pattern>{{1, 0}, {0, 1}, {1, 1}});
  z << 1, 1;
  CHECK(as_set(exact_enumerate_arrangement(z)) ==
        std::set<Pattern>{{1, 1}, {0, 0}});
}

TEST_CASE("the all-ones pattern is always present") {
  Rng rng(1);
  for (int d = 1; d <= 3; ++d) {
    const auto pats = as_set(exact_enumerate_arrangement(
        csnn::testing::gaussian(7, d, rng)));
    CHECK(pats.count(Pattern(7, 1)) == 1);
  }
}

TEST_CASE("arrangement is closed under a dense random sweep") {
  Rng rng(2);
  for (int d = 1; d <= 3; ++d) {
    for (int trial = 0; trial < 5; ++trial) {
      const RealMatrix z = csnn::testing::gaussian(10, d, rng);
      const auto pats = as_set(exact_enumerate_arrangement(z));
      for (int s = 0; s < 20000; ++s) {
        const RealVector u = csnn::testing::gaussian(d, 1, rng).col(0);
        CHECK(pats.count(sign_pattern(z, u)) == 1);
      }
    }
  }
}

TEST_CASE("generic arrangements have the expected pattern count") {
  // A face on hyperplane i reads 1 in row i, like the region on its positive
  // side. With every row in one open half-space the all-ones pattern is also
  // a region, so the distinct patterns are exactly the open regions: 2n for n
  // generic lines in R^2 and 2 (1 + (n-1) + C(n-1, 2)) for planes in R^3.
  Rng rng(3);
  auto half_space = [&](Index n, Index d) {
    RealMatrix z = csnn::testing::gaussian(n, d, rng);
    z.col(0) = z.col(0).cwiseAbs().array() + 0.1;
    return z;
  };
  CHECK(exact_enumerate_arrangement(half_space(6, 2)).size() == 12);
  CHECK(exact_enumerate_arrangement(half_space(4, 3)).size() == 14);
  CHECK(exact_enumerate_arrangement(half_space(6, 3)).size() == 2 * (1 + 5 + 10));
  // A pointed cone adds all-ones as an isolated pattern at u = 0.
  RealMatrix pointed(3, 2);
  pointed << 1, 0, -1, 1, -1, -1;
  CHECK(exact_enumerate_arrangement(pointed).size() == 6 + 1);
}

TEST_CASE("lower-dimensional faces are included") {
  // Two opposite rows: (1,1) only at u on the line, as in the 1-d example.
  RealMatrix z(2, 2);
  z << 1, 0, -1, 0;
  CHECK(as_set(exact_enumerate_arrangement(z)) ==
        std::set<Pattern>{{1, 0}, {0, 1}, {1, 1}});
}

TEST_CASE("arrangement size limits") {
  CHECK_THROWS_WITH_AS(exact_enumerate_arrangement(RealMatrix::Ones(13, 2)),
                       "exact enumeration out of budget", Error);
  CHECK_THROWS_WITH_AS(exact_enumerate_arrangement(RealMatrix::Ones(5, 4)),
                       "exact enumeration out of budget", Error);
}

TEST_CASE("T=1 SNN enumeration equals the arrangement of the inputs") {
  Rng rng(4);
  for (Index q : {1, 2}) {
    const RealMatrix x = integer_matrix(6, q, rng);
    const WitnessArch arch{q, {2}, 1};
    const std::vector<RealMatrix> xs{x};
    const auto e = exact_enumerate_snn_dictionary(arch, xs, SnnGrid{});
    CHECK(e.inexact_points == 0);
    CHECK(final_columns(e.dictionary) == as_set(exact_enumerate_arrangement(x)));
    CHECK(verify_witnessed(e.dictionary, e.store, xs));
  }
}

TEST_CASE("grid refinement never removes columns") {
  Rng rng(5);
  const WitnessArch arch{2, {1}, 3};
  const auto xs = csnn::testing::random_inputs(5, 2, 3, rng);
  const SnnGrid coarse{{0.5}, {0.0, 1.0}};
  const SnnGrid fine{{0.0, 0.25, 0.5, 0.75, 0.9}, {0.0, 1.0}};
  const auto a = final_columns(exact_enumerate_snn_dictionary(arch, xs, coarse).dictionary);
  const auto b = final_columns(exact_enumerate_snn_dictionary(arch, xs, fine).dictionary);
  for (const auto& col : a) CHECK(b.count(col) == 1);
  CHECK(b.size() >= a.size());
}

TEST_CASE("enumerated dictionary contains random witness columns") {
  Rng rng(6);
  const SnnGrid grid{{0.0, 0.5, 0.9}, {0.0, 1.0}};
  for (Index q : {1, 2}) {
    const WitnessArch arch{q, {2}, 3};
    const auto xs = csnn::testing::random_inputs(6, q, 3, rng);
    const auto e = exact_enumerate_snn_dictionary(arch, xs, grid);
    CHECK(verify_witnessed(e.dictionary, e.store, xs));
    const auto cols = final_columns(e.dictionary);
    std::uniform_int_distribution<std::size_t> pick_b(0, 2), pick_r(0, 1);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> scale(0.1, 5.0);
    for (int trial = 0; trial < 20000; ++trial) {
      LifLayerParams l;
      l.p_in = csnn::testing::gaussian(q, 2, rng);
      l.leak.resize(2);
      l.u_thr.resize(2);
      l.u_init = RealVector::Zero(2);
      for (int j = 0; j < 2; ++j) {
        l.leak[j] = grid.leaks[pick_b(rng)];
        // Any positive threshold is covered by the {0, 1} grid.
        l.u_thr[j] = grid.thresholds[pick_r(rng)] * scale(rng);
      }
      const auto spikes = lif_output_spikes(LifWitness{{l}}, xs);
      for (Index j = 0; j < 2; ++j) {
        Pattern p(6);
        for (Index i = 0; i < 6; ++i) p[i] = spikes.back()(i, j);
        CHECK(cols.count(p) == 1);
      }
    }
  }
}

TEST_CASE("three-layer micro enumeration contains random witness columns") {
  Rng rng(7);
  const SnnGrid grid{{0.0, 0.5}, {0.0, 1.0}};
  const WitnessArch arch{1, {2, 1}, 2};
  const auto xs = csnn::testing::random_inputs(4, 1, 2, rng);
  const auto e = exact_enumerate_snn_dictionary(arch, xs, grid);
  CHECK(verify_witnessed(e.dictionary, e.store, xs));
  const auto cols = final_columns(e.dictionary);
  std::uniform_int_distribution<std::size_t> pick(0, 1);
  for (int trial = 0; trial < 5000; ++trial) {
    LifWitness w;
    for (Index width_prev : {1, 2}) {
      const Index m = width_prev == 1 ? 2 : 1;
      LifLayerParams l;
      l.p_in = csnn::testing::gaussian(width_prev, m, rng);
      l.leak.resize(m);
      l.u_thr.resize(m);
      l.u_init = RealVector::Zero(m);
      for (Index j = 0; j < m; ++j) {
        l.leak[j] = grid.leaks[pick(rng)];
        l.u_thr[j] = grid.thresholds[pick(rng)];
      }
      w.layers.push_back(l);
    }
    const auto spikes = lif_output_spikes(w, xs);
    Pattern p(4);
    for (Index i = 0; i < 4; ++i) p[i] = spikes.back()(i, 0);
    CHECK(cols.count(p) == 1);
  }
}

TEST_CASE("micro limits are enforced") {
  Rng rng(8);
  const auto xs = csnn::testing::random_inputs(9, 1, 2, rng);
  CHECK_THROWS_WITH_AS(
      exact_enumerate_snn_dictionary({1, {1}, 2}, xs, SnnGrid{}),
      "exact enumeration out of budget", Error);
  const auto ok = csnn::testing::random_inputs(4, 1, 2, rng);
  CHECK_THROWS_WITH_AS(
      exact_enumerate_snn_dictionary({1, {3}, 2}, ok, SnnGrid{}),
      "exact enumeration out of budget", Error);
  MicroLimits tiny;
  tiny.work_budget = 3;
  CHECK_THROWS_WITH_AS(
      exact_enumerate_snn_dictionary({1, {1}, 2}, ok, SnnGrid{}, tiny),
      "exact enumeration out of budget", Error);
}
