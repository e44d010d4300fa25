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

#include <cmath>
#include <functional>

#include "csnn/path_norm.hpp"
#include "test_util.hpp"

using namespace csnn;

namespace {

PathDag chain(double w1, double w2, double p) {
  PathDag dag(p);
  const int a = dag.add_node(NodeRole::kInput, 0);
  const int h = dag.add_node(NodeRole::kHidden, 1);
  const int o = dag.add_node(NodeRole::kOutput, 2);
  dag.add_edge(a, h, w1);
  dag.add_edge(h, o, w2);
  return dag;
}

// Explicit enumeration of every input-to-output path, per subnetwork.
double enumerate_paths(const PathDag& dag, bool scale_bearing_only) {
  std::vector<std::vector<int>> out(dag.nodes().size());
  for (std::size_t i = 0; i < dag.edges().size(); ++i) {
    out[dag.edges()[i].from].push_back(static_cast<int>(i));
  }
  std::vector<double> per_subnet(dag.subnet_count(), 0.0);
  const double p = dag.p();
  std::function<void(int, double, int)> walk = [&](int v, double prod,
                                                   int subnet) {
    if (dag.nodes()[v].role == NodeRole::kOutput) {
      per_subnet[subnet] += prod;
      return;
    }
    for (int ei : out[v]) {
      const auto& e = dag.edges()[ei];
      if (scale_bearing_only && !e.scale_bearing) continue;
      const auto& next = dag.nodes()[e.to];
      const int s = next.role == NodeRole::kHidden ? next.subnet : subnet;
      walk(e.to, prod * std::pow(std::abs(e.weight), p), s);
    }
  };
  for (int v : dag.input_nodes()) walk(v, 1.0, dag.nodes()[v].subnet);
  double total = 0.0;
  for (double s : per_subnet) total += std::pow(s, 1.0 / p);
  return total;
}

std::vector<std::vector<RealMatrix>> random_parallel_net(Rng& rng, int k,
                                                         int depth, Index d,
                                                         Index c) {
  std::uniform_int_distribution<Index> width(1, 8);
  std::vector<std::vector<RealMatrix>> subnets;
  for (int s = 0; s < k; ++s) {
    std::vector<RealMatrix> ws;
    Index prev = d;
    for (int l = 0; l < depth; ++l) {
      const Index next = l + 1 == depth ? c : width(rng);
      ws.push_back(csnn::testing::gaussian(prev, next, rng));
      prev = next;
    }
    subnets.push_back(std::move(ws));
  }
  return subnets;
}

}  // namespace

TEST_CASE("chain path norms") {
  CHECK(path_regularizer(chain(2, 3, 1)).value == doctest::Approx(6.0));
  CHECK(path_regularizer(chain(2, 3, 2)).value == doctest::Approx(6.0));
}

TEST_CASE("fully connected 2-2-1 with unit weights") {
  PathDag dag(2.0);
  const int x0 = dag.add_node(NodeRole::kInput, 0);
  const int x1 = dag.add_node(NodeRole::kInput, 0);
  const int h0 = dag.add_node(NodeRole::kHidden, 1);
  const int h1 = dag.add_node(NodeRole::kHidden, 1);
  const int o = dag.add_node(NodeRole::kOutput, 2);
  for (int x : {x0, x1}) {
    for (int h : {h0, h1}) dag.add_edge(x, h, 1.0);
  }
  dag.add_edge(h0, o, 1.0);
  dag.add_edge(h1, o, 1.0);
  CHECK(path_regularizer(dag).value == doctest::Approx(2.0));
  CHECK(enumerate_paths(dag, false) == doctest::Approx(2.0));
}

TEST_CASE("dynamic program matches explicit path enumeration") {
  Rng rng(5);
  std::uniform_int_distribution<int> depth(2, 5), k(1, 3);
  for (int trial = 0; trial < 30; ++trial) {
    const auto net = random_parallel_net(rng, k(rng), depth(rng), 3, 2);
    const auto dag = feedforward_dag(net, 2.0);
    CHECK(path_regularizer(dag).value ==
          doctest::Approx(enumerate_paths(dag, false)).epsilon(1e-10));
  }
}

TEST_CASE("cycles are rejected") {
  PathDag dag(2.0);
  const int a = dag.add_node(NodeRole::kHidden, 1);
  const int b = dag.add_node(NodeRole::kHidden, 1);
  dag.add_edge(a, b, 1.0);
  dag.add_edge(b, a, 1.0);
  CHECK_THROWS_WITH_AS(path_regularizer(dag), "not a DAG", Error);
}

TEST_CASE("log-domain accumulation agrees and avoids overflow") {
  // |w|^p products reach 1e600 and would overflow without the log domain.
  const auto v = path_regularizer(chain(1e150, 1e150, 2.0));
  CHECK(std::isfinite(v.value));
  CHECK(v.value == doctest::Approx(1e300).epsilon(1e-12));
  Rng rng(6);
  const auto net = random_parallel_net(rng, 2, 4, 3, 2);
  const auto small = feedforward_dag(net, 2.0);
  CHECK(path_regularizer_log_domain(small, false).value ==
        doctest::Approx(path_regularizer(small).value).epsilon(1e-12));
  auto tiny = chain(1e-5, 2e-5, 2.0);
  CHECK(path_regularizer(tiny).value == doctest::Approx(2e-10).epsilon(1e-12));
}

TEST_CASE("scale-bearing-only dag matches the plain regularizer") {
  Rng rng(7);
  const auto net = random_parallel_net(rng, 2, 3, 3, 2);
  const auto dag = feedforward_dag(net, 2.0);
  CHECK(lif_path_regularizer(dag).value ==
        doctest::Approx(path_regularizer(dag).value).epsilon(1e-12));
}

TEST_CASE("leak edges contribute no factor") {
  // One neuron, T = 2, leak 0.9 (structural), readout 1.
  LifLayerParams layer;
  layer.p_in = RealMatrix::Constant(1, 1, 1.0);
  layer.leak = RealVector::Constant(1, 0.9);
  layer.u_thr = RealVector::Constant(1, 1.0);
  layer.u_init = RealVector::Zero(1);
  const std::vector<LifWitness> subnets{LifWitness{{layer}}};
  const std::vector<RealMatrix> p_out{RealMatrix::Constant(1, 1, 1.0)};
  const auto dag = lif_dag(subnets, p_out, 2, false, 2.0);
  // Only the input edge at t = 2 carries mass into the readout.
  CHECK(lif_path_regularizer(dag).value == doctest::Approx(1.0));
  auto heavier = subnets;
  heavier[0].layers[0].leak[0] = 0.1;
  CHECK(lif_path_regularizer(lif_dag(heavier, p_out, 2, false, 2.0)).value ==
        doctest::Approx(1.0));
}

TEST_CASE("normalization chain example and fixed point") {
  const auto dag = normalize_incoming(chain(2, 3, 2));
  CHECK(dag.edges()[0].weight == doctest::Approx(1.0));
  CHECK(dag.edges()[1].weight == doctest::Approx(3.0));
  CHECK(path_regularizer(dag).value == doctest::Approx(3.0));
  const auto again = normalize_incoming(dag);
  for (std::size_t i = 0; i < dag.edges().size(); ++i) {
    CHECK(again.edges()[i].weight == dag.edges()[i].weight);
  }
}

TEST_CASE("degenerate hidden node is rejected") {
  CHECK_THROWS_WITH_AS(normalize_incoming(chain(0.0, 1.0, 2)),
                       "degenerate hidden node", Error);
}

TEST_CASE("normalization preserves the threshold network function") {
  Rng rng(8);
  std::uniform_int_distribution<int> depth(2, 5), k(1, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto net = random_parallel_net(rng, k(rng), depth(rng), 4, 3);
    const auto dag = feedforward_dag(net, 2.0);
    const auto normalized = normalize_incoming(dag);
    const RealMatrix x = csnn::testing::gaussian(50, 4, rng);
    CHECK((dag.evaluate(x) - normalized.evaluate(x)).cwiseAbs().maxCoeff() <=
          1e-9);
  }
}

TEST_CASE("normalized regularizer reduces to the outer norm") {
  Rng rng(9);
  std::uniform_int_distribution<int> depth(2, 5), k(1, 3);
  for (double p : {1.0, 2.0, 3.0}) {
    for (int trial = 0; trial < 20; ++trial) {
      const auto net = random_parallel_net(rng, k(rng), depth(rng), 3, 2);
      const auto normalized = normalize_incoming(feedforward_dag(net, p));
      CHECK(std::abs(path_regularizer(normalized).value -
                     outer_norm_sum(normalized)) <= 1e-10);
    }
  }
}

TEST_CASE("recurrent unrolling keeps ties through normalization") {
  Rng rng(10);
  std::vector<ThresholdRnnParams> subnets(2);
  std::vector<RealMatrix> p_out;
  for (auto& net : subnets) {
    net.layers.push_back({csnn::testing::gaussian(2, 3, rng),
                          csnn::testing::gaussian(3, 3, rng)});
    net.layers.push_back({csnn::testing::gaussian(3, 2, rng),
                          csnn::testing::gaussian(2, 2, rng)});
    p_out.push_back(csnn::testing::gaussian(2, 1, rng));
  }
  const auto dag = recurrent_dag(subnets, p_out, 4, 2.0);
  dag.validate();
  const auto normalized = normalize_incoming(dag);
  normalized.validate();
  CHECK(std::abs(path_regularizer(normalized).value -
                 outer_norm_sum(normalized)) <= 1e-10);

  // The unrolled DAG computes the same function as the rollout.
  std::vector<RealMatrix> xs;
  for (int t = 0; t < 4; ++t) xs.push_back(csnn::testing::gaussian(6, 2, rng));
  RealMatrix flat = RealMatrix::Zero(6, normalized.input_nodes().size());
  for (int t = 0; t < 4; ++t) flat.middleCols(2 * t, 2) = xs[t];
  RealMatrix expected = RealMatrix::Zero(6, 1);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto traj = threshold_rnn_rollout(subnets[k], xs);
    expected += traj.states[1][3].as_real() * p_out[k];
  }
  CHECK((normalized.evaluate(flat) - expected).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("tie groups with unequal weights are rejected") {
  PathDag dag(2.0);
  const int a = dag.add_node(NodeRole::kInput, 0);
  const int h = dag.add_node(NodeRole::kHidden, 1);
  const int o = dag.add_node(NodeRole::kOutput, 2);
  dag.add_edge(a, h, 1.0, 0);
  dag.add_edge(h, o, 2.0, 0);
  CHECK_THROWS_AS(dag.validate(), Error);
}

TEST_CASE("lif normalization norm arithmetic") {
  LifLayerParams layer;
  layer.p_in = RealMatrix(2, 1);
  layer.p_in << 3.0, 4.0;
  layer.leak = RealVector::Constant(1, 0.5);
  layer.u_thr = RealVector::Constant(1, 1.0);
  layer.u_init = RealVector::Zero(1);
  const auto out = lif_normalize(LifWitness{{layer}}, false);
  CHECK(out.layers[0].p_in(0, 0) == doctest::Approx(0.6));
  CHECK(out.layers[0].p_in(1, 0) == doctest::Approx(0.8));
  CHECK(out.layers[0].u_thr[0] == doctest::Approx(0.2));

  LifLayerParams unit;
  unit.p_in = RealMatrix(2, 1);
  unit.p_in << 1.0, 0.0;
  unit.leak = RealVector::Constant(1, 0.5);
  unit.u_thr = RealVector::Zero(1);
  unit.u_init = RealVector::Zero(1);
  CHECK(lif_normalize(LifWitness{{unit}}, true) == LifWitness{{unit}});

  unit.p_in.setZero();
  CHECK_THROWS_WITH_AS(lif_normalize(LifWitness{{unit}}, true),
                       "degenerate neuron", Error);
}

TEST_CASE("lif normalization preserves spikes and reduces the regularizer") {
  Rng rng(11);
  for (bool trainable : {false, true}) {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<LifWitness> subnets;
      std::vector<RealMatrix> p_out;
      for (int k = 0; k < 2; ++k) {
        const auto w = csnn::testing::random_witness(3, {4, 3}, rng);
        const auto normalized = lif_normalize(w, trainable);
        const auto xs = csnn::testing::random_inputs(20, 3, 5, rng);
        const auto a = lif_rollout(w, xs);
        const auto b = lif_rollout(normalized, xs);
        bool margin_ok = true;
        for (const auto& layer : a.membrane) {
          for (const auto& u : layer) margin_ok &= u.cwiseAbs().minCoeff() > 1e-9;
        }
        if (margin_ok) CHECK(a.spikes == b.spikes);
        subnets.push_back(normalized);
        p_out.push_back(csnn::testing::gaussian(3, 2, rng));
      }
      const auto dag = lif_dag(subnets, p_out, 4, trainable, 2.0);
      double expected = 0.0;
      for (const auto& w : p_out) expected += w.norm();
      CHECK(std::abs(lif_path_regularizer(dag).value - expected) <= 1e-10);
    }
  }
}
