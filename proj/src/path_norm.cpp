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


#include "csnn/path_norm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <string>

namespace csnn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

bool needs_log_domain(const PathDag& dag) {
  for (const auto& e : dag.edges()) {
    const double w = std::abs(e.weight);
    if (w == 0.0) continue;
    if (w > 1e3 || w < 1e-3) return true;
  }
  return false;
}

// Subnetwork that owns the mass carried along edge e into an output node.
int edge_subnet(const PathDag& dag, const PathEdge& e) {
  return dag.nodes()[e.from].subnet;
}

PathNormValue linear_domain(const PathDag& dag, bool scale_bearing_only) {
  const double p = dag.p();
  const auto order = dag.topological_order();
  const auto& nodes = dag.nodes();
  std::vector<std::vector<int>> incoming(nodes.size());
  for (std::size_t i = 0; i < dag.edges().size(); ++i) {
    incoming[dag.edges()[i].to].push_back(static_cast<int>(i));
  }
  std::vector<double> mass(nodes.size(), 0.0);
  std::vector<double> per_subnet(dag.subnet_count(), 0.0);
  for (int v : order) {
    if (nodes[v].role == NodeRole::kInput) {
      mass[v] = 1.0;
      continue;
    }
    double r = 0.0;
    for (int ei : incoming[v]) {
      const auto& e = dag.edges()[ei];
      if (scale_bearing_only && !e.scale_bearing) continue;
      const double term = std::pow(std::abs(e.weight), p) * mass[e.from];
      if (nodes[v].role == NodeRole::kOutput) {
        per_subnet[edge_subnet(dag, e)] += term;
      }
      r += term;
    }
    mass[v] = r;
  }
  PathNormValue out;
  out.p = p;
  for (double s : per_subnet) out.value += std::pow(s, 1.0 / p);
  return out;
}

}  // namespace

PathDag::PathDag(double p) : p_(p) {
  check(std::isfinite(p) && p >= 1.0, "p must be >= 1");
}

int PathDag::add_node(NodeRole role, int layer, int subnet) {
  check(subnet >= 0, "subnet id must be nonnegative");
  nodes_.push_back({role, layer, subnet});
  return static_cast<int>(nodes_.size()) - 1;
}

int PathDag::add_edge(int from, int to, double weight,
                      std::optional<int> tie_group, bool scale_bearing,
                      bool trainable) {
  const int n = static_cast<int>(nodes_.size());
  check(from >= 0 && from < n && to >= 0 && to < n, "edge endpoint out of range");
  check(nodes_[to].role != NodeRole::kInput, "edge into an input node");
  check(nodes_[from].role != NodeRole::kOutput, "edge out of an output node");
  check(std::isfinite(weight), "non-finite edge weight");
  edges_.push_back({from, to, weight, tie_group, scale_bearing, trainable});
  return static_cast<int>(edges_.size()) - 1;
}

int PathDag::subnet_count() const {
  int k = 0;
  for (const auto& n : nodes_) k = std::max(k, n.subnet + 1);
  return std::max(k, 1);
}

std::vector<int> PathDag::topological_order() const {
  std::vector<int> indegree(nodes_.size(), 0);
  std::vector<std::vector<int>> out(nodes_.size());
  for (const auto& e : edges_) {
    ++indegree[e.to];
    out[e.from].push_back(e.to);
  }
  // Min-heap keeps the order deterministic (creation order among ready nodes).
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (std::size_t v = 0; v < nodes_.size(); ++v) {
    if (indegree[v] == 0) ready.push(static_cast<int>(v));
  }
  std::vector<int> order;
  order.reserve(nodes_.size());
  while (!ready.empty()) {
    const int v = ready.top();
    ready.pop();
    order.push_back(v);
    for (int w : out[v]) {
      if (--indegree[w] == 0) ready.push(w);
    }
  }
  if (order.size() != nodes_.size()) fail("not a DAG");
  return order;
}

void PathDag::validate() const {
  topological_order();
  std::map<int, double> tied;
  for (const auto& e : edges_) {
    if (!e.tie_group) continue;
    auto [it, inserted] = tied.emplace(*e.tie_group, e.weight);
    if (!inserted && it->second != e.weight) {
      fail("tie group " + std::to_string(*e.tie_group) +
           " has unequal weights");
    }
  }
  for (const auto& e : edges_) {
    const auto& a = nodes_[e.from];
    const auto& b = nodes_[e.to];
    if (a.role == NodeRole::kHidden && b.role == NodeRole::kHidden) {
      check(a.subnet == b.subnet, "edge crosses subnetworks");
    }
  }
}

std::vector<int> PathDag::input_nodes() const {
  std::vector<int> out;
  for (std::size_t v = 0; v < nodes_.size(); ++v) {
    if (nodes_[v].role == NodeRole::kInput) out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<int> PathDag::output_nodes() const {
  std::vector<int> out;
  for (std::size_t v = 0; v < nodes_.size(); ++v) {
    if (nodes_[v].role == NodeRole::kOutput) out.push_back(static_cast<int>(v));
  }
  return out;
}

RealMatrix PathDag::evaluate(const RealMatrix& inputs) const {
  const auto in_nodes = input_nodes();
  const auto out_nodes = output_nodes();
  check(inputs.cols() == static_cast<Index>(in_nodes.size()),
        "input width does not match the DAG");
  const auto order = topological_order();
  std::vector<std::vector<int>> incoming(nodes_.size());
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    incoming[edges_[i].to].push_back(static_cast<int>(i));
  }
  std::vector<int> input_slot(nodes_.size(), -1);
  for (std::size_t j = 0; j < in_nodes.size(); ++j) {
    input_slot[in_nodes[j]] = static_cast<int>(j);
  }
  RealMatrix result(inputs.rows(), static_cast<Index>(out_nodes.size()));
  std::vector<double> value(nodes_.size());
  for (Index s = 0; s < inputs.rows(); ++s) {
    for (int v : order) {
      if (nodes_[v].role == NodeRole::kInput) {
        value[v] = inputs(s, input_slot[v]);
        continue;
      }
      double acc = 0.0;
      for (int ei : incoming[v]) acc += edges_[ei].weight * value[edges_[ei].from];
      value[v] = nodes_[v].role == NodeRole::kHidden ? (acc >= 0.0 ? 1.0 : 0.0)
                                                     : acc;
    }
    for (std::size_t j = 0; j < out_nodes.size(); ++j) {
      result(s, static_cast<Index>(j)) = value[out_nodes[j]];
    }
  }
  return result;
}

PathNormValue path_regularizer_log_domain(const PathDag& dag,
                                          bool scale_bearing_only) {
  const double p = dag.p();
  const auto order = dag.topological_order();
  const auto& nodes = dag.nodes();
  std::vector<std::vector<int>> incoming(nodes.size());
  for (std::size_t i = 0; i < dag.edges().size(); ++i) {
    incoming[dag.edges()[i].to].push_back(static_cast<int>(i));
  }
  std::vector<double> log_mass(nodes.size(), kNegInf);
  std::vector<double> per_subnet(dag.subnet_count(), kNegInf);
  for (int v : order) {
    if (nodes[v].role == NodeRole::kInput) {
      log_mass[v] = 0.0;
      continue;
    }
    double r = kNegInf;
    for (int ei : incoming[v]) {
      const auto& e = dag.edges()[ei];
      if (scale_bearing_only && !e.scale_bearing) continue;
      if (e.weight == 0.0 || log_mass[e.from] == kNegInf) continue;
      const double term = p * std::log(std::abs(e.weight)) + log_mass[e.from];
      if (nodes[v].role == NodeRole::kOutput) {
        auto& acc = per_subnet[edge_subnet(dag, e)];
        acc = log_add(acc, term);
      }
      r = log_add(r, term);
    }
    log_mass[v] = r;
  }
  PathNormValue out;
  out.p = p;
  for (double s : per_subnet) {
    if (s != kNegInf) out.value += std::exp(s / p);
  }
  return out;
}

PathNormValue path_regularizer(const PathDag& dag) {
  if (needs_log_domain(dag)) return path_regularizer_log_domain(dag, false);
  return linear_domain(dag, false);
}

PathNormValue lif_path_regularizer(const PathDag& dag) {
  if (needs_log_domain(dag)) return path_regularizer_log_domain(dag, true);
  return linear_domain(dag, true);
}

PathDag normalize_incoming(const PathDag& dag) {
  dag.validate();
  const double p = dag.p();
  std::vector<double> norm_p(dag.nodes().size(), 0.0);
  for (const auto& e : dag.edges()) {
    norm_p[e.to] += std::pow(std::abs(e.weight), p);
  }
  PathDag out = dag;
  for (std::size_t v = 0; v < dag.nodes().size(); ++v) {
    if (dag.nodes()[v].role != NodeRole::kHidden) continue;
    if (!(norm_p[v] > 0.0)) fail("degenerate hidden node");
  }
  for (auto& e : out.mutable_edges()) {
    if (dag.nodes()[e.to].role != NodeRole::kHidden) continue;
    e.weight /= std::pow(norm_p[e.to], 1.0 / p);
  }
  // Copies of a tied edge enter copies of the same neuron, whose incoming
  // blocks are identical, so the division keeps them equal.
  out.validate();
  return out;
}

double outer_norm_sum(const PathDag& dag) {
  std::vector<double> per_subnet(dag.subnet_count(), 0.0);
  for (const auto& e : dag.edges()) {
    if (dag.nodes()[e.to].role != NodeRole::kOutput) continue;
    per_subnet[edge_subnet(dag, e)] += std::pow(std::abs(e.weight), dag.p());
  }
  double total = 0.0;
  for (double s : per_subnet) total += std::pow(s, 1.0 / dag.p());
  return total;
}

LifWitness lif_normalize(const LifWitness& witness, bool trainable_threshold,
                         double p) {
  witness.validate();
  std::vector<RealVector> scales;
  scales.reserve(witness.layers.size());
  for (const auto& layer : witness.layers) {
    RealVector a(layer.width());
    for (Index j = 0; j < layer.width(); ++j) {
      double mass = 0.0;
      for (Index i = 0; i < layer.input_dim(); ++i) {
        mass += std::pow(std::abs(layer.p_in(i, j)), p);
      }
      if (trainable_threshold) mass += std::pow(std::abs(layer.u_thr[j]), p);
      if (!(mass > 0.0) || !std::isfinite(mass)) fail("degenerate neuron");
      a[j] = 1.0 / std::pow(mass, 1.0 / p);
    }
    scales.push_back(std::move(a));
  }
  return lif_rescale(witness, scales);
}

PathDag feedforward_dag(std::span<const std::vector<RealMatrix>> subnets,
                        double p) {
  check(!subnets.empty(), "at least one subnetwork required");
  const Index d = subnets.front().front().rows();
  const Index c = subnets.front().back().cols();
  PathDag dag(p);
  std::vector<int> inputs(d);
  for (Index i = 0; i < d; ++i) inputs[i] = dag.add_node(NodeRole::kInput, 0);
  std::vector<int> outputs(c);
  const int depth = static_cast<int>(subnets.front().size());
  for (Index j = 0; j < c; ++j) {
    outputs[j] = dag.add_node(NodeRole::kOutput, depth);
  }
  for (std::size_t k = 0; k < subnets.size(); ++k) {
    const auto& ws = subnets[k];
    check(!ws.empty() && ws.front().rows() == d && ws.back().cols() == c,
          "subnetwork shapes do not match");
    std::vector<int> prev = inputs;
    for (std::size_t l = 0; l < ws.size(); ++l) {
      const RealMatrix& w = ws[l];
      check(w.rows() == static_cast<Index>(prev.size()),
            "shape mismatch at layer " + std::to_string(l + 1));
      std::vector<int> cur;
      if (l + 1 == ws.size()) {
        cur = outputs;
      } else {
        for (Index j = 0; j < w.cols(); ++j) {
          cur.push_back(dag.add_node(NodeRole::kHidden, static_cast<int>(l + 1),
                                     static_cast<int>(k)));
        }
      }
      for (Index i = 0; i < w.rows(); ++i) {
        for (Index j = 0; j < w.cols(); ++j) {
          if (w(i, j) != 0.0) dag.add_edge(prev[i], cur[j], w(i, j));
        }
      }
      prev = std::move(cur);
    }
  }
  return dag;
}

PathDag recurrent_dag(std::span<const ThresholdRnnParams> subnets,
                      std::span<const RealMatrix> p_out, int timesteps,
                      double p) {
  check(!subnets.empty() && subnets.size() == p_out.size(),
        "one readout per subnetwork required");
  check(timesteps >= 1, "rollout needs at least one timestep");
  const Index d = subnets.front().layers.front().p_in.rows();
  const Index c = p_out.front().cols();
  PathDag dag(p);
  // inputs[t][i]
  std::vector<std::vector<int>> inputs(timesteps, std::vector<int>(d));
  for (int t = 0; t < timesteps; ++t) {
    for (Index i = 0; i < d; ++i) inputs[t][i] = dag.add_node(NodeRole::kInput, 0);
  }
  // t = 0 state nodes, created after all X^t inputs.
  std::vector<std::vector<std::vector<int>>> initial(subnets.size());
  for (std::size_t k = 0; k < subnets.size(); ++k) {
    subnets[k].validate();
    for (std::size_t l = 0; l < subnets[k].layers.size(); ++l) {
      const Index m = subnets[k].layers[l].p_in.cols();
      std::vector<int> ids(m);
      for (Index j = 0; j < m; ++j) {
        ids[j] = dag.add_node(NodeRole::kInput, 0, static_cast<int>(k));
      }
      initial[k].push_back(std::move(ids));
    }
  }
  std::vector<int> outputs(c);
  for (Index j = 0; j < c; ++j) outputs[j] = dag.add_node(NodeRole::kOutput, 0);

  int next_group = 0;
  for (std::size_t k = 0; k < subnets.size(); ++k) {
    const auto& layers = subnets[k].layers;
    const int kk = static_cast<int>(k);
    std::vector<int> in_group(layers.size()), rec_group(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l) {
      in_group[l] = next_group;
      next_group += static_cast<int>(layers[l].p_in.size());
      rec_group[l] = next_group;
      next_group += static_cast<int>(layers[l].p_rec.size());
    }
    std::vector<std::vector<int>> prev_state = initial[k];
    for (int t = 0; t < timesteps; ++t) {
      std::vector<int> below = inputs[t];
      std::vector<std::vector<int>> state(layers.size());
      for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& lay = layers[l];
        const Index m = lay.p_in.cols();
        auto& cur = state[l];
        for (Index j = 0; j < m; ++j) {
          cur.push_back(dag.add_node(NodeRole::kHidden,
                                     static_cast<int>(l + 1), kk));
        }
        for (Index i = 0; i < lay.p_in.rows(); ++i) {
          for (Index j = 0; j < m; ++j) {
            if (lay.p_in(i, j) == 0.0) continue;
            dag.add_edge(below[i], cur[j], lay.p_in(i, j),
                         in_group[l] + static_cast<int>(i * m + j));
          }
        }
        for (Index i = 0; i < m; ++i) {
          for (Index j = 0; j < m; ++j) {
            if (lay.p_rec(i, j) == 0.0) continue;
            dag.add_edge(prev_state[l][i], cur[j], lay.p_rec(i, j),
                         rec_group[l] + static_cast<int>(i * m + j));
          }
        }
        below = cur;
      }
      prev_state = std::move(state);
    }
    const RealMatrix& w = p_out[k];
    check(w.rows() == static_cast<Index>(prev_state.back().size()) &&
              w.cols() == c,
          "readout shape mismatch");
    for (Index i = 0; i < w.rows(); ++i) {
      for (Index j = 0; j < c; ++j) {
        if (w(i, j) != 0.0) dag.add_edge(prev_state.back()[i], outputs[j], w(i, j));
      }
    }
  }
  return dag;
}

PathDag lif_dag(std::span<const LifWitness> subnets,
                std::span<const RealMatrix> p_out, int timesteps,
                bool trainable_threshold, double p) {
  check(!subnets.empty() && subnets.size() == p_out.size(),
        "one readout per subnetwork required");
  check(timesteps >= 1, "rollout needs at least one timestep");
  const Index d = subnets.front().input_dim();
  const Index c = p_out.front().cols();
  PathDag dag(p);
  std::vector<std::vector<int>> inputs(timesteps, std::vector<int>(d));
  for (int t = 0; t < timesteps; ++t) {
    for (Index i = 0; i < d; ++i) inputs[t][i] = dag.add_node(NodeRole::kInput, 0);
  }
  std::vector<std::vector<std::vector<int>>> initial(subnets.size());
  for (std::size_t k = 0; k < subnets.size(); ++k) {
    subnets[k].validate();
    check(subnets[k].input_dim() == d, "subnetwork input widths differ");
    for (const auto& layer : subnets[k].layers) {
      std::vector<int> ids(layer.width());
      for (auto& id : ids) id = dag.add_node(NodeRole::kInput, 0, static_cast<int>(k));
      initial[k].push_back(std::move(ids));
    }
  }
  std::vector<int> outputs(c);
  for (Index j = 0; j < c; ++j) outputs[j] = dag.add_node(NodeRole::kOutput, 0);

  int next_group = 0;
  for (std::size_t k = 0; k < subnets.size(); ++k) {
    const auto& layers = subnets[k].layers;
    const int kk = static_cast<int>(k);
    std::vector<int> in_group(layers.size()), leak_group(layers.size()),
        reset_group(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l) {
      in_group[l] = next_group;
      next_group += static_cast<int>(layers[l].p_in.size());
      leak_group[l] = next_group;
      next_group += static_cast<int>(layers[l].width());
      reset_group[l] = next_group;
      next_group += static_cast<int>(layers[l].width());
    }
    std::vector<std::vector<int>> prev = initial[k];
    for (int t = 0; t < timesteps; ++t) {
      std::vector<int> below = inputs[t];
      std::vector<std::vector<int>> state(layers.size());
      for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& lay = layers[l];
        const Index m = lay.width();
        auto& cur = state[l];
        for (Index j = 0; j < m; ++j) {
          cur.push_back(dag.add_node(NodeRole::kHidden,
                                     static_cast<int>(l + 1), kk));
        }
        for (Index i = 0; i < lay.input_dim(); ++i) {
          for (Index j = 0; j < m; ++j) {
            if (lay.p_in(i, j) == 0.0) continue;
            dag.add_edge(below[i], cur[j], lay.p_in(i, j),
                         in_group[l] + static_cast<int>(i * m + j), true, true);
          }
        }
        for (Index j = 0; j < m; ++j) {
          if (lay.leak[j] != 0.0) {
            dag.add_edge(prev[l][j], cur[j], lay.leak[j],
                         leak_group[l] + static_cast<int>(j), false, false);
          }
          if (lay.u_thr[j] != 0.0) {
            dag.add_edge(prev[l][j], cur[j], -lay.u_thr[j],
                         reset_group[l] + static_cast<int>(j),
                         trainable_threshold, trainable_threshold);
          }
        }
        below = cur;
      }
      prev = std::move(state);
    }
    const RealMatrix& w = p_out[k];
    check(w.rows() == static_cast<Index>(prev.back().size()) && w.cols() == c,
          "readout shape mismatch");
    for (Index i = 0; i < w.rows(); ++i) {
      for (Index j = 0; j < c; ++j) {
        if (w(i, j) != 0.0) dag.add_edge(prev.back()[i], outputs[j], w(i, j));
      }
    }
  }
  return dag;
}

}  // namespace csnn
