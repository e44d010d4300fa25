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

// Path regularizers over network DAGs and the incoming-norm normalization
// that reduces them to outer-layer norms.
//
// A K-parallel network is one DAG whose hidden nodes carry a subnetwork id;
// the regularizer is the sum over subnetworks of the l_p path aggregate of
// that subnetwork. Recurrent networks are unrolled over time; the t = 0 state
// of every neuron is a source node, and the T copies of a recurrent weight
// share a tie group.

#ifndef CSNN_PATH_NORM_HPP_
#define CSNN_PATH_NORM_HPP_

#include <optional>
#include <span>
#include <vector>

#include "csnn/common.hpp"
#include "csnn/lif.hpp"

namespace csnn {

enum class NodeRole { kInput, kHidden, kOutput };

struct PathNode {
  NodeRole role = NodeRole::kHidden;
  int layer = 0;
  int subnet = 0;
};

struct PathEdge {
  int from = 0;
  int to = 0;
  double weight = 0.0;
  std::optional<int> tie_group;
  bool scale_bearing = true;  // delta(e)
  bool trainable = true;      // tau(e)
};

class PathDag {
 public:
  explicit PathDag(double p = 2.0);

  int add_node(NodeRole role, int layer, int subnet = 0);
  int add_edge(int from, int to, double weight,
               std::optional<int> tie_group = std::nullopt,
               bool scale_bearing = true, bool trainable = true);

  double p() const { return p_; }
  const std::vector<PathNode>& nodes() const { return nodes_; }
  const std::vector<PathEdge>& edges() const { return edges_; }
  std::vector<PathEdge>& mutable_edges() { return edges_; }
  int subnet_count() const;

  // Kahn order; throws "not a DAG".
  std::vector<int> topological_order() const;
  // Throws on cycles or unequal weights inside a tie group.
  void validate() const;

  std::vector<int> input_nodes() const;
  std::vector<int> output_nodes() const;

  // Threshold-network semantics: hidden node = 1{sum w * o(u) >= 0},
  // output node = sum w * o(u). `inputs` has one column per input node (in
  // creation order) and one row per sample; returns samples x outputs.
  RealMatrix evaluate(const RealMatrix& inputs) const;

 private:
  double p_;
  std::vector<PathNode> nodes_;
  std::vector<PathEdge> edges_;
};

struct PathNormValue {
  double value = 0.0;
  double p = 2.0;
};

// Sum over subnetworks of (sum_paths prod_e |w(e)|^p)^(1/p), by dynamic
// programming over a topological order. Switches to log-domain accumulation
// when any |w| is outside [1e-3, 1e3].
PathNormValue path_regularizer(const PathDag& dag);

// Same aggregate restricted to scale-bearing structure: a structural edge
// (delta = 0, e.g. a leak) transports its neuron's own scale and contributes
// no path mass of its own; scale-bearing edges contribute |w|^p.
PathNormValue lif_path_regularizer(const PathDag& dag);

// Explicit log-domain variant, exposed for tests of the overflow guard.
PathNormValue path_regularizer_log_domain(const PathDag& dag,
                                          bool scale_bearing_only);

// Divides every hidden node's incoming weights by their l_p norm. Outgoing
// weights are untouched: the threshold activation is invariant under positive
// scaling, so the network function is preserved. Throws
// "degenerate hidden node" for a zero incoming norm.
PathDag normalize_incoming(const PathDag& dag);

// Sum over subnetworks of the l_p norm of the weights entering output nodes.
double outer_norm_sum(const PathDag& dag);

// Per-neuron LIF normalization through lif_rescale: the scale-bearing block
// (p_in column, plus u_thr when trainable) gets unit l_p^p mass. Spikes are
// unchanged. Throws "degenerate neuron".
LifWitness lif_normalize(const LifWitness& witness, bool trainable_threshold,
                         double p = 2.0);

// DAG builders --------------------------------------------------------------

// K-parallel feedforward threshold network. subnets[k] lists the weight
// matrices W_1 .. W_L of subnetwork k (W_L maps to the shared outputs).
PathDag feedforward_dag(std::span<const std::vector<RealMatrix>> subnets,
                        double p);

// K-parallel recurrent threshold network unrolled over T steps, final-time
// readout through p_out[k]. Input nodes: X^t coordinates for t = 1..T (in
// that order), then the t = 0 state node of every hidden neuron.
PathDag recurrent_dag(std::span<const ThresholdRnnParams> subnets,
                      std::span<const RealMatrix> p_out, int timesteps,
                      double p);

// K-parallel LIF network unrolled over T steps. One node per (neuron, t);
// edges: p_in (scale-bearing), leak self-edge (structural), reset self-edge
// (scale-bearing iff the threshold is trainable). t = 0 state nodes are
// sources.
PathDag lif_dag(std::span<const LifWitness> subnets,
                std::span<const RealMatrix> p_out, int timesteps,
                bool trainable_threshold, double p);

}  // namespace csnn

#endif  // CSNN_PATH_NORM_HPP_
