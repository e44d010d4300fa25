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


// Executable K-parallel LIF networks built from a convex solution.
//
// Subnetwork k runs its own hidden witness and reads out its final-layer
// spikes through p_out_k (m_last x d_out). Outputs are summed over
// subnetworks, either at the final timestep or at every timestep (rows stacked
// time-major, matching a stacked dictionary).

#ifndef CSNN_RECONSTRUCT_HPP_
#define CSNN_RECONSTRUCT_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "csnn/convex.hpp"
#include "csnn/dictionary.hpp"
#include "csnn/witness.hpp"

namespace csnn {

enum class ReadoutRule { kFinalTime, kPerTimestep };

std::string readout_rule_name(ReadoutRule rule);
ReadoutRule readout_rule_from_name(const std::string& name);

struct SnnSubnet {
  LifWitness witness;
  RealMatrix p_out;  // m_last x d_out
  // Index of the witness in its store; subnetworks sharing an id share the
  // hidden dynamics, which forward() rolls out once.
  Index witness_id = -1;

  friend bool operator==(const SnnSubnet&, const SnnSubnet&) = default;
};

struct ParallelSnn {
  WitnessArch arch;
  ReadoutRule readout = ReadoutRule::kFinalTime;
  Index d_out = 1;
  std::vector<SnnSubnet> subnets;

  Index k() const { return static_cast<Index>(subnets.size()); }
  void validate() const;
  // n x d_out (final time) or nT x d_out (per timestep).
  RealMatrix forward(std::span<const RealMatrix> inputs,
                     kernels::Exec exec = kernels::Exec::kParallel) const;
  // Merges subnetworks with the same witness id by summing their p_out.
  ParallelSnn merged() const;
  // sum_k ||p_out_k||_F.
  double outer_norm() const;

  friend bool operator==(const ParallelSnn&, const ParallelSnn&) = default;
};

// Runs a network one timestep at a time so later inputs may depend on earlier
// outputs. Each step returns n x d_out readout of the current spikes.
class SnnStepper {
 public:
  SnnStepper(const ParallelSnn& snn, Index n_samples,
             kernels::Exec exec = kernels::Exec::kParallel);
  RealMatrix step(const RealMatrix& x);
  Index timestep() const { return t_; }

 private:
  ParallelSnn merged_;
  std::vector<LifState> states_;
  Index t_ = 0;
};

enum class OutputRule {
  // Uniform (w / m_last) 1 when every final-layer neuron of the witness
  // produces the same column on the training inputs, otherwise masked.
  kAuto,
  kUniform,
  kMasked,  // weight only on the generating neuron's row
  // Every final-layer neuron becomes a copy of the generating one, then the
  // uniform rule applies; outer norm equals the scaled convex penalty.
  kReplicated,
};

ParallelSnn reconstruct(const SpikeDictionary& dict, const WitnessStore& store,
                        const ConvexSolution& solution,
                        std::span<const RealMatrix> inputs,
                        OutputRule rule = OutputRule::kAuto);

struct ReconstructionReport {
  double max_deviation = 0.0;
  std::vector<Index> mismatched_subnets;  // spike column != dictionary column
  Index support = 0;
  bool support_within_bound = true;  // support <= n + 1
  bool passed = true;
};

ReconstructionReport verify_reconstruction(const ParallelSnn& snn,
                                           const SpikeDictionary& dict,
                                           const ConvexSolution& solution,
                                           std::span<const RealMatrix> inputs,
                                           double tolerance = 1e-9);

// L(forward, Y) + reg_beta * sum_k ||p_out_k||.
double network_objective(const ParallelSnn& snn,
                         std::span<const RealMatrix> inputs,
                         const RealMatrix& targets, const LossSpec& loss,
                         double reg_beta);

nlohmann::json snn_to_json(const ParallelSnn& snn);
ParallelSnn snn_from_json(const nlohmann::json& j);
void save_snn(const ParallelSnn& snn, const std::filesystem::path& path);
ParallelSnn load_snn(const std::filesystem::path& path);

}  // namespace csnn

#endif  // CSNN_RECONSTRUCT_HPP_
