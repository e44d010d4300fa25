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


// Surrogate-gradient BPTT for K-parallel LIF networks.
//
// The forward pass uses exact threshold spikes (or s(kU) everywhere in the
// smoothed mode used for gradient checks); the backward pass replaces the
// spike derivative with k s(kU) (1 - s(kU)), s the logistic sigmoid.

#ifndef CSNN_SURROGATE_HPP_
#define CSNN_SURROGATE_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "csnn/loss.hpp"
#include "csnn/reconstruct.hpp"
#include "csnn/tasks.hpp"
#include "csnn/witness.hpp"

namespace csnn {

struct Trainability {
  bool p_in = true;
  bool leak = false;
  bool u_thr = false;
  bool p_out = true;

  friend bool operator==(const Trainability&, const Trainability&) = default;
};

struct TrainableSnn {
  WitnessArch arch;
  ReadoutRule readout = ReadoutRule::kFinalTime;
  Index d_out = 1;
  std::vector<LifWitness> hidden;  // one per subnetwork
  std::vector<RealMatrix> p_out;   // m_last x d_out each
  Trainability trainable;

  Index k() const { return static_cast<Index>(hidden.size()); }
  void validate() const;
  ParallelSnn to_parallel() const;
  static TrainableSnn from_parallel(const ParallelSnn& snn,
                                    const Trainability& trainable = {});

  friend bool operator==(const TrainableSnn&, const TrainableSnn&) = default;
};

// Gaussian hidden witnesses (as for convex dictionaries) and
// N(0, 1 / (K m_last)) readouts.
TrainableSnn init_trainable(const WitnessArch& arch, Index k, Index d_out,
                            ReadoutRule readout, std::uint64_t seed,
                            const LeakSpec& leak = {},
                            const ThresholdSpec& thr = {},
                            const Trainability& trainable = {});

// Flattened trainable parameters, in subnet, layer, then group order
// (p_in, leak, u_thr), followed by every p_out.
RealVector get_params(const TrainableSnn& snn);
void set_params(TrainableSnn& snn, const RealVector& params);

double surrogate_derivative(double u, double slope);

struct BpttOptions {
  double slope = 25.0;
  bool smoothed_forward = false;
  bool detach_reset = false;
};

struct LossAndGradient {
  double loss = 0.0;
  RealVector gradient;  // aligned with get_params
  RealMatrix output;
};

// Loss and gradient of loss_value(spec, readout, targets). Throws
// "gradient overflow" on a non-finite gradient.
LossAndGradient surrogate_forward_backward(const TrainableSnn& snn,
                                           std::span<const RealMatrix> inputs,
                                           const RealMatrix& targets,
                                           const LossSpec& spec,
                                           const BpttOptions& options = {});

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct SurrogateConfig {
  double slope = 25.0;
  double learning_rate = 1e-3;
  Index epochs = 100;
  Index batch_size = 128;
  std::uint64_t seed = 0;
  AdamParams adam;
  double reg = 0.0;  // weight decay on trainable parameters
  bool detach_reset = false;
};

// Builds the (per-sample averaged) loss for a batch.
using LossFactory = std::function<LossSpec(const TaskDataset&)>;
// Higher is better.
using ValidationMetric =
    std::function<double(const TrainableSnn&, const TaskDataset&)>;

struct EpochRecord {
  Index epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
};

struct TrainResult {
  TrainableSnn best;
  Index best_epoch = 0;
  double best_metric = 0.0;
  std::vector<EpochRecord> curve;
  bool diverged = false;
};

// Adam epoch loop with seeded shuffling; returns the best-validation
// checkpoint (epoch 0 is the initialization). On divergence the last finite
// best checkpoint is returned with `diverged` set.
TrainResult train_sg(const SurrogateConfig& config, const TaskDataset& train,
                     const TaskDataset& val, const LossFactory& loss,
                     const ValidationMetric& metric, TrainableSnn init);

// Mean loss of the network on a dataset under the factory's spec.
double dataset_loss(const TrainableSnn& snn, const TaskDataset& data,
                    const LossFactory& loss);

nlohmann::json trainable_to_json(const TrainableSnn& snn,
                                 const std::string& stage);
TrainableSnn trainable_from_json(const nlohmann::json& j);

}  // namespace csnn

#endif  // CSNN_SURROGATE_HPP_
