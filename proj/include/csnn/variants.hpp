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


// The five training pipelines: SG, CVX, SG-CVX, SG-SG, CVX-SG.

#ifndef CSNN_VARIANTS_HPP_
#define CSNN_VARIANTS_HPP_

#include <optional>
#include <string>

#include "csnn/convex.hpp"
#include "csnn/dictionary.hpp"
#include "csnn/metrics.hpp"
#include "csnn/surrogate.hpp"
#include "csnn/tasks.hpp"

namespace csnn {

enum class VariantKind { kSg, kCvx, kSgCvx, kSgSg, kCvxSg };

std::string variant_name(VariantKind v);  // "sg", "cvx", "sg-cvx", ...
VariantKind variant_from_name(const std::string& name);

struct TaskLossOptions {
  LossKind kind = LossKind::kSquared;
  double lambda_carry = 1.0;  // addition only; lambda_sum is 1
  bool ramp = true;           // addition only
};

// Mean over samples: every row weight carries a 1/n factor.
LossSpec task_loss(const TaskDataset& data, const TaskLossOptions& options);

struct VariantConfig {
  WitnessArch arch;
  Index k = 2;            // SG subnetworks
  Index m_witnesses = 2;  // Gaussian witness groups for CVX
  LeakSpec leak;
  ThresholdSpec thr;
  std::uint64_t seed = 0;
  double reg_beta = 0.1;
  Penalty penalty = Penalty::kRowGroup;
  SolverOptions solver;
  OutputRule output_rule = OutputRule::kAuto;
  TaskLossOptions loss;
  SurrogateConfig sg;        // first (or only) SG stage
  SurrogateConfig finetune;  // second SG stage of SG-SG and CVX-SG
  Trainability trainable;
};

// Single-stage variants use the pretraining split; two-stage variants run
// the first stage on the pretraining split and the second on the finetune
// split.
struct VariantData {
  const TaskDataset* train_pre = nullptr;
  const TaskDataset* val_pre = nullptr;
  const TaskDataset* train_ft = nullptr;
  const TaskDataset* val_ft = nullptr;
};

// SG-CVX and SG-SG need `sg`; CVX-SG needs `cvx`.
struct VariantCheckpoints {
  const TrainableSnn* sg = nullptr;
  const ParallelSnn* cvx = nullptr;
};

struct VariantResult {
  VariantKind kind = VariantKind::kSg;
  ParallelSnn model;
  std::optional<TrainableSnn> trainable;  // SG-trained variants
  std::optional<ConvexSolution> solution;
  std::optional<TrainResult> training;
  std::optional<ReconstructionReport> reconstruction;
  WitnessStore store;  // convex variants
  // Convex variants: hidden parameters byte-identical before and after the
  // convex stage, and the model's hidden spikes equal the frozen witnesses'.
  bool hidden_frozen = true;
  double seconds = 0.0;
};

// Throws "missing prerequisite checkpoint: sg" (or ": cvx").
VariantResult run_variant(VariantKind kind, const VariantConfig& config,
                          const VariantData& data,
                          const VariantCheckpoints& checkpoints = {});

// Dictionary of the convex stage: trajectory-stacked for per-timestep tasks.
SpikeDictionary convex_dictionary(const WitnessStore& store, const TaskDataset& train);

// The program the convex stage solves; `dict` must outlive the result.
ConvexProblem convex_problem(const SpikeDictionary& dict, const VariantConfig& config,
                             const TaskDataset& train);

// The convex stage alone over a frozen witness store.
VariantResult run_convex_stage(const WitnessStore& store, const VariantConfig& config,
                               const TaskDataset& train);

}  // namespace csnn

#endif  // CSNN_VARIANTS_HPP_
