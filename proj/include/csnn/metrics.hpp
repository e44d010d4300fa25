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


// Evaluation: decoding of readouts, addition metrics under teacher forcing
// and autoregressive rollout, classification accuracy, CSV emission.

#ifndef CSNN_METRICS_HPP_
#define CSNN_METRICS_HPP_

#include <functional>
#include <string>
#include <utility>

#include "csnn/reconstruct.hpp"
#include "csnn/tasks.hpp"

namespace csnn {

inline constexpr int kMetricsSchemaVersion = 1;

struct MetricsRecord {
  std::string task;
  std::string mode;  // "tf" or "ar"; classification tasks use "tf"
  std::string split;
  Index n = 0;
  Index timesteps = 0;
  // Primary metric: sum-digit token accuracy for addition, label accuracy
  // otherwise.
  double accuracy = 0.0;
  double token_acc = 0.0;
  double joint_token_acc = 0.0;
  double carry_acc = 0.0;
  double seq_acc = 0.0;  // joint-sequence accuracy
  // First timestep (1-based) with a wrong sum or carry, over sequences that
  // contain an error.
  Index error_sequences = 0;
  double first_error_mean = 0.0;
  double first_error_median = 0.0;
  Index first_error_min = 0;
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  double seconds = 0.0;
  std::uint64_t seed = 0;
};

// Argmax decoding of stacked addition readouts (row t*n + i); ties go to the
// lower index. Returns (sum, carry), each n x T.
std::pair<IntMatrix, IntMatrix> decode_addition(const RealMatrix& out,
                                                const TaskDataset& data);

MetricsRecord addition_metrics(const IntMatrix& pred_sum,
                               const IntMatrix& pred_carry,
                               const TaskDataset& data);

// XOR: sign of the single readout column (>= 0 is positive); MNIST: argmax.
double classification_accuracy(const RealMatrix& out, const TaskDataset& data);

// Teacher-forced primary metric from a full readout.
double task_metric(const RealMatrix& out, const TaskDataset& data);

MetricsRecord evaluate_teacher_forced(const ParallelSnn& snn,
                                      const TaskDataset& data,
                                      kernels::Exec exec = kernels::Exec::kParallel);

// Maps the n x input_dim input of the current timestep to the n x d_out
// readout; called once per timestep in order.
using StepFunction = std::function<RealMatrix(const RealMatrix&)>;

// The carry input at t > 0 is the model's argmax carry from t - 1; at t = 0
// it is the dataset's (zero) carry. Throws "autoregressive mode requires
// carry task" for non-addition data.
MetricsRecord eval_autoregressive(const StepFunction& step, const TaskDataset& data);
MetricsRecord eval_autoregressive(const ParallelSnn& snn, const TaskDataset& data,
                                  kernels::Exec exec = kernels::Exec::kParallel);

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRecord& record);

}  // namespace csnn

#endif  // CSNN_METRICS_HPP_
