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


// Datasets: carry-augmented base-b addition, first-last XOR, and sequential
// MNIST patches, plus a float32 cache format.
//
// Addition digits run least-significant first, so the carry is causal. Each
// step t sees (a_t / (b-1), b_t / (b-1), c_t^in); T = n_digits + 1, the last
// column having zero operand digits. Targets are stacked time-major
// (row t * n + i) as [one-hot sum digit (b) | one-hot carry out (2)].

#ifndef CSNN_TASKS_HPP_
#define CSNN_TASKS_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "csnn/common.hpp"
#include "csnn/loss.hpp"

namespace csnn {

using IntMatrix =
    Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class TaskKind { kAddition, kFirstLastXor, kMnist };

std::string task_kind_name(TaskKind kind);
TaskKind task_kind_from_name(const std::string& name);

struct TaskMeta {
  TaskKind kind = TaskKind::kAddition;
  int base = 2;
  Index n_digits = 0;
  Index timesteps = 0;
  std::uint64_t seed = 0;
  std::string split;
  bool one_hot_input = false;  // XOR only

  friend bool operator==(const TaskMeta&, const TaskMeta&) = default;
};

struct TaskDataset {
  TaskMeta meta;
  std::vector<RealMatrix> inputs;  // T entries, n x input_dim
  // addition: nT x (base + 2); XOR: n x 1 in {-1, +1}; MNIST: n x 10 one-hot
  RealMatrix targets;
  IntMatrix a_digits;    // addition: n x n_digits
  IntMatrix b_digits;    // addition: n x n_digits
  IntMatrix sum_digits;  // addition: n x T
  IntMatrix carry_out;   // addition: n x T
  std::vector<int> labels;  // XOR, MNIST

  Index n() const { return inputs.empty() ? 0 : inputs.front().rows(); }
  Index input_dim() const { return inputs.empty() ? 0 : inputs.front().cols(); }
  bool per_timestep() const { return meta.kind == TaskKind::kAddition; }
  Index d_out() const { return targets.cols(); }

  friend bool operator==(const TaskDataset&, const TaskDataset&) = default;
};

// Rows of a dataset (targets and stacked rows follow the samples).
TaskDataset subset(const TaskDataset& data, const std::vector<Index>& rows);

// Operands are uniform over [0, base^n_digits) (independent uniform digits).
// Sample i depends only on (seed, i).
TaskDataset gen_addition(int base, Index n_digits, Index n_samples,
                         std::uint64_t seed, Index first_index = 0);

// Input row for addition step t (0-based) with the given carry-in per sample.
RealMatrix addition_step_input(const TaskDataset& data, Index t,
                               const std::vector<int>& carry_in);

struct SplitSizes {
  Index train_pre = 2304;
  Index val_pre = 512;
  Index train_ft = 2304;
  Index val_ft = 512;
  Index test = 1024;
};

// Disjoint index ranges of one seeded sample pool, in the order
// train_pre, val_pre, train_ft, val_ft, test.
std::map<std::string, TaskDataset> addition_splits(int base, Index n_digits,
                                                   std::uint64_t seed,
                                                   const SplitSizes& sizes = {});

// Evaluation lengths for length generalization.
std::vector<Index> ood_digit_lengths(int base);

// Inputs are i.i.d. fair bits; label = x_1 XOR x_T with exactly floor(n/2)
// positive samples in a seeded order.
TaskDataset gen_first_last_xor(Index timesteps, Index n_samples,
                               std::uint64_t seed, bool one_hot_input = false);

// IDX ------------------------------------------------------------------------

struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;  // unsigned-byte payload

  friend bool operator==(const IdxArray&, const IdxArray&) = default;
};

// Reads plain or gzip-compressed IDX (unsigned byte payloads only).
// Throws "corrupt IDX file".
IdxArray read_idx(const std::filesystem::path& path);
void write_idx(const IdxArray& array, const std::filesystem::path& path,
               bool gzip);

// Each 28x28 image, flattened row-major, is split into T contiguous patches
// of 784 / T pixels scaled to [0, 1]; one-hot label at the final step.
TaskDataset load_mnist_seq(const std::filesystem::path& images,
                           const std::filesystem::path& labels,
                           Index timesteps, Index n_samples = 0,
                           Index offset = 0);
std::vector<std::uint8_t> mnist_image_bytes(const TaskDataset& data,
                                            Index sample);

// Losses ---------------------------------------------------------------------

// Linear ramp from 0.5 to 1.5 over T steps (mean 1); all ones for T = 1.
RealVector ramp_weights(Index timesteps);

// lambda_sum * L_sum + lambda_carry * L_carry over the stacked addition
// targets, with ramped (or uniform) timestep row weights.
LossSpec joint_loss_spec(int base, double lambda_sum, double lambda_carry,
                         Index timesteps, Index n, bool ramp,
                         LossKind kind = LossKind::kSquared);

const std::vector<double>& lambda_carry_grid();
const std::vector<double>& reg_grid();
const std::vector<double>& sg_lr_grid();

// Cache ------------------------------------------------------------------------

void save_dataset(const TaskDataset& data, const std::filesystem::path& path);
TaskDataset load_dataset(const std::filesystem::path& path);

}  // namespace csnn

#endif  // CSNN_TASKS_HPP_
