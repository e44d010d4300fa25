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

// Exact forward dynamics of leaky integrate-and-fire (LIF) layers and of
// binary-state recurrent threshold networks.
//
// Conventions:
//  * threshold-centred membrane: a neuron spikes iff U >= 0 (so U == 0 and
//    U == -0.0 both spike);
//  * soft reset: U^t = S_{l-1}^t P_in + U^{t-1} .* leak - S^{t-1} .* u_thr;
//  * initial state S^0 = 0, U^0 = u_init.

#ifndef CSNN_LIF_HPP_
#define CSNN_LIF_HPP_

#include <span>
#include <vector>

#include "csnn/bitmatrix.hpp"
#include "csnn/common.hpp"
#include "csnn/kernels.hpp"

namespace csnn {

// Binary matrix (samples x width) whose entries are exactly 0 or 1.
class SpikeMatrix {
 public:
  SpikeMatrix() = default;
  SpikeMatrix(Index rows, Index cols) : values_(ByteMatrix::Zero(rows, cols)) {}
  explicit SpikeMatrix(ByteMatrix values);

  Index rows() const { return values_.rows(); }
  Index cols() const { return values_.cols(); }
  bool operator()(Index i, Index j) const { return values_(i, j) != 0; }
  void set(Index i, Index j, bool v) { values_(i, j) = v ? 1 : 0; }

  const ByteMatrix& values() const { return values_; }
  RealMatrix as_real() const { return values_.cast<double>(); }

  friend bool operator==(const SpikeMatrix& a, const SpikeMatrix& b) {
    return a.values_.rows() == b.values_.rows() &&
           a.values_.cols() == b.values_.cols() && a.values_ == b.values_;
  }

 private:
  ByteMatrix values_;
};

using MembraneMatrix = RealMatrix;

struct LifLayerParams {
  RealMatrix p_in;     // width_prev x width
  RealVector leak;     // width, each in [0, 1)
  RealVector u_thr;    // width, soft-reset amount
  RealVector u_init;   // width, U^0

  Index width() const { return p_in.cols(); }
  Index input_dim() const { return p_in.rows(); }
  void validate(int layer_index) const;

  friend bool operator==(const LifLayerParams&, const LifLayerParams&) =
      default;
};

// Frozen hidden parameters for layers 1 .. L-1.
struct LifWitness {
  std::vector<LifLayerParams> layers;

  Index input_dim() const { return layers.front().input_dim(); }
  Index output_width() const { return layers.back().width(); }
  Index depth() const { return static_cast<Index>(layers.size()); }
  // Throws "shape mismatch at layer l" when widths do not chain.
  void validate() const;

  friend bool operator==(const LifWitness&, const LifWitness&) = default;
};

struct ThresholdRnnLayer {
  RealMatrix p_in;   // width_prev x width
  RealMatrix p_rec;  // width x width
};

struct ThresholdRnnParams {
  std::vector<ThresholdRnnLayer> layers;
  void validate() const;
};

// Full record of a rollout: membrane[l][t] and spikes[l][t] for hidden
// layer l (0-based) and timestep t (0-based, i.e. t = 1 .. T).
struct LifTrajectory {
  std::vector<std::vector<MembraneMatrix>> membrane;
  std::vector<std::vector<SpikeMatrix>> spikes;

  Index timesteps() const {
    return spikes.empty() ? 0 : static_cast<Index>(spikes.front().size());
  }
  const SpikeMatrix& final_layer(Index t) const { return spikes.back()[t]; }
};

struct ThresholdRnnTrajectory {
  std::vector<std::vector<SpikeMatrix>> states;  // [layer][t]
};

// sigma(x) = 1{x >= 0}. Throws "non-finite pre-activation" on NaN/Inf.
SpikeMatrix threshold(const RealMatrix& x);

// Incremental LIF simulation. Holds (U, S) for every layer; each step()
// consumes X^t and advances all layers by one timestep. All entry points of
// the library (rollouts, dictionary building, reconstruction, surrogate
// forward in exact mode) go through the same kernels, so spikes are
// bit-identical across them.
class LifState {
 public:
  LifState(const LifWitness& witness, Index n_samples,
           kernels::Exec exec = kernels::Exec::kParallel);

  void step(const RealMatrix& x);

  const RealMatrix& membrane(Index layer) const { return u_[layer]; }
  const ByteMatrix& spikes(Index layer) const { return s_[layer]; }
  const ByteMatrix& output_spikes() const { return s_.back(); }
  Index timestep() const { return t_; }

 private:
  const LifWitness* witness_;
  kernels::Exec exec_;
  std::vector<RealMatrix> u_;
  std::vector<ByteMatrix> s_;
  Index t_ = 0;
};

LifTrajectory lif_rollout(const LifWitness& witness,
                          std::span<const RealMatrix> inputs);

// Final hidden layer spikes at every timestep (cheaper than lif_rollout when
// only the readout layer is needed).
std::vector<ByteMatrix> lif_output_spikes(
    const LifWitness& witness, std::span<const RealMatrix> inputs,
    kernels::Exec exec = kernels::Exec::kParallel);

ThresholdRnnTrajectory threshold_rnn_rollout(
    const ThresholdRnnParams& params, std::span<const RealMatrix> inputs);

// Positive diagonal membrane rescaling: p_in * A, u_thr * A, u_init * A per
// layer, leak unchanged. Throws "scale must be positive".
LifWitness lif_rescale(const LifWitness& witness,
                       std::span<const RealVector> scales);

}  // namespace csnn

#endif  // CSNN_LIF_HPP_
