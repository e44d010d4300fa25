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

#include "csnn/lif.hpp"

#include <cmath>
#include <string>

namespace csnn {

SpikeMatrix::SpikeMatrix(ByteMatrix values) : values_(std::move(values)) {
  for (Index i = 0; i < values_.size(); ++i) {
    check(values_.data()[i] <= 1, "spike entries must be 0 or 1");
  }
}

void LifLayerParams::validate(int layer_index) const {
  const std::string where = " at layer " + std::to_string(layer_index);
  check(leak.size() == width() && u_thr.size() == width() &&
            u_init.size() == width(),
        "shape mismatch" + where);
  for (Index j = 0; j < width(); ++j) {
    check(std::isfinite(leak[j]) && leak[j] >= 0.0 && leak[j] < 1.0,
          "leak out of [0,1)");
  }
  check(all_finite(p_in) && u_thr.allFinite() && u_init.allFinite(),
        "non-finite parameter" + where);
}

void LifWitness::validate() const {
  check(!layers.empty(), "witness has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (l > 0 && layers[l].input_dim() != layers[l - 1].width()) {
      fail("shape mismatch at layer " + std::to_string(l + 1));
    }
    layers[l].validate(static_cast<int>(l + 1));
  }
}

void ThresholdRnnParams::validate() const {
  check(!layers.empty(), "network has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    const bool chained =
        l == 0 || layer.p_in.rows() == layers[l - 1].p_in.cols();
    if (!chained || layer.p_rec.rows() != layer.p_in.cols() ||
        layer.p_rec.cols() != layer.p_in.cols()) {
      fail("shape mismatch at layer " + std::to_string(l + 1));
    }
  }
}

SpikeMatrix threshold(const RealMatrix& x) {
  ByteMatrix out(x.rows(), x.cols());
  for (Index i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    check(std::isfinite(v), "non-finite pre-activation");
    out.data()[i] = v >= 0.0 ? 1 : 0;
  }
  return SpikeMatrix(std::move(out));
}

LifState::LifState(const LifWitness& witness, Index n_samples,
                   kernels::Exec exec)
    : witness_(&witness), exec_(exec) {
  witness.validate();
  for (const auto& layer : witness.layers) {
    RealMatrix u(n_samples, layer.width());
    for (Index i = 0; i < n_samples; ++i) u.row(i) = layer.u_init.transpose();
    u_.push_back(std::move(u));
    s_.push_back(ByteMatrix::Zero(n_samples, layer.width()));
  }
}

void LifState::step(const RealMatrix& x) {
  const auto& layers = witness_->layers;
  if (x.cols() != layers.front().input_dim() || x.rows() != u_[0].rows()) {
    fail("shape mismatch at layer 1");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& p = layers[l];
    const bool finite =
        l == 0 ? kernels::lif_step(x, p.p_in, p.leak, p.u_thr, u_[l], s_[l],
                                   exec_)
               : kernels::lif_step(s_[l - 1], p.p_in, p.leak, p.u_thr, u_[l],
                                   s_[l], exec_);
    check(finite, "membrane overflow");
  }
  ++t_;
}

LifTrajectory lif_rollout(const LifWitness& witness,
                          std::span<const RealMatrix> inputs) {
  check(!inputs.empty(), "rollout needs at least one timestep");
  LifState state(witness, inputs.front().rows());
  LifTrajectory traj;
  traj.membrane.resize(witness.layers.size());
  traj.spikes.resize(witness.layers.size());
  for (const auto& x : inputs) {
    state.step(x);
    for (std::size_t l = 0; l < witness.layers.size(); ++l) {
      traj.membrane[l].push_back(state.membrane(static_cast<Index>(l)));
      traj.spikes[l].emplace_back(state.spikes(static_cast<Index>(l)));
    }
  }
  return traj;
}

std::vector<ByteMatrix> lif_output_spikes(const LifWitness& witness,
                                          std::span<const RealMatrix> inputs,
                                          kernels::Exec exec) {
  check(!inputs.empty(), "rollout needs at least one timestep");
  LifState state(witness, inputs.front().rows(), exec);
  std::vector<ByteMatrix> out;
  out.reserve(inputs.size());
  for (const auto& x : inputs) {
    state.step(x);
    out.push_back(state.output_spikes());
  }
  return out;
}

ThresholdRnnTrajectory threshold_rnn_rollout(
    const ThresholdRnnParams& params, std::span<const RealMatrix> inputs) {
  params.validate();
  check(!inputs.empty(), "rollout needs at least one timestep");
  const Index n = inputs.front().rows();
  std::vector<ByteMatrix> h;
  for (const auto& layer : params.layers) {
    h.push_back(ByteMatrix::Zero(n, layer.p_in.cols()));
  }
  ThresholdRnnTrajectory traj;
  traj.states.resize(params.layers.size());
  for (const auto& x : inputs) {
    if (x.cols() != params.layers.front().p_in.rows() || x.rows() != n) {
      fail("shape mismatch at layer 1");
    }
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      const auto& layer = params.layers[l];
      const bool finite =
          l == 0 ? kernels::threshold_rnn_step(x, layer.p_in, layer.p_rec, h[l])
                 : kernels::threshold_rnn_step(h[l - 1], layer.p_in,
                                               layer.p_rec, h[l]);
      check(finite, "non-finite pre-activation");
      traj.states[l].emplace_back(h[l]);
    }
  }
  return traj;
}

LifWitness lif_rescale(const LifWitness& witness,
                       std::span<const RealVector> scales) {
  check(scales.size() == witness.layers.size(),
        "one scale vector per layer required");
  LifWitness out = witness;
  for (std::size_t l = 0; l < out.layers.size(); ++l) {
    auto& layer = out.layers[l];
    const RealVector& a = scales[l];
    check(a.size() == layer.width(),
          "shape mismatch at layer " + std::to_string(l + 1));
    for (Index j = 0; j < a.size(); ++j) {
      check(std::isfinite(a[j]) && a[j] > 0.0, "scale must be positive");
      layer.p_in.col(j) *= a[j];
      layer.u_thr[j] *= a[j];
      layer.u_init[j] *= a[j];
    }
  }
  return out;
}

}  // namespace csnn
