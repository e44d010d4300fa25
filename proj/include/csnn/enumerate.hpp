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


// Exact dictionary enumeration at micro scale.
//
// exact_enumerate_arrangement lists every sign pattern 1{Z u >= 0} over
// u in R^d, including patterns realized only on lower-dimensional faces, by
// walking the flats of the central arrangement in exact rational arithmetic.
//
// exact_enumerate_snn_dictionary lists every final-layer column realizable by
// a LIF witness whose per-neuron leak and threshold lie on a declared grid.
// For fixed (leak, threshold) and a fixed spike history the membrane of a
// neuron is affine in its input weights, so the trajectory is constant on
// every face of the arrangement formed by all history-indexed hyperplanes;
// one exact point per face covers every trajectory. Completeness is relative
// to the grid only.

#ifndef CSNN_ENUMERATE_HPP_
#define CSNN_ENUMERATE_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "csnn/dictionary.hpp"
#include "csnn/witness.hpp"

namespace csnn {

using Pattern = std::vector<std::uint8_t>;

// Sorted, duplicate-free. Throws "exact enumeration out of budget" when
// n > n_max or d > 3.
std::vector<Pattern> exact_enumerate_arrangement(const RealMatrix& z,
                                                 Index n_max = 12);

struct SnnGrid {
  std::vector<double> leaks{0.0, 0.5, 0.9};
  // Positive thresholds are equivalent under membrane rescaling, so {0, 1}
  // covers every nonnegative threshold.
  std::vector<double> thresholds{0.0, 1.0};
};

struct MicroLimits {
  Index n_max = 8;
  Index t_max = 3;
  int depth_max = 3;
  Index width_max = 2;
  Index input_dim_max = 2;
  // Upper bound on the number of candidate witness points rolled out.
  Index work_budget = 20'000'000;
};

struct EnumeratedDictionary {
  SpikeDictionary dictionary;
  WitnessStore store;
  // Candidate points whose floating-point rollout disagreed with the exact
  // rational rollout (the floating-point column is the one kept).
  Index inexact_points = 0;
  Index first_layer_trajectories = 0;
};

EnumeratedDictionary exact_enumerate_snn_dictionary(
    const WitnessArch& arch, std::span<const RealMatrix> inputs,
    const SnnGrid& grid, const MicroLimits& limits = {});

}  // namespace csnn

#endif  // CSNN_ENUMERATE_HPP_
