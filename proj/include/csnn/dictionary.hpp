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


// Binary spike dictionaries: one column per distinct final-layer spike
// pattern, each tagged with the (witness, neuron) that generates it.

#ifndef CSNN_DICTIONARY_HPP_
#define CSNN_DICTIONARY_HPP_

#include <filesystem>
#include <span>
#include <vector>

#include "csnn/bitmatrix.hpp"
#include "csnn/witness.hpp"

namespace csnn {

struct WitnessRef {
  Index witness = 0;
  Index neuron = 0;

  friend auto operator<=>(const WitnessRef&, const WitnessRef&) = default;
};

// Final-time dictionary (rows = samples) or, when `stacked`, the trajectory
// dictionary whose row t * n + i holds sample i at timestep t + 1.
struct SpikeDictionary {
  BitColumns columns;
  std::vector<WitnessRef> witness_of;
  Index n = 0;
  Index timesteps = 0;
  Index m_last = 0;
  bool stacked = false;

  Index size() const { return columns.cols(); }
  Index rows() const { return columns.rows(); }

  friend bool operator==(const SpikeDictionary&,
                         const SpikeDictionary&) = default;
};

using TrajectoryDictionary = SpikeDictionary;

// The n-bit (or nT-bit when stacked) column generated by one final-layer
// neuron of a witness.
std::vector<std::uint64_t> witness_column(const LifWitness& witness,
                                          Index neuron,
                                          std::span<const RealMatrix> inputs,
                                          bool stacked);

// One candidate per (witness, final-layer neuron), deduplicated by exact bit
// equality; the representative is the lowest (witness, neuron) and columns
// are ordered by representative. Throws "no witnesses".
SpikeDictionary build_sampled_dictionary(
    const WitnessStore& store, std::span<const RealMatrix> inputs,
    kernels::Exec exec = kernels::Exec::kParallel);

// As above, deduplicating on the stacked nT-vector of every timestep.
TrajectoryDictionary build_trajectory_dictionary(
    const WitnessStore& store, std::span<const RealMatrix> inputs,
    kernels::Exec exec = kernels::Exec::kParallel);

// Rolls every stored witness again and compares bit-for-bit.
bool verify_witnessed(const SpikeDictionary& dict, const WitnessStore& store,
                      std::span<const RealMatrix> inputs);

// Binary container: magic "SNNDICT1"; n, P, T, m_last as little-endian u32;
// packed column words (little-endian u64); u64 trailer length; JSON trailer
// with the witness map and the stacked flag.
void save_dictionary(const SpikeDictionary& dict,
                     const std::filesystem::path& path);
SpikeDictionary load_dictionary(const std::filesystem::path& path);

}  // namespace csnn

#endif  // CSNN_DICTIONARY_HPP_
