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


// Frozen hidden witnesses: Gaussian-sampled stores, stores extracted from
// trained networks, and their JSON persistence.

#ifndef CSNN_WITNESS_HPP_
#define CSNN_WITNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "csnn/lif.hpp"

namespace csnn {

// Hidden architecture shared by every witness of a store. widths lists the
// hidden layers 1 .. L-1, so the network depth is L = widths.size() + 1.
struct WitnessArch {
  Index input_dim = 0;
  std::vector<Index> widths;
  Index timesteps = 0;

  Index last_width() const { return widths.back(); }
  int depth() const { return static_cast<int>(widths.size()) + 1; }
  void validate() const;
  bool matches(const LifWitness& w) const;

  friend bool operator==(const WitnessArch&, const WitnessArch&) = default;
};

enum class LeakMode { kFixed, kUniform };
enum class ThresholdMode { kFixed, kHalfNormal };

struct LeakSpec {
  LeakMode mode = LeakMode::kFixed;
  double value = 0.9;
  double lo = 0.0;
  double hi = 0.95;
};

struct ThresholdSpec {
  ThresholdMode mode = ThresholdMode::kFixed;
  double value = 1.0;
};

enum class WitnessSource { kGaussian, kPretrained, kEnumerated };

struct WitnessProvenance {
  WitnessSource source = WitnessSource::kGaussian;
  std::uint64_t seed = 0;
  Index index = 0;
  std::string checkpoint;  // pretrained only
  Index subnet = 0;        // pretrained only

  friend bool operator==(const WitnessProvenance&,
                         const WitnessProvenance&) = default;
};

struct WitnessStore {
  WitnessArch arch;
  std::vector<LifWitness> witnesses;
  std::vector<WitnessProvenance> provenance;

  Index size() const { return static_cast<Index>(witnesses.size()); }
  void validate() const;

  friend bool operator==(const WitnessStore&, const WitnessStore&) = default;
};

// Witness `index` of the Gaussian store with this seed; a pure function of
// its arguments. p_in ~ N(0, 1/width_prev), u_init = 0.
LifWitness sample_gaussian_witness(const WitnessArch& arch, std::uint64_t seed,
                                   Index index, const LeakSpec& leak,
                                   const ThresholdSpec& thr);

WitnessStore sample_gaussian_witnesses(const WitnessArch& arch, Index count,
                                       std::uint64_t seed,
                                       const LeakSpec& leak = {},
                                       const ThresholdSpec& thr = {});

// Copies hidden parameters verbatim (output layers are not part of a
// LifWitness). Throws "incompatible checkpoint" on an architecture mismatch.
WitnessStore extract_pretrained_witnesses(const WitnessArch& arch,
                                          std::span<const LifWitness> hidden,
                                          const std::string& checkpoint_id);

nlohmann::json witness_to_json(const LifWitness& w);
LifWitness witness_from_json(const nlohmann::json& j);
nlohmann::json store_to_json(const WitnessStore& store);
WitnessStore store_from_json(const nlohmann::json& j);
void save_store(const WitnessStore& store, const std::filesystem::path& path);
WitnessStore load_store(const std::filesystem::path& path);

// Shared JSON helpers for row-major numeric arrays.
nlohmann::json matrix_to_json(const RealMatrix& m);
RealMatrix matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const RealVector& v);
RealVector vector_from_json(const nlohmann::json& j);

}  // namespace csnn

#endif  // CSNN_WITNESS_HPP_
