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


// Brute-force lower-bound check on micro instances: the convex optimum over
// the grid-complete dictionary against randomly drawn finite networks.

#ifndef CSNN_ORACLE_HPP_
#define CSNN_ORACLE_HPP_

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "csnn/convex.hpp"
#include "csnn/enumerate.hpp"

namespace csnn {

struct MicroInstance {
  std::uint64_t seed = 0;
  WitnessArch arch;
  std::vector<RealMatrix> inputs;
  RealMatrix targets;  // n x 1, final-time readout
  SnnGrid grid;
};

// n in [3, 6], T in [1, 3], two hidden layers of width 1 or 2, input
// dimension 1 or 2, Gaussian inputs and targets. T <= 2 when both the input
// dimension and the first width are 2.
MicroInstance make_micro_instance(std::uint64_t seed);

struct TrialOptions {
  Index n_trials = 100'000;
  Index k = 2;            // subnetworks per random network
  bool on_grid = true;    // leak and threshold drawn from the grid
  Index inner_iterations = 200;
};

// One reduced objective per trial: random LIF hidden parameters, normalized
// with lif_normalize, then p_out fitted by proximal gradient. Any p_out gives
// a valid network, so the fit only tightens the comparison.
std::vector<double> random_network_objective(const MicroInstance& instance,
                                             const TrialOptions& options,
                                             double reg_beta);

struct OracleReport {
  std::uint64_t seed = 0;
  Index n = 0;
  Index timesteps = 0;
  std::vector<Index> widths;
  Index dictionary_size = 0;
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  double reconstructed_objective = 0.0;
  Index trials = 0;
  double min_network_objective = 0.0;
  Index violations = 0;
  // Off-grid leaks; the bound may fail by grid resolution only.
  Index off_grid_trials = 0;
  double off_grid_min_objective = 0.0;
  Index off_grid_violations = 0;
  double off_grid_worst_shortfall = 0.0;
  double seconds = 0.0;
};

// Objectives below dual - kBoundSlack * (1 + |dual|) count as violations.
inline constexpr double kBoundSlack = 1e-12;

OracleReport run_oracle_instance(const MicroInstance& instance, double reg_beta,
                                 const TrialOptions& on_grid,
                                 Index off_grid_trials);

nlohmann::json oracle_report_to_json(const OracleReport& report);

}  // namespace csnn

#endif  // CSNN_ORACLE_HPP_
