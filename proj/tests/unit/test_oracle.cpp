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


#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "csnn/oracle.hpp"

using namespace csnn;

TEST_CASE("micro instances respect the enumeration limits") {
  const MicroLimits lim;
  for (std::uint64_t s = 1; s <= 50; ++s) {
    const MicroInstance inst = make_micro_instance(s);
    const Index n = inst.targets.rows();
    CHECK(n >= 3);
    CHECK(n <= 6);
    CHECK(inst.arch.timesteps <= lim.t_max);
    CHECK(inst.arch.widths.size() == 2);
    for (Index w : inst.arch.widths) CHECK(w <= lim.width_max);
    if (inst.arch.input_dim == 2 && inst.arch.widths[0] == 2) CHECK(inst.arch.timesteps <= 2);
    CHECK(static_cast<Index>(inst.inputs.size()) == inst.arch.timesteps);
  }
  CHECK(make_micro_instance(9).targets == make_micro_instance(9).targets);
}

TEST_CASE("convex optimum lower-bounds random grid networks") {
  TrialOptions opt;
  opt.n_trials = 2000;
  for (std::uint64_t s = 101; s <= 104; ++s) {
    const OracleReport r = run_oracle_instance(make_micro_instance(s), 0.1, opt, 500);
    CHECK(r.gap <= 1e-10);
    CHECK(r.violations == 0);
    CHECK(r.trials == 2000);
    CHECK(r.off_grid_trials == 500);
    CHECK(r.min_network_objective >= r.dual - kBoundSlack * (1 + r.dual));
  }
}

TEST_CASE("reconstructed network attains the convex optimum") {
  TrialOptions opt;
  opt.n_trials = 0;
  for (std::uint64_t s = 201; s <= 205; ++s) {
    const OracleReport r = run_oracle_instance(make_micro_instance(s), 0.05, opt, 0);
    CHECK(std::abs(r.reconstructed_objective - r.primal) <= 1e-8);
  }
}

TEST_CASE("huge reg_beta makes both sides the null loss") {
  const MicroInstance inst = make_micro_instance(301);
  const double null_loss = 0.5 * inst.targets.squaredNorm();
  TrialOptions opt;
  opt.n_trials = 200;
  const OracleReport r = run_oracle_instance(inst, 1e6, opt, 50);
  CHECK(r.primal == doctest::Approx(null_loss).epsilon(1e-12));
  CHECK(r.dual == doctest::Approx(null_loss).epsilon(1e-12));
  CHECK(r.min_network_objective == doctest::Approx(null_loss).epsilon(1e-12));
}

TEST_CASE("trial objectives are reproducible and parallel-safe") {
  const MicroInstance inst = make_micro_instance(401);
  TrialOptions opt;
  opt.n_trials = 300;
  CHECK(random_network_objective(inst, opt, 0.1) == random_network_objective(inst, opt, 0.1));
  CHECK_THROWS_AS(random_network_objective(inst, opt, 0.0), Error);
}

TEST_CASE("report JSON carries grid and off-grid statistics separately") {
  TrialOptions opt;
  opt.n_trials = 100;
  const auto j = oracle_report_to_json(run_oracle_instance(make_micro_instance(501), 0.1, opt, 40));
  CHECK(j.at("trials") == 100);
  CHECK(j.at("off_grid_trials") == 40);
  CHECK(j.contains("off_grid_worst_shortfall"));
  CHECK(j.contains("violations"));
}
