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

#include <filesystem>

#include "csnn/reconstruct.hpp"
#include "test_util.hpp"

using namespace csnn;

namespace {

struct Desk {
  WitnessStore store;
  std::vector<RealMatrix> inputs;
  SpikeDictionary dict;
  RealMatrix targets;
};

Desk make_desk(std::uint64_t seed, bool stacked, Index d_out = 1) {
  Rng rng(seed);
  Desk d;
  WitnessArch arch{2, {4, 3}, 4};
  LeakSpec leak{LeakMode::kUniform};
  ThresholdSpec thr{ThresholdMode::kHalfNormal};
  d.store = sample_gaussian_witnesses(arch, 12, seed, leak, thr);
  d.inputs = testing::random_inputs(20, 2, 4, rng);
  d.dict = stacked ? build_trajectory_dictionary(d.store, d.inputs)
                   : build_sampled_dictionary(d.store, d.inputs);
  d.targets = testing::gaussian(d.dict.rows(), d_out, rng);
  return d;
}

ConvexProblem problem_of(const Desk& d, double beta) {
  ConvexProblem pb;
  pb.dictionary = &d.dict;
  pb.targets = d.targets;
  pb.reg_beta = beta;
  pb.m_last = d.dict.m_last;
  pb.loss = LossSpec::single(LossKind::kSquared, d.targets.cols());
  return pb;
}

}  // namespace

TEST_CASE("single coefficient reproduces its column exactly") {
  const Desk d = make_desk(1, false);
  for (Index col : {Index{0}, d.dict.size() / 2, d.dict.size() - 1}) {
    ConvexSolution sol;
    sol.w_tilde = RealMatrix::Zero(d.dict.size(), 1);
    sol.w_tilde(col, 0) = 1.75;
    const auto snn = reconstruct(d.dict, d.store, sol, d.inputs);
    CHECK(snn.k() == 1);
    const RealMatrix out = snn.forward(d.inputs);
    for (Index r = 0; r < d.dict.rows(); ++r) {
      CHECK(out(r, 0) == (d.dict.columns.get(r, col) ? 1.75 : 0.0));
    }
  }
}

TEST_CASE("zero solution gives the zero predictor") {
  const Desk d = make_desk(2, true);
  ConvexSolution sol;
  sol.w_tilde = RealMatrix::Zero(d.dict.size(), 1);
  const auto snn = reconstruct(d.dict, d.store, sol, d.inputs);
  CHECK(snn.k() == 0);
  CHECK(snn.forward(d.inputs).isZero(0.0));
  const auto report = verify_reconstruction(snn, d.dict, sol, d.inputs);
  CHECK(report.passed);
  CHECK(report.support == 0);
}

TEST_CASE("reconstruction matches D w on random desk instances") {
  for (std::uint64_t seed = 10; seed < 30; ++seed) {
    const bool stacked = seed % 2 == 0;
    const Desk d = make_desk(seed, stacked, 1 + seed % 3);
    const auto sol = solve(problem_of(d, 0.05));
    CHECK(sol.support() > 0);
    const auto snn = reconstruct(d.dict, d.store, sol, d.inputs);
    CHECK(snn.k() == sol.support());
    CHECK(snn.readout == (stacked ? ReadoutRule::kPerTimestep : ReadoutRule::kFinalTime));
    const auto report = verify_reconstruction(snn, d.dict, sol, d.inputs);
    CHECK(report.max_deviation <= 1e-9);
    CHECK(report.mismatched_subnets.empty());
    CHECK(report.passed);
    CHECK(report.support_within_bound == (report.support <= d.dict.n + 1));
  }
}

TEST_CASE("fault injection flags the corrupted subnetwork") {
  const Desk d = make_desk(40, false);
  const auto sol = solve(problem_of(d, 0.05));
  auto snn = reconstruct(d.dict, d.store, sol, d.inputs, OutputRule::kMasked);
  REQUIRE(snn.k() > 0);
  // Find a subnetwork whose generating neuron fires somewhere, then silence it.
  Index target = -1;
  Index row = 0;
  for (Index i = 0; i < sol.w_tilde.rows() && target < 0; ++i) {
    if (sol.w_tilde.row(i).isZero(0.0)) continue;
    if (d.dict.columns.column_popcount(i) > 0) {
      target = row;
      const Index neuron = d.dict.witness_of[static_cast<std::size_t>(i)].neuron;
      // Sharing the witness id would merge it with intact copies.
      snn.subnets[static_cast<std::size_t>(target)].witness_id = -1;
      snn.subnets[static_cast<std::size_t>(target)].witness.layers.back().u_init[neuron] = -1e6;
    }
    ++row;
  }
  REQUIRE(target >= 0);
  const auto report = verify_reconstruction(snn, d.dict, sol, d.inputs);
  CHECK_FALSE(report.passed);
  REQUIRE(report.mismatched_subnets.size() == 1);
  CHECK(report.mismatched_subnets[0] == target);
}

TEST_CASE("stepper agrees with the per-timestep forward") {
  const Desk d = make_desk(50, true, 2);
  const auto sol = solve(problem_of(d, 0.05));
  const auto snn = reconstruct(d.dict, d.store, sol, d.inputs);
  const RealMatrix all = snn.forward(d.inputs);
  SnnStepper stepper(snn, d.dict.n);
  for (Index t = 0; t < 4; ++t) {
    const RealMatrix out = stepper.step(d.inputs[static_cast<std::size_t>(t)]);
    CHECK(out == all.middleRows(t * d.dict.n, d.dict.n));
  }
}

TEST_CASE("uniform rule on replicated witnesses attains the convex objective") {
  Rng rng(60);
  WitnessArch arch{2, {3, 2}, 3};
  WitnessStore store;
  store.arch = arch;
  for (Index w = 0; w < 10; ++w) {
    LifWitness lw = testing::random_witness(2, {3, 1}, rng);
    auto& last = lw.layers.back();
    last.p_in = RealMatrix(last.p_in.replicate(1, 2));
    last.leak = RealVector::Constant(2, last.leak[0]);
    last.u_thr = RealVector::Constant(2, last.u_thr[0]);
    last.u_init = RealVector::Zero(2);
    store.witnesses.push_back(lw);
    store.provenance.push_back({WitnessSource::kEnumerated, 0, w});
  }
  const auto inputs = testing::random_inputs(8, 2, 3, rng);
  const auto dict = build_sampled_dictionary(store, inputs);
  ConvexProblem pb;
  pb.dictionary = &dict;
  pb.targets = testing::gaussian(8, 1, rng);
  pb.reg_beta = 0.3;
  pb.m_last = 2;
  pb.loss = LossSpec::single(LossKind::kSquared, 1);
  SolverOptions opt;
  opt.tol = 1e-12;
  const auto sol = solve(pb, opt);
  const auto snn = reconstruct(dict, store, sol, inputs);
  CHECK(network_objective(snn, inputs, pb.targets, pb.loss, pb.reg_beta) ==
        doctest::Approx(sol.primal).epsilon(1e-10));
  CHECK(verify_reconstruction(snn, dict, sol, inputs).passed);
}

TEST_CASE("checkpoint round trip") {
  const Desk d = make_desk(70, true, 2);
  const auto sol = solve(problem_of(d, 0.05));
  const auto snn = reconstruct(d.dict, d.store, sol, d.inputs);
  const auto path = std::filesystem::temp_directory_path() / "csnn_snn.json";
  save_snn(snn, path);
  const auto back = load_snn(path);
  CHECK(back == snn);
  CHECK(back.forward(d.inputs) == snn.forward(d.inputs));
  std::filesystem::remove(path);
}

TEST_CASE("replicated rule attains the convex objective on sampled witnesses") {
  for (std::uint64_t seed = 70; seed < 75; ++seed) {
    const Desk d = make_desk(seed, seed % 2 == 0);
    ConvexProblem pb = problem_of(d, 0.2);
    SolverOptions opt;
    opt.tol = 1e-12;
    const auto sol = solve(pb, opt);
    const auto snn = reconstruct(d.dict, d.store, sol, d.inputs, OutputRule::kReplicated);
    CHECK(snn.k() == sol.support());
    CHECK(verify_reconstruction(snn, d.dict, sol, d.inputs).passed);
    CHECK(network_objective(snn, d.inputs, pb.targets, pb.loss, pb.reg_beta) ==
          doctest::Approx(sol.primal).epsilon(1e-10));
  }
}
