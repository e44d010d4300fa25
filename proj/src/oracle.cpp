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


#include "csnn/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "csnn/path_norm.hpp"
#include "csnn/reconstruct.hpp"

namespace csnn {

namespace {

LifWitness random_witness(const MicroInstance& inst, bool on_grid, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> off_leak(0.0, 0.95);
  std::uniform_real_distribution<double> off_thr(0.0, 2.0);
  LifWitness w;
  Index prev = inst.arch.input_dim;
  for (Index m : inst.arch.widths) {
    LifLayerParams p;
    p.p_in.resize(prev, m);
    for (Index e = 0; e < p.p_in.size(); ++e) p.p_in.data()[e] = g(rng);
    p.leak.resize(m);
    p.u_thr.resize(m);
    p.u_init = RealVector::Zero(m);
    for (Index j = 0; j < m; ++j) {
      if (on_grid) {
        p.leak[j] = inst.grid.leaks[rng() % inst.grid.leaks.size()];
        p.u_thr[j] = inst.grid.thresholds[rng() % inst.grid.thresholds.size()];
      } else {
        p.leak[j] = off_leak(rng);
        p.u_thr[j] = off_thr(rng);
      }
    }
    w.layers.push_back(std::move(p));
    prev = m;
  }
  return w;
}

// min_P 0.5 ||A P - y||^2 + beta sum_k ||P_k||_2 by FISTA with block
// soft-thresholding; returns the objective at the final iterate.
double fit_readout(const RealMatrix& a, const RealVector& y, Index block, double beta,
                   Index iterations) {
  const Index cols = a.cols();
  const double lip = std::max(a.squaredNorm(), 1e-12);
  const double step = 1.0 / lip;
  auto objective = [&](const RealVector& p) {
    double f = 0.5 * (a * p - y).squaredNorm();
    for (Index b = 0; b < cols; b += block) f += beta * p.segment(b, block).norm();
    return f;
  };
  RealVector x = RealVector::Zero(cols), z = x, xn(cols);
  double t = 1.0;
  double best = objective(x);
  for (Index it = 0; it < iterations; ++it) {
    xn = z - step * (a.transpose() * (a * z - y));
    for (Index b = 0; b < cols; b += block) {
      const double nb = xn.segment(b, block).norm();
      const double shrink = nb > beta * step ? 1.0 - beta * step / nb : 0.0;
      xn.segment(b, block) *= shrink;
    }
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = xn + ((t - 1.0) / tn) * (xn - x);
    x = xn;
    t = tn;
    best = std::min(best, objective(x));
  }
  return best;
}

double trial_objective(const MicroInstance& inst, const TrialOptions& opt,
                       double beta, Index trial) {
  Rng rng(derive_seed(inst.seed, tag_of(opt.on_grid ? "oracle-grid" : "oracle-off"),
                      static_cast<std::uint64_t>(trial)));
  const Index n = inst.targets.rows();
  const Index m = inst.arch.last_width();
  RealMatrix a(n, opt.k * m);
  for (Index k = 0; k < opt.k; ++k) {
    const LifWitness w = lif_normalize(random_witness(inst, opt.on_grid, rng), false);
    const auto spikes = lif_output_spikes(w, inst.inputs, kernels::Exec::kSerial);
    a.middleCols(k * m, m) = spikes.back().cast<double>();
  }
  return fit_readout(a, inst.targets.col(0), m, beta, opt.inner_iterations);
}

}  // namespace

MicroInstance make_micro_instance(std::uint64_t seed) {
  Rng rng(derive_seed(seed, tag_of("micro-instance")));
  MicroInstance inst;
  inst.seed = seed;
  const Index n = 3 + static_cast<Index>(rng() % 4);
  const Index d = 1 + static_cast<Index>(rng() % 2);
  const Index w0 = 1 + static_cast<Index>(rng() % 2);
  const Index w1 = 1 + static_cast<Index>(rng() % 2);
  // Two inputs into two first-layer neurons over three steps exceeds the
  // exact enumeration budget.
  const Index t_max = d == 2 && w0 == 2 ? 2 : 3;
  const Index t = 1 + static_cast<Index>(rng() % static_cast<std::uint64_t>(t_max));
  inst.arch = {d, {w0, w1}, t};
  std::normal_distribution<double> g(0.0, 1.0);
  for (Index s = 0; s < t; ++s) {
    RealMatrix x(n, d);
    for (Index e = 0; e < x.size(); ++e) x.data()[e] = g(rng);
    inst.inputs.push_back(std::move(x));
  }
  inst.targets.resize(n, 1);
  for (Index i = 0; i < n; ++i) inst.targets(i, 0) = g(rng);
  return inst;
}

std::vector<double> random_network_objective(const MicroInstance& instance,
                                             const TrialOptions& options,
                                             double reg_beta) {
  check(options.n_trials >= 0 && options.k >= 1, "invalid trial options");
  check(reg_beta > 0.0, "reg_beta must be positive");
  std::vector<double> out(static_cast<std::size_t>(options.n_trials));
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < options.n_trials; ++i) {
    out[static_cast<std::size_t>(i)] = trial_objective(instance, options, reg_beta, i);
  }
  return out;
}

OracleReport run_oracle_instance(const MicroInstance& instance, double reg_beta,
                                 const TrialOptions& on_grid,
                                 Index off_grid_trials) {
  const auto start = std::chrono::steady_clock::now();
  OracleReport r;
  r.seed = instance.seed;
  r.n = instance.targets.rows();
  r.timesteps = instance.arch.timesteps;
  r.widths = instance.arch.widths;

  const EnumeratedDictionary ed =
      exact_enumerate_snn_dictionary(instance.arch, instance.inputs, instance.grid);
  r.dictionary_size = ed.dictionary.size();
  ConvexProblem pb;
  pb.dictionary = &ed.dictionary;
  pb.targets = instance.targets;
  pb.reg_beta = reg_beta;
  pb.m_last = instance.arch.last_width();
  pb.loss = LossSpec::single(LossKind::kSquared, 1);
  SolverOptions so;
  so.tol = 1e-11;
  so.exec = kernels::Exec::kSerial;
  const ConvexSolution sol = solve(pb, so);
  r.primal = sol.primal;
  r.dual = sol.dual;
  r.gap = sol.gap;
  const ParallelSnn snn = reconstruct(ed.dictionary, ed.store, sol, instance.inputs,
                                      OutputRule::kReplicated);
  r.reconstructed_objective =
      network_objective(snn, instance.inputs, instance.targets, pb.loss, reg_beta);

  const double floor = sol.dual - kBoundSlack * (1.0 + std::abs(sol.dual));
  const auto grid_obj = random_network_objective(instance, on_grid, reg_beta);
  r.trials = static_cast<Index>(grid_obj.size());
  r.min_network_objective = std::numeric_limits<double>::infinity();
  for (double v : grid_obj) {
    r.min_network_objective = std::min(r.min_network_objective, v);
    r.violations += v < floor;
  }
  TrialOptions off = on_grid;
  off.on_grid = false;
  off.n_trials = off_grid_trials;
  const auto off_obj = random_network_objective(instance, off, reg_beta);
  r.off_grid_trials = static_cast<Index>(off_obj.size());
  r.off_grid_min_objective = std::numeric_limits<double>::infinity();
  for (double v : off_obj) {
    r.off_grid_min_objective = std::min(r.off_grid_min_objective, v);
    r.off_grid_violations += v < floor;
    r.off_grid_worst_shortfall = std::max(r.off_grid_worst_shortfall, sol.dual - v);
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

nlohmann::json oracle_report_to_json(const OracleReport& r) {
  auto finite = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"seed", r.seed},
          {"n", r.n},
          {"timesteps", r.timesteps},
          {"widths", r.widths},
          {"dictionary_size", r.dictionary_size},
          {"primal", r.primal},
          {"dual", r.dual},
          {"gap", r.gap},
          {"reconstructed_objective", r.reconstructed_objective},
          {"trials", r.trials},
          {"min_network_objective", finite(r.min_network_objective)},
          {"violations", r.violations},
          {"off_grid_trials", r.off_grid_trials},
          {"off_grid_min_objective", finite(r.off_grid_min_objective)},
          {"off_grid_violations", r.off_grid_violations},
          {"off_grid_worst_shortfall", r.off_grid_worst_shortfall},
          {"seconds", r.seconds}};
}

}  // namespace csnn
