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


#include "csnn/reconstruct.hpp"

#include <algorithm>
#include <fstream>
#include <map>

namespace csnn {

namespace {

constexpr int kSnnFormat = 1;

nlohmann::json arch_to_json(const WitnessArch& a) {
  return {{"input_dim", a.input_dim},
          {"widths", a.widths},
          {"timesteps", a.timesteps}};
}

WitnessArch arch_from_json(const nlohmann::json& j) {
  WitnessArch a;
  a.input_dim = j.at("input_dim").get<Index>();
  a.widths = j.at("widths").get<std::vector<Index>>();
  a.timesteps = j.at("timesteps").get<Index>();
  return a;
}

// Adds spikes * p_out into out.
void accumulate(const ByteMatrix& s, const RealMatrix& p_out, RealMatrix& out,
                Index row_offset) {
  for (Index i = 0; i < s.rows(); ++i) {
    for (Index j = 0; j < s.cols(); ++j) {
      if (s(i, j) != 0) out.row(row_offset + i) += p_out.row(j);
    }
  }
}

bool identical_neurons(const std::vector<ByteMatrix>& spikes, bool all_steps) {
  const std::size_t first = all_steps ? 0 : spikes.size() - 1;
  for (std::size_t t = first; t < spikes.size(); ++t) {
    const auto& s = spikes[t];
    for (Index j = 1; j < s.cols(); ++j) {
      if (s.col(j) != s.col(0)) return false;
    }
  }
  return true;
}

}  // namespace

std::string readout_rule_name(ReadoutRule rule) {
  return rule == ReadoutRule::kFinalTime ? "final_time" : "per_timestep";
}

ReadoutRule readout_rule_from_name(const std::string& name) {
  if (name == "final_time") return ReadoutRule::kFinalTime;
  if (name == "per_timestep") return ReadoutRule::kPerTimestep;
  fail("unknown readout rule '" + name + "'");
}

void ParallelSnn::validate() const {
  arch.validate();
  check(d_out >= 1, "d_out must be positive");
  std::map<Index, const LifWitness*> by_id;
  for (const auto& s : subnets) {
    check(arch.matches(s.witness), "subnetwork does not match the architecture");
    check(s.p_out.rows() == arch.last_width() && s.p_out.cols() == d_out,
          "p_out shape mismatch");
    check(all_finite(s.p_out), "p_out must be finite");
    if (s.witness_id >= 0) {
      auto [it, fresh] = by_id.emplace(s.witness_id, &s.witness);
      check(fresh || *it->second == s.witness,
            "subnetworks with one witness id must share the witness");
    }
  }
}

ParallelSnn ParallelSnn::merged() const {
  ParallelSnn out{arch, readout, d_out, {}};
  std::map<Index, std::size_t> slot;
  for (const auto& s : subnets) {
    if (s.witness_id >= 0) {
      auto it = slot.find(s.witness_id);
      if (it != slot.end()) {
        out.subnets[it->second].p_out += s.p_out;
        continue;
      }
      slot.emplace(s.witness_id, out.subnets.size());
    }
    out.subnets.push_back(s);
  }
  return out;
}

double ParallelSnn::outer_norm() const {
  double total = 0.0;
  for (const auto& s : subnets) total += s.p_out.norm();
  return total;
}

RealMatrix ParallelSnn::forward(std::span<const RealMatrix> inputs,
                                kernels::Exec exec) const {
  check(!inputs.empty(), "forward needs at least one timestep");
  const Index n = inputs.front().rows();
  const Index t_count = static_cast<Index>(inputs.size());
  const bool per_step = readout == ReadoutRule::kPerTimestep;
  RealMatrix out = RealMatrix::Zero(per_step ? n * t_count : n, d_out);
  const ParallelSnn m = merged();
  for (const auto& s : m.subnets) {
    LifState state(s.witness, n, exec);
    for (Index t = 0; t < t_count; ++t) {
      state.step(inputs[static_cast<std::size_t>(t)]);
      if (per_step) {
        accumulate(state.output_spikes(), s.p_out, out, t * n);
      } else if (t == t_count - 1) {
        accumulate(state.output_spikes(), s.p_out, out, 0);
      }
    }
  }
  return out;
}

SnnStepper::SnnStepper(const ParallelSnn& snn, Index n_samples,
                       kernels::Exec exec)
    : merged_(snn.merged()) {
  states_.reserve(merged_.subnets.size());
  for (const auto& s : merged_.subnets) states_.emplace_back(s.witness, n_samples, exec);
}

RealMatrix SnnStepper::step(const RealMatrix& x) {
  RealMatrix out = RealMatrix::Zero(x.rows(), merged_.d_out);
  for (std::size_t k = 0; k < states_.size(); ++k) {
    states_[k].step(x);
    accumulate(states_[k].output_spikes(), merged_.subnets[k].p_out, out, 0);
  }
  ++t_;
  return out;
}

ParallelSnn reconstruct(const SpikeDictionary& dict, const WitnessStore& store,
                        const ConvexSolution& solution,
                        std::span<const RealMatrix> inputs, OutputRule rule) {
  check(solution.w_tilde.rows() == dict.size(),
        "solution does not match the dictionary");
  check(dict.m_last == store.arch.last_width(),
        "dictionary does not match the witness store");
  ParallelSnn snn;
  snn.arch = store.arch;
  snn.readout = dict.stacked ? ReadoutRule::kPerTimestep : ReadoutRule::kFinalTime;
  snn.d_out = solution.w_tilde.cols();
  const Index m = dict.m_last;

  std::map<Index, bool> uniform_ok;
  if (rule == OutputRule::kAuto) {
    for (Index i = 0; i < dict.size(); ++i) {
      if (solution.w_tilde.row(i).isZero(0.0)) continue;
      const Index w = dict.witness_of[static_cast<std::size_t>(i)].witness;
      if (uniform_ok.count(w)) continue;
      const auto spikes =
          lif_output_spikes(store.witnesses[static_cast<std::size_t>(w)], inputs);
      uniform_ok[w] = identical_neurons(spikes, dict.stacked);
    }
  }

  for (Index i = 0; i < dict.size(); ++i) {
    if (solution.w_tilde.row(i).isZero(0.0)) continue;
    const WitnessRef ref = dict.witness_of[static_cast<std::size_t>(i)];
    SnnSubnet s;
    s.witness = store.witnesses[static_cast<std::size_t>(ref.witness)];
    s.witness_id = ref.witness;
    s.p_out = RealMatrix::Zero(m, snn.d_out);
    if (rule == OutputRule::kReplicated) {
      auto& last = s.witness.layers.back();
      for (Index j = 0; j < m; ++j) {
        last.p_in.col(j) = last.p_in.col(ref.neuron).eval();
        last.leak[j] = last.leak[ref.neuron];
        last.u_thr[j] = last.u_thr[ref.neuron];
        last.u_init[j] = last.u_init[ref.neuron];
      }
      s.witness_id = -1;
    }
    const bool uniform = rule == OutputRule::kReplicated ||
                         rule == OutputRule::kUniform ||
                         (rule == OutputRule::kAuto && uniform_ok[ref.witness]);
    if (uniform) {
      for (Index j = 0; j < m; ++j) {
        s.p_out.row(j) = solution.w_tilde.row(i) / static_cast<double>(m);
      }
    } else {
      s.p_out.row(ref.neuron) = solution.w_tilde.row(i);
    }
    snn.subnets.push_back(std::move(s));
  }
  return snn;
}

ReconstructionReport verify_reconstruction(const ParallelSnn& snn,
                                           const SpikeDictionary& dict,
                                           const ConvexSolution& solution,
                                           std::span<const RealMatrix> inputs,
                                           double tolerance) {
  ReconstructionReport report;
  report.support = solution.support();
  report.support_within_bound = report.support <= dict.n + 1;

  RealMatrix expected;
  kernels::bit_matmul(dict.columns, solution.w_tilde, expected);
  const RealMatrix got = snn.forward(inputs);
  check(got.rows() == expected.rows() && got.cols() == expected.cols(),
        "network readout does not match the dictionary shape");
  report.max_deviation = (got - expected).cwiseAbs().maxCoeff();

  // Column check: each subnetwork's generating neuron must reproduce the
  // dictionary column of its coefficient row.
  std::vector<Index> support_rows;
  for (Index i = 0; i < solution.w_tilde.rows(); ++i) {
    if (!solution.w_tilde.row(i).isZero(0.0)) support_rows.push_back(i);
  }
  if (support_rows.size() == snn.subnets.size()) {
    std::vector<char> bad(snn.subnets.size(), 0);
#pragma omp parallel for schedule(static)
    for (std::size_t k = 0; k < snn.subnets.size(); ++k) {
      const Index col = support_rows[k];
      const WitnessRef ref = dict.witness_of[static_cast<std::size_t>(col)];
      const auto bits = witness_column(snn.subnets[k].witness, ref.neuron,
                                       inputs, dict.stacked);
      const auto want = dict.columns.column(col);
      bad[k] = !std::equal(bits.begin(), bits.end(), want.begin(), want.end());
    }
    for (std::size_t k = 0; k < bad.size(); ++k) {
      if (bad[k]) report.mismatched_subnets.push_back(static_cast<Index>(k));
    }
  } else {
    for (Index k = 0; k < snn.k(); ++k) report.mismatched_subnets.push_back(k);
  }
  report.passed = report.max_deviation <= tolerance &&
                  report.mismatched_subnets.empty();
  return report;
}

double network_objective(const ParallelSnn& snn,
                         std::span<const RealMatrix> inputs,
                         const RealMatrix& targets, const LossSpec& loss,
                         double reg_beta) {
  const RealMatrix pred = snn.forward(inputs);
  return loss_value(loss, pred, targets) + reg_beta * snn.outer_norm();
}

nlohmann::json snn_to_json(const ParallelSnn& snn) {
  nlohmann::json subnets = nlohmann::json::array();
  for (const auto& s : snn.subnets) {
    subnets.push_back({{"witness_id", s.witness_id},
                       {"witness", witness_to_json(s.witness)},
                       {"p_out", matrix_to_json(s.p_out)}});
  }
  return {{"format_version", kSnnFormat},
          {"arch", arch_to_json(snn.arch)},
          {"readout_rule", readout_rule_name(snn.readout)},
          {"d_out", snn.d_out},
          {"subnets", subnets}};
}

ParallelSnn snn_from_json(const nlohmann::json& j) {
  check(j.at("format_version").get<int>() == kSnnFormat,
        "unsupported network format");
  ParallelSnn snn;
  snn.arch = arch_from_json(j.at("arch"));
  snn.readout = readout_rule_from_name(j.at("readout_rule").get<std::string>());
  snn.d_out = j.at("d_out").get<Index>();
  for (const auto& s : j.at("subnets")) {
    snn.subnets.push_back({witness_from_json(s.at("witness")),
                           matrix_from_json(s.at("p_out")),
                           s.at("witness_id").get<Index>()});
  }
  snn.validate();
  return snn;
}

void save_snn(const ParallelSnn& snn, const std::filesystem::path& path) {
  std::ofstream out(path);
  check(static_cast<bool>(out), "cannot write " + path.string());
  out << snn_to_json(snn).dump() << '\n';
}

ParallelSnn load_snn(const std::filesystem::path& path) {
  std::ifstream in(path);
  check(static_cast<bool>(in), "cannot read " + path.string());
  return snn_from_json(nlohmann::json::parse(in));
}

}  // namespace csnn
