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


#include "csnn/variants.hpp"

#include <chrono>
#include <cstring>

namespace csnn {

namespace {

void need(const TaskDataset* d, const char* what) {
  check(d != nullptr, std::string("missing dataset: ") + what);
}

ReadoutRule readout_for(const TaskDataset& d) {
  return d.per_timestep() ? ReadoutRule::kPerTimestep : ReadoutRule::kFinalTime;
}

bool same_bytes(const RealMatrix& a, const RealMatrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

bool same_bytes(const RealVector& a, const RealVector& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

bool same_bytes(const LifWitness& a, const LifWitness& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const auto& x = a.layers[l];
    const auto& y = b.layers[l];
    if (!same_bytes(x.p_in, y.p_in) || !same_bytes(x.leak, y.leak) ||
        !same_bytes(x.u_thr, y.u_thr) || !same_bytes(x.u_init, y.u_init)) {
      return false;
    }
  }
  return true;
}

TrainResult run_sg(const SurrogateConfig& cfg, const VariantConfig& config,
                   const TaskDataset& train, const TaskDataset& val, TrainableSnn init) {
  const TaskLossOptions lo = config.loss;
  auto loss = [lo](const TaskDataset& d) { return task_loss(d, lo); };
  auto metric = [](const TrainableSnn& snn, const TaskDataset& d) {
    return task_metric(snn.to_parallel().forward(d.inputs), d);
  };
  return train_sg(cfg, train, val, loss, metric, std::move(init));
}

VariantResult finish_sg(VariantKind kind, TrainResult tr) {
  VariantResult r;
  r.kind = kind;
  r.model = tr.best.to_parallel();
  r.trainable = tr.best;
  r.training = std::move(tr);
  return r;
}

}  // namespace

std::string variant_name(VariantKind v) {
  switch (v) {
    case VariantKind::kSg:
      return "sg";
    case VariantKind::kCvx:
      return "cvx";
    case VariantKind::kSgCvx:
      return "sg-cvx";
    case VariantKind::kSgSg:
      return "sg-sg";
    case VariantKind::kCvxSg:
      return "cvx-sg";
  }
  return "sg";
}

VariantKind variant_from_name(const std::string& name) {
  for (VariantKind v : {VariantKind::kSg, VariantKind::kCvx, VariantKind::kSgCvx,
                        VariantKind::kSgSg, VariantKind::kCvxSg}) {
    if (variant_name(v) == name) return v;
  }
  fail("unknown variant: " + name);
}

LossSpec task_loss(const TaskDataset& data, const TaskLossOptions& options) {
  const Index n = data.n();
  check(n > 0, "empty dataset");
  const double inv_n = 1.0 / static_cast<double>(n);
  LossSpec spec;
  if (data.meta.kind == TaskKind::kAddition) {
    spec = joint_loss_spec(data.meta.base, 1.0, options.lambda_carry,
                           static_cast<Index>(data.inputs.size()), n, options.ramp,
                           options.kind);
    if (spec.row_weights.size() == 0) {
      spec.row_weights = RealVector::Constant(data.targets.rows(), inv_n);
    } else {
      spec.row_weights *= inv_n;
    }
    return spec;
  }
  check(options.kind != LossKind::kSoftmax || data.meta.kind == TaskKind::kMnist,
        "softmax loss needs one-hot targets");
  check(options.kind != LossKind::kLogistic || data.meta.kind == TaskKind::kFirstLastXor,
        "logistic loss needs +-1 targets");
  spec = LossSpec::single(options.kind, data.d_out());
  spec.row_weights = RealVector::Constant(n, inv_n);
  return spec;
}

SpikeDictionary convex_dictionary(const WitnessStore& store, const TaskDataset& train) {
  return train.per_timestep() ? build_trajectory_dictionary(store, train.inputs)
                              : build_sampled_dictionary(store, train.inputs);
}

ConvexProblem convex_problem(const SpikeDictionary& dict, const VariantConfig& config,
                             const TaskDataset& train) {
  ConvexProblem pb;
  pb.dictionary = &dict;
  pb.targets = train.targets;
  pb.reg_beta = config.reg_beta;
  pb.m_last = dict.m_last;
  pb.loss = task_loss(train, config.loss);
  pb.penalty = config.penalty;
  return pb;
}

VariantResult run_convex_stage(const WitnessStore& store, const VariantConfig& config,
                               const TaskDataset& train) {
  const auto start = std::chrono::steady_clock::now();
  const WitnessStore before = store;
  VariantResult r;
  r.kind = VariantKind::kCvx;
  const SpikeDictionary dict = convex_dictionary(store, train);
  const ConvexProblem pb = convex_problem(dict, config, train);
  const ConvexSolution sol = solve(pb, config.solver);
  r.model = reconstruct(dict, store, sol, train.inputs, config.output_rule);
  r.reconstruction = verify_reconstruction(r.model, dict, sol, train.inputs);
  r.solution = sol;
  r.store = store;
  bool frozen = before.witnesses.size() == store.witnesses.size();
  for (std::size_t i = 0; frozen && i < store.witnesses.size(); ++i) {
    frozen = same_bytes(before.witnesses[i], store.witnesses[i]);
  }
  r.hidden_frozen = frozen && r.reconstruction->mismatched_subnets.empty();
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

VariantResult run_variant(VariantKind kind, const VariantConfig& config,
                          const VariantData& data, const VariantCheckpoints& checkpoints) {
  const auto start = std::chrono::steady_clock::now();
  need(data.train_pre, "train_pre");
  VariantResult r;
  switch (kind) {
    case VariantKind::kSg: {
      need(data.val_pre, "val_pre");
      const TaskDataset& tr = *data.train_pre;
      TrainableSnn init = init_trainable(config.arch, config.k, tr.d_out(), readout_for(tr),
                                         derive_seed(config.seed, tag_of("sg-init")),
                                         config.leak, config.thr, config.trainable);
      r = finish_sg(kind, run_sg(config.sg, config, tr, *data.val_pre, std::move(init)));
      break;
    }
    case VariantKind::kCvx: {
      const WitnessStore store = sample_gaussian_witnesses(
          config.arch, config.m_witnesses, derive_seed(config.seed, tag_of("cvx-witness")),
          config.leak, config.thr);
      r = run_convex_stage(store, config, *data.train_pre);
      break;
    }
    case VariantKind::kSgCvx: {
      check(checkpoints.sg != nullptr, "missing prerequisite checkpoint: sg");
      need(data.train_ft, "train_ft");
      const WitnessStore store =
          extract_pretrained_witnesses(config.arch, checkpoints.sg->hidden, "sg");
      r = run_convex_stage(store, config, *data.train_ft);
      // Frozen copy: hidden spikes of every reconstructed subnet equal those
      // of the checkpoint witness it came from.
      for (const auto& s : r.model.subnets) {
        if (!r.hidden_frozen) break;
        const auto& src = checkpoints.sg->hidden[static_cast<std::size_t>(s.witness_id)];
        r.hidden_frozen = lif_output_spikes(s.witness, data.train_ft->inputs) ==
                          lif_output_spikes(src, data.train_ft->inputs);
      }
      break;
    }
    case VariantKind::kSgSg: {
      check(checkpoints.sg != nullptr, "missing prerequisite checkpoint: sg");
      need(data.train_ft, "train_ft");
      need(data.val_ft, "val_ft");
      r = finish_sg(kind, run_sg(config.finetune, config, *data.train_ft, *data.val_ft,
                                 *checkpoints.sg));
      break;
    }
    case VariantKind::kCvxSg: {
      check(checkpoints.cvx != nullptr, "missing prerequisite checkpoint: cvx");
      need(data.train_ft, "train_ft");
      need(data.val_ft, "val_ft");
      check(checkpoints.cvx->k() > 0, "convex stage produced an empty network");
      TrainableSnn init = TrainableSnn::from_parallel(*checkpoints.cvx, config.trainable);
      r = finish_sg(kind, run_sg(config.finetune, config, *data.train_ft, *data.val_ft,
                                 std::move(init)));
      break;
    }
  }
  r.kind = kind;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace csnn
