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


#include "csnn/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace csnn {

namespace {

constexpr int kTrainableFormat = 1;
const double kLeakMax = std::nextafter(1.0, 0.0);

double logistic(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

// Per-layer trajectories of one subnetwork: u[l][t], s[l][t] for t = 0..T
// (index 0 holds the initial state).
struct SubnetTrace {
  std::vector<std::vector<RealMatrix>> u;
  std::vector<std::vector<RealMatrix>> s;
};

SubnetTrace run_subnet(const LifWitness& w, std::span<const RealMatrix> inputs,
                       const BpttOptions& opt) {
  const Index n = inputs.front().rows();
  const Index t_count = static_cast<Index>(inputs.size());
  const std::size_t depth = w.layers.size();
  SubnetTrace tr;
  tr.u.resize(depth);
  tr.s.resize(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    const auto& p = w.layers[l];
    RealMatrix u0(n, p.width());
    for (Index i = 0; i < n; ++i) u0.row(i) = p.u_init.transpose();
    tr.u[l].push_back(u0);
    tr.s[l].push_back(RealMatrix::Zero(n, p.width()));
  }
  if (!opt.smoothed_forward) {
    std::vector<RealMatrix> u(depth);
    std::vector<ByteMatrix> s(depth);
    for (std::size_t l = 0; l < depth; ++l) {
      u[l] = tr.u[l][0];
      s[l] = ByteMatrix::Zero(n, w.layers[l].width());
    }
    for (Index t = 0; t < t_count; ++t) {
      for (std::size_t l = 0; l < depth; ++l) {
        const auto& p = w.layers[l];
        const bool ok =
            l == 0 ? kernels::lif_step(inputs[static_cast<std::size_t>(t)], p.p_in,
                                       p.leak, p.u_thr, u[l], s[l])
                   : kernels::lif_step(s[l - 1], p.p_in, p.leak, p.u_thr, u[l], s[l]);
        check(ok, "membrane overflow");
        tr.u[l].push_back(u[l]);
        tr.s[l].push_back(s[l].cast<double>());
      }
    }
    return tr;
  }
  for (Index t = 0; t < t_count; ++t) {
    for (std::size_t l = 0; l < depth; ++l) {
      const auto& p = w.layers[l];
      const RealMatrix& x = l == 0 ? inputs[static_cast<std::size_t>(t)] : tr.s[l - 1].back();
      RealMatrix un = x * p.p_in;
      const RealMatrix& up = tr.u[l].back();
      const RealMatrix& sp = tr.s[l].back();
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p.width(); ++j) {
          un(i, j) = (un(i, j) + p.leak[j] * up(i, j)) - sp(i, j) * p.u_thr[j];
        }
      }
      RealMatrix sn = un.unaryExpr([&](double v) { return logistic(opt.slope * v); });
      tr.u[l].push_back(std::move(un));
      tr.s[l].push_back(std::move(sn));
    }
  }
  return tr;
}

Index subnet_param_count(const LifWitness& w, const Trainability& tr) {
  Index c = 0;
  for (const auto& p : w.layers) {
    if (tr.p_in) c += p.p_in.size();
    if (tr.leak) c += p.width();
    if (tr.u_thr) c += p.width();
  }
  return c;
}

Index param_count(const TrainableSnn& snn) {
  Index c = 0;
  for (const auto& w : snn.hidden) c += subnet_param_count(w, snn.trainable);
  if (snn.trainable.p_out) {
    for (const auto& p : snn.p_out) c += p.size();
  }
  return c;
}

nlohmann::json arch_json(const WitnessArch& a) {
  return {{"input_dim", a.input_dim}, {"widths", a.widths}, {"timesteps", a.timesteps}};
}

}  // namespace

void TrainableSnn::validate() const {
  arch.validate();
  check(hidden.size() == p_out.size(), "one readout per subnetwork");
  for (std::size_t k = 0; k < hidden.size(); ++k) {
    check(arch.matches(hidden[k]), "subnetwork does not match the architecture");
    check(p_out[k].rows() == arch.last_width() && p_out[k].cols() == d_out,
          "p_out shape mismatch");
  }
}

ParallelSnn TrainableSnn::to_parallel() const {
  ParallelSnn snn{arch, readout, d_out, {}};
  for (std::size_t k = 0; k < hidden.size(); ++k) {
    snn.subnets.push_back({hidden[k], p_out[k], static_cast<Index>(k)});
  }
  return snn;
}

TrainableSnn TrainableSnn::from_parallel(const ParallelSnn& snn,
                                         const Trainability& trainable) {
  const ParallelSnn m = snn.merged();
  TrainableSnn out;
  out.arch = m.arch;
  out.readout = m.readout;
  out.d_out = m.d_out;
  out.trainable = trainable;
  for (const auto& s : m.subnets) {
    out.hidden.push_back(s.witness);
    out.p_out.push_back(s.p_out);
  }
  return out;
}

TrainableSnn init_trainable(const WitnessArch& arch, Index k, Index d_out,
                            ReadoutRule readout, std::uint64_t seed,
                            const LeakSpec& leak, const ThresholdSpec& thr,
                            const Trainability& trainable) {
  check(k >= 1, "need at least one subnetwork");
  const WitnessStore store = sample_gaussian_witnesses(arch, k, seed, leak, thr);
  TrainableSnn snn;
  snn.arch = arch;
  snn.readout = readout;
  snn.d_out = d_out;
  snn.trainable = trainable;
  snn.hidden = store.witnesses;
  Rng rng(derive_seed(seed, tag_of("readout")));
  std::normal_distribution<double> g(
      0.0, 1.0 / std::sqrt(static_cast<double>(k * arch.last_width())));
  for (Index i = 0; i < k; ++i) {
    RealMatrix p(arch.last_width(), d_out);
    for (Index e = 0; e < p.size(); ++e) p.data()[e] = g(rng);
    snn.p_out.push_back(std::move(p));
  }
  return snn;
}

RealVector get_params(const TrainableSnn& snn) {
  RealVector v(param_count(snn));
  Index o = 0;
  auto put = [&](const double* data, Index size) {
    std::copy(data, data + size, v.data() + o);
    o += size;
  };
  for (const auto& w : snn.hidden) {
    for (const auto& p : w.layers) {
      if (snn.trainable.p_in) put(p.p_in.data(), p.p_in.size());
      if (snn.trainable.leak) put(p.leak.data(), p.leak.size());
      if (snn.trainable.u_thr) put(p.u_thr.data(), p.u_thr.size());
    }
  }
  if (snn.trainable.p_out) {
    for (const auto& p : snn.p_out) put(p.data(), p.size());
  }
  return v;
}

void set_params(TrainableSnn& snn, const RealVector& params) {
  check(params.size() == param_count(snn), "parameter length mismatch");
  Index o = 0;
  auto take = [&](double* data, Index size) {
    std::copy(params.data() + o, params.data() + o + size, data);
    o += size;
  };
  for (auto& w : snn.hidden) {
    for (auto& p : w.layers) {
      if (snn.trainable.p_in) take(p.p_in.data(), p.p_in.size());
      if (snn.trainable.leak) take(p.leak.data(), p.leak.size());
      if (snn.trainable.u_thr) take(p.u_thr.data(), p.u_thr.size());
    }
  }
  if (snn.trainable.p_out) {
    for (auto& p : snn.p_out) take(p.data(), p.size());
  }
}

double surrogate_derivative(double u, double slope) {
  const double s = logistic(slope * u);
  return slope * s * (1.0 - s);
}

LossAndGradient surrogate_forward_backward(const TrainableSnn& snn,
                                           std::span<const RealMatrix> inputs,
                                           const RealMatrix& targets,
                                           const LossSpec& spec,
                                           const BpttOptions& options) {
  snn.validate();
  check(!inputs.empty(), "need at least one timestep");
  check(options.slope > 0.0, "surrogate slope must be positive");
  const Index n = inputs.front().rows();
  const Index t_count = static_cast<Index>(inputs.size());
  const bool per_step = snn.readout == ReadoutRule::kPerTimestep;
  const std::size_t k_count = snn.hidden.size();

  std::vector<SubnetTrace> traces(k_count);
#pragma omp parallel for schedule(static)
  for (std::size_t k = 0; k < k_count; ++k) {
    traces[k] = run_subnet(snn.hidden[k], inputs, options);
  }

  RealMatrix out = RealMatrix::Zero(per_step ? n * t_count : n, snn.d_out);
  for (std::size_t k = 0; k < k_count; ++k) {
    const auto& top = traces[k].s.back();
    if (per_step) {
      for (Index t = 0; t < t_count; ++t) {
        out.middleRows(t * n, n).noalias() += top[static_cast<std::size_t>(t + 1)] * snn.p_out[k];
      }
    } else {
      out.noalias() += top.back() * snn.p_out[k];
    }
  }
  check(targets.rows() == out.rows() && targets.cols() == out.cols(),
        "targets do not match the readout");
  LossAndGradient res;
  res.loss = loss_value(spec, out, targets);
  const RealMatrix g = loss_gradient(spec, out, targets);

  // Per-subnet gradients, written into disjoint slices.
  std::vector<Index> offsets(k_count + 1, 0);
  for (std::size_t k = 0; k < k_count; ++k) {
    offsets[k + 1] = offsets[k] + subnet_param_count(snn.hidden[k], snn.trainable);
  }
  res.gradient = RealVector::Zero(param_count(snn));
  Index pout_offset = offsets[k_count];

#pragma omp parallel for schedule(static)
  for (std::size_t k = 0; k < k_count; ++k) {
    const LifWitness& w = snn.hidden[k];
    const SubnetTrace& tr = traces[k];
    const std::size_t depth = w.layers.size();
    std::vector<RealMatrix> d_p(depth);
    std::vector<RealVector> d_leak(depth);
    std::vector<RealVector> d_thr(depth);
    std::vector<RealMatrix> du_next(depth);
    for (std::size_t l = 0; l < depth; ++l) {
      d_p[l] = RealMatrix::Zero(w.layers[l].input_dim(), w.layers[l].width());
      d_leak[l] = RealVector::Zero(w.layers[l].width());
      d_thr[l] = RealVector::Zero(w.layers[l].width());
      du_next[l] = RealMatrix::Zero(n, w.layers[l].width());
    }
    for (Index t = t_count; t >= 1; --t) {
      const std::size_t ti = static_cast<std::size_t>(t);
      RealMatrix ds_from_above;
      for (std::size_t l = depth; l-- > 0;) {
        const auto& p = w.layers[l];
        RealMatrix ds;
        if (l + 1 == depth) {
          if (per_step) {
            ds = g.middleRows((t - 1) * n, n) * snn.p_out[k].transpose();
          } else if (t == t_count) {
            ds = g * snn.p_out[k].transpose();
          } else {
            ds = RealMatrix::Zero(n, p.width());
          }
        } else {
          ds = std::move(ds_from_above);
        }
        if (!options.detach_reset) {
          ds -= du_next[l] * p.u_thr.asDiagonal();
        }
        const RealMatrix& u = tr.u[l][ti];
        RealMatrix du(n, p.width());
        for (Index i = 0; i < n; ++i) {
          for (Index j = 0; j < p.width(); ++j) {
            du(i, j) = ds(i, j) * surrogate_derivative(u(i, j), options.slope) +
                       p.leak[j] * du_next[l](i, j);
          }
        }
        const RealMatrix& x = l == 0 ? inputs[ti - 1] : tr.s[l - 1][ti];
        d_p[l].noalias() += x.transpose() * du;
        d_leak[l] += (du.array() * tr.u[l][ti - 1].array()).colwise().sum().matrix().transpose();
        d_thr[l] -= (du.array() * tr.s[l][ti - 1].array()).colwise().sum().matrix().transpose();
        if (l > 0) ds_from_above = du * p.p_in.transpose();
        du_next[l] = std::move(du);
      }
    }
    Index o = offsets[k];
    auto put = [&](const double* data, Index size) {
      std::copy(data, data + size, res.gradient.data() + o);
      o += size;
    };
    for (std::size_t l = 0; l < depth; ++l) {
      if (snn.trainable.p_in) put(d_p[l].data(), d_p[l].size());
      if (snn.trainable.leak) put(d_leak[l].data(), d_leak[l].size());
      if (snn.trainable.u_thr) put(d_thr[l].data(), d_thr[l].size());
    }
  }
  if (snn.trainable.p_out) {
    for (std::size_t k = 0; k < k_count; ++k) {
      const auto& top = traces[k].s.back();
      RealMatrix dp = RealMatrix::Zero(snn.arch.last_width(), snn.d_out);
      if (per_step) {
        for (Index t = 0; t < t_count; ++t) {
          dp.noalias() += top[static_cast<std::size_t>(t + 1)].transpose() * g.middleRows(t * n, n);
        }
      } else {
        dp.noalias() = top.back().transpose() * g;
      }
      std::copy(dp.data(), dp.data() + dp.size(), res.gradient.data() + pout_offset);
      pout_offset += dp.size();
    }
  }
  if (!res.gradient.allFinite() || !std::isfinite(res.loss)) fail("gradient overflow");
  res.output = std::move(out);
  return res;
}

double dataset_loss(const TrainableSnn& snn, const TaskDataset& data,
                    const LossFactory& loss) {
  const RealMatrix out = snn.to_parallel().forward(data.inputs);
  return loss_value(loss(data), out, data.targets);
}

TrainResult train_sg(const SurrogateConfig& config, const TaskDataset& train,
                     const TaskDataset& val, const LossFactory& loss,
                     const ValidationMetric& metric, TrainableSnn init) {
  check(config.slope > 0.0, "surrogate slope must be positive");
  check(config.batch_size >= 1, "batch size must be positive");
  check(config.learning_rate >= 0.0, "learning rate must be nonnegative");
  init.validate();
  check(init.arch.input_dim == train.input_dim(), "dataset does not match the architecture");

  TrainResult res;
  res.best = init;
  res.best_metric = metric(init, val);
  res.curve.push_back({0, dataset_loss(init, train, loss), res.best_metric});

  TrainableSnn snn = std::move(init);
  RealVector theta = get_params(snn);
  RealVector m = RealVector::Zero(theta.size());
  RealVector v = RealVector::Zero(theta.size());
  Index step = 0;
  BpttOptions bptt{config.slope, false, config.detach_reset};
  Rng rng(derive_seed(config.seed, tag_of("sg-shuffle")));
  std::vector<Index> order(static_cast<std::size_t>(train.n()));
  std::iota(order.begin(), order.end(), Index{0});

  for (Index epoch = 1; epoch <= config.epochs && !res.diverged; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    Index seen = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(config.batch_size));
      const std::vector<Index> rows(order.begin() + static_cast<std::ptrdiff_t>(b),
                                    order.begin() + static_cast<std::ptrdiff_t>(e));
      const TaskDataset batch = subset(train, rows);
      LossAndGradient lg;
      try {
        lg = surrogate_forward_backward(snn, batch.inputs, batch.targets, loss(batch), bptt);
      } catch (const Error&) {
        res.diverged = true;
        break;
      }
      RealVector grad = lg.gradient + config.reg * theta;
      ++step;
      const double b1 = config.adam.beta1;
      const double b2 = config.adam.beta2;
      m = b1 * m + (1.0 - b1) * grad;
      v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
      theta.array() -= config.learning_rate * (m.array() / c1) /
                       ((v.array() / c2).sqrt() + config.adam.eps);
      if (!theta.allFinite()) {
        res.diverged = true;
        break;
      }
      set_params(snn, theta);
      for (auto& w : snn.hidden) {
        for (auto& p : w.layers) {
          p.leak = p.leak.cwiseMax(0.0).cwiseMin(kLeakMax);
          p.u_thr = p.u_thr.cwiseMax(0.0);
        }
      }
      theta = get_params(snn);
      total += lg.loss;
      seen += static_cast<Index>(rows.size());
    }
    if (res.diverged) break;
    const double val_metric = metric(snn, val);
    res.curve.push_back({epoch, total / static_cast<double>(std::max<Index>(seen, 1)), val_metric});
    if (val_metric > res.best_metric) {
      res.best_metric = val_metric;
      res.best = snn;
      res.best_epoch = epoch;
    }
  }
  return res;
}

nlohmann::json trainable_to_json(const TrainableSnn& snn,
                                 const std::string& stage) {
  nlohmann::json subnets = nlohmann::json::array();
  for (std::size_t k = 0; k < snn.hidden.size(); ++k) {
    subnets.push_back({{"witness", witness_to_json(snn.hidden[k])},
                       {"p_out", matrix_to_json(snn.p_out[k])}});
  }
  return {{"format_version", kTrainableFormat},
          {"stage", stage},
          {"arch", arch_json(snn.arch)},
          {"readout_rule", readout_rule_name(snn.readout)},
          {"d_out", snn.d_out},
          {"trainable",
           {{"p_in", snn.trainable.p_in},
            {"leak", snn.trainable.leak},
            {"u_thr", snn.trainable.u_thr},
            {"p_out", snn.trainable.p_out}}},
          {"subnets", subnets}};
}

TrainableSnn trainable_from_json(const nlohmann::json& j) {
  check(j.at("format_version").get<int>() == kTrainableFormat,
        "unsupported checkpoint format");
  TrainableSnn snn;
  const auto& a = j.at("arch");
  snn.arch.input_dim = a.at("input_dim").get<Index>();
  snn.arch.widths = a.at("widths").get<std::vector<Index>>();
  snn.arch.timesteps = a.at("timesteps").get<Index>();
  snn.readout = readout_rule_from_name(j.at("readout_rule").get<std::string>());
  snn.d_out = j.at("d_out").get<Index>();
  const auto& t = j.at("trainable");
  snn.trainable = {t.at("p_in").get<bool>(), t.at("leak").get<bool>(),
                   t.at("u_thr").get<bool>(), t.at("p_out").get<bool>()};
  for (const auto& s : j.at("subnets")) {
    snn.hidden.push_back(witness_from_json(s.at("witness")));
    snn.p_out.push_back(matrix_from_json(s.at("p_out")));
  }
  snn.validate();
  return snn;
}

}  // namespace csnn
