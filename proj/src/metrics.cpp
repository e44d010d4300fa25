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


#include "csnn/metrics.hpp"

#include <algorithm>
#include <sstream>

namespace csnn {

namespace {

Index argmax(const RealMatrix& m, Index row, Index begin, Index count) {
  Index best = 0;
  for (Index j = 1; j < count; ++j) {
    if (m(row, begin + j) > m(row, begin + best)) best = j;
  }
  return best;
}

void require_addition(const TaskDataset& data, const char* what) {
  check(data.meta.kind == TaskKind::kAddition, what);
}

}  // namespace

std::pair<IntMatrix, IntMatrix> decode_addition(const RealMatrix& out,
                                                const TaskDataset& data) {
  require_addition(data, "not an addition dataset");
  const Index n = data.n();
  const Index t_count = static_cast<Index>(data.inputs.size());
  const int b = data.meta.base;
  check(out.rows() == n * t_count && out.cols() == b + 2,
        "readout does not match the addition targets");
  IntMatrix sum(n, t_count), carry(n, t_count);
  for (Index t = 0; t < t_count; ++t) {
    for (Index i = 0; i < n; ++i) {
      sum(i, t) = static_cast<int>(argmax(out, t * n + i, 0, b));
      carry(i, t) = static_cast<int>(argmax(out, t * n + i, b, 2));
    }
  }
  return {sum, carry};
}

MetricsRecord addition_metrics(const IntMatrix& pred_sum, const IntMatrix& pred_carry,
                               const TaskDataset& data) {
  require_addition(data, "not an addition dataset");
  const Index n = data.n();
  const Index t_count = data.sum_digits.cols();
  check(pred_sum.rows() == n && pred_sum.cols() == t_count &&
            pred_carry.rows() == n && pred_carry.cols() == t_count,
        "prediction shape mismatch");
  MetricsRecord r;
  r.task = task_kind_name(data.meta.kind);
  r.n = n;
  r.timesteps = t_count;
  r.seed = data.meta.seed;
  r.split = data.meta.split;
  Index sum_ok = 0, carry_ok = 0, joint_ok = 0, seq_ok = 0;
  std::vector<Index> first_errors;
  for (Index i = 0; i < n; ++i) {
    Index first = 0;
    for (Index t = 0; t < t_count; ++t) {
      const bool s = pred_sum(i, t) == data.sum_digits(i, t);
      const bool c = pred_carry(i, t) == data.carry_out(i, t);
      sum_ok += s;
      carry_ok += c;
      joint_ok += s && c;
      if (!(s && c) && first == 0) first = t + 1;
    }
    if (first == 0) {
      ++seq_ok;
    } else {
      first_errors.push_back(first);
    }
  }
  const double tokens = static_cast<double>(n * t_count);
  r.token_acc = static_cast<double>(sum_ok) / tokens;
  r.carry_acc = static_cast<double>(carry_ok) / tokens;
  r.joint_token_acc = static_cast<double>(joint_ok) / tokens;
  r.seq_acc = static_cast<double>(seq_ok) / static_cast<double>(n);
  r.accuracy = r.token_acc;
  r.error_sequences = static_cast<Index>(first_errors.size());
  if (!first_errors.empty()) {
    std::sort(first_errors.begin(), first_errors.end());
    double total = 0.0;
    for (Index f : first_errors) total += static_cast<double>(f);
    r.first_error_mean = total / static_cast<double>(first_errors.size());
    const std::size_t h = first_errors.size() / 2;
    r.first_error_median = first_errors.size() % 2
                               ? static_cast<double>(first_errors[h])
                               : 0.5 * static_cast<double>(first_errors[h - 1] + first_errors[h]);
    r.first_error_min = first_errors.front();
  }
  return r;
}

double classification_accuracy(const RealMatrix& out, const TaskDataset& data) {
  const Index n = data.n();
  check(out.rows() == n && out.cols() == data.d_out(), "readout does not match the targets");
  Index hit = 0;
  if (data.meta.kind == TaskKind::kFirstLastXor) {
    for (Index i = 0; i < n; ++i) hit += (out(i, 0) >= 0.0) == (data.targets(i, 0) > 0.0);
  } else {
    check(data.meta.kind == TaskKind::kMnist, "not a classification dataset");
    for (Index i = 0; i < n; ++i) {
      hit += argmax(out, i, 0, out.cols()) == data.labels[static_cast<std::size_t>(i)];
    }
  }
  return static_cast<double>(hit) / static_cast<double>(n);
}

double task_metric(const RealMatrix& out, const TaskDataset& data) {
  if (data.meta.kind == TaskKind::kAddition) {
    const auto [sum, carry] = decode_addition(out, data);
    return addition_metrics(sum, carry, data).token_acc;
  }
  return classification_accuracy(out, data);
}

MetricsRecord evaluate_teacher_forced(const ParallelSnn& snn, const TaskDataset& data,
                                      kernels::Exec exec) {
  const RealMatrix out = snn.forward(data.inputs, exec);
  MetricsRecord r;
  if (data.meta.kind == TaskKind::kAddition) {
    const auto [sum, carry] = decode_addition(out, data);
    r = addition_metrics(sum, carry, data);
  } else {
    r.task = task_kind_name(data.meta.kind);
    r.n = data.n();
    r.timesteps = static_cast<Index>(data.inputs.size());
    r.seed = data.meta.seed;
    r.split = data.meta.split;
    r.accuracy = classification_accuracy(out, data);
  }
  r.mode = "tf";
  return r;
}

MetricsRecord eval_autoregressive(const StepFunction& step, const TaskDataset& data) {
  require_addition(data, "autoregressive mode requires carry task");
  const Index n = data.n();
  const Index t_count = static_cast<Index>(data.inputs.size());
  const int b = data.meta.base;
  IntMatrix sum(n, t_count), carry(n, t_count);
  std::vector<int> carry_in(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    carry_in[static_cast<std::size_t>(i)] = static_cast<int>(data.inputs.front()(i, 2));
  }
  for (Index t = 0; t < t_count; ++t) {
    const RealMatrix out = step(addition_step_input(data, t, carry_in));
    check(out.rows() == n && out.cols() == b + 2, "step readout shape mismatch");
    for (Index i = 0; i < n; ++i) {
      sum(i, t) = static_cast<int>(argmax(out, i, 0, b));
      carry(i, t) = static_cast<int>(argmax(out, i, b, 2));
      carry_in[static_cast<std::size_t>(i)] = carry(i, t);
    }
  }
  MetricsRecord r = addition_metrics(sum, carry, data);
  r.mode = "ar";
  return r;
}

MetricsRecord eval_autoregressive(const ParallelSnn& snn, const TaskDataset& data,
                                  kernels::Exec exec) {
  require_addition(data, "autoregressive mode requires carry task");
  SnnStepper stepper(snn, data.n(), exec);
  return eval_autoregressive([&](const RealMatrix& x) { return stepper.step(x); }, data);
}

std::string metrics_csv_header() {
  return "schema_version,task,mode,split,seed,n,timesteps,accuracy,token_acc,joint_token_acc,"
         "carry_acc,seq_acc,error_sequences,first_error_mean,first_error_median,"
         "first_error_min,primal,dual,gap,seconds";
}

std::string metrics_csv_row(const MetricsRecord& r) {
  std::ostringstream os;
  os.precision(17);
  os << kMetricsSchemaVersion << ',' << r.task << ',' << r.mode << ',' << r.split << ',' << r.seed << ','
     << r.n << ',' << r.timesteps << ',' << r.accuracy << ',' << r.token_acc << ','
     << r.joint_token_acc << ',' << r.carry_acc << ',' << r.seq_acc << ','
     << r.error_sequences << ',' << r.first_error_mean << ',' << r.first_error_median << ','
     << r.first_error_min << ',' << r.primal << ',' << r.dual << ',' << r.gap << ','
     << r.seconds;
  return os.str();
}

}  // namespace csnn
