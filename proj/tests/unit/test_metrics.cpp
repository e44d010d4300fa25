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

#include <algorithm>
#include <sstream>

#include "csnn/metrics.hpp"

using namespace csnn;

namespace {

// Reads (a, b, c_in) from the normalized step input and answers one-hot.
StepFunction adder(int base, bool predict_carry) {
  return [base, predict_carry](const RealMatrix& x) {
    RealMatrix out = RealMatrix::Zero(x.rows(), base + 2);
    for (Index i = 0; i < x.rows(); ++i) {
      const int a = static_cast<int>(std::lround(x(i, 0) * (base - 1)));
      const int b = static_cast<int>(std::lround(x(i, 1) * (base - 1)));
      const int c = static_cast<int>(std::lround(x(i, 2)));
      const int s = a + b + c;
      out(i, s % base) = 1.0;
      out(i, base + (predict_carry ? s / base : 0)) = 1.0;
    }
    return out;
  };
}

RealMatrix stacked(const StepFunction& f, const TaskDataset& d) {
  const Index n = d.n();
  RealMatrix out(n * static_cast<Index>(d.inputs.size()), d.meta.base + 2);
  for (std::size_t t = 0; t < d.inputs.size(); ++t) {
    out.middleRows(static_cast<Index>(t) * n, n) = f(d.inputs[t]);
  }
  return out;
}

}  // namespace

TEST_CASE("perfect predictions score one everywhere") {
  const TaskDataset d = gen_addition(3, 6, 200, 1);
  const MetricsRecord r = addition_metrics(d.sum_digits, d.carry_out, d);
  CHECK(r.token_acc == 1.0);
  CHECK(r.joint_token_acc == 1.0);
  CHECK(r.carry_acc == 1.0);
  CHECK(r.seq_acc == 1.0);
  CHECK(r.error_sequences == 0);
  CHECK(r.accuracy == r.token_acc);
}

TEST_CASE("decoding reads stacked rows and breaks ties low") {
  const TaskDataset d = gen_addition(2, 3, 5, 2);
  const auto [sum, carry] = decode_addition(d.targets, d);
  CHECK(sum == d.sum_digits);
  CHECK(carry == d.carry_out);
  const auto [s0, c0] = decode_addition(RealMatrix::Zero(d.targets.rows(), 4), d);
  CHECK(s0.maxCoeff() == 0);
  CHECK(c0.maxCoeff() == 0);
}

TEST_CASE("a perfect model gives identical teacher-forced and rollout metrics") {
  const TaskDataset d = gen_addition(5, 8, 300, 3);
  const auto f = adder(5, true);
  const auto [s, c] = decode_addition(stacked(f, d), d);
  const MetricsRecord tf = addition_metrics(s, c, d);
  const MetricsRecord ar = eval_autoregressive(f, d);
  CHECK(tf.joint_token_acc == 1.0);
  CHECK(ar.joint_token_acc == 1.0);
  CHECK(ar.seq_acc == tf.seq_acc);
  CHECK(ar.mode == "ar");
}

TEST_CASE("a model that never predicts a carry first errs at the first carry") {
  const TaskDataset d = gen_addition(2, 8, 400, 4);
  const MetricsRecord ar = eval_autoregressive(adder(2, false), d);
  std::vector<Index> expected;
  for (Index i = 0; i < d.n(); ++i) {
    for (Index t = 0; t < d.carry_out.cols(); ++t) {
      if (d.carry_out(i, t) == 1) {
        expected.push_back(t + 1);
        break;
      }
    }
  }
  REQUIRE(!expected.empty());
  CHECK(ar.error_sequences == static_cast<Index>(expected.size()));
  double mean = 0.0;
  for (Index e : expected) mean += static_cast<double>(e);
  mean /= static_cast<double>(expected.size());
  CHECK(ar.first_error_mean == doctest::Approx(mean).epsilon(1e-15));
  CHECK(ar.first_error_min == *std::min_element(expected.begin(), expected.end()));
}

TEST_CASE("rollout rejects non-addition data") {
  const TaskDataset x = gen_first_last_xor(4, 10, 5);
  CHECK_THROWS_WITH_AS(eval_autoregressive(adder(2, true), x),
                       "autoregressive mode requires carry task", Error);
}

TEST_CASE("classification accuracy follows the sign or argmax") {
  const TaskDataset x = gen_first_last_xor(4, 10, 6);
  CHECK(classification_accuracy(x.targets, x) == 1.0);
  CHECK(classification_accuracy(-x.targets, x) == 0.0);
  CHECK(task_metric(x.targets, x) == 1.0);
}

TEST_CASE("CSV rows match the header") {
  MetricsRecord r;
  r.task = "addition";
  r.mode = "tf";
  const auto count = [](const std::string& s) { return std::count(s.begin(), s.end(), ','); };
  CHECK(count(metrics_csv_header()) == count(metrics_csv_row(r)));
  CHECK(metrics_csv_row(r).rfind("1,addition,tf,", 0) == 0);
}
