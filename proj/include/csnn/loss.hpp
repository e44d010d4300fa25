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


// Convex readout losses, their gradients and Fenchel conjugates.
//
// The output columns are partitioned into heads; each head has a kind and a
// weight, and each row (sample, or sample-timestep when stacked) has a
// nonnegative weight. The effective weight of entry (r, c) is
// row_weight[r] * head_weight(c).
//
//   squared:  a/2 (yhat - y)^2 per entry
//   logistic: a log(1 + exp(-y yhat)) per entry, y in {-1, +1}
//   softmax:  a (logsumexp(yhat_head) - yhat_label) per row, Y one-hot

#ifndef CSNN_LOSS_HPP_
#define CSNN_LOSS_HPP_

#include <string>
#include <vector>

#include "csnn/common.hpp"

namespace csnn {

enum class LossKind { kSquared, kLogistic, kSoftmax };

std::string loss_kind_name(LossKind kind);
LossKind loss_kind_from_name(const std::string& name);

struct LossHead {
  Index begin = 0;
  Index end = 0;  // exclusive
  LossKind kind = LossKind::kSquared;
  double weight = 1.0;
};

struct LossSpec {
  std::vector<LossHead> heads;
  RealVector row_weights;  // empty means all ones

  static LossSpec single(LossKind kind, Index d_out);
  Index d_out() const;
  bool all_squared() const;
  double row_weight(Index r) const {
    return row_weights.size() == 0 ? 1.0 : row_weights[r];
  }
  // Heads tile [0, d_out) in order, weights are nonnegative and finite.
  void validate(Index rows) const;
  // Upper bound on the curvature of the loss along any direction, per unit
  // row weight: max over heads of weight * (1, 1/4, 1/2) for squared,
  // logistic, softmax.
  double curvature_bound() const;
};

// Throws "label out of domain" when Y does not fit the heads.
void validate_targets(const LossSpec& spec, const RealMatrix& y);

double loss_value(const LossSpec& spec, const RealMatrix& pred,
                  const RealMatrix& y);
RealMatrix loss_gradient(const LossSpec& spec, const RealMatrix& pred,
                         const RealMatrix& y);

// L*(z) = sup_pred <z, pred> - L(pred, Y). Returns +infinity outside the
// domain (small roundoff past the boundary is clipped).
double loss_conjugate(const LossSpec& spec, const RealMatrix& z,
                      const RealMatrix& y);

}  // namespace csnn

#endif  // CSNN_LOSS_HPP_
