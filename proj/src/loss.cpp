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


#include "csnn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace csnn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Conjugate arguments computed from a rescaled gradient may overshoot the
// domain boundary by roundoff.
constexpr double kDomainSlack = 1e-10;

double xlogx(double x) { return x <= 0.0 ? 0.0 : x * std::log(x); }

// log(1 + exp(v)) without overflow.
double softplus(double v) {
  return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
}

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

Index label_of(const RealMatrix& y, Index r, const LossHead& h) {
  Index label = -1;
  for (Index c = h.begin; c < h.end; ++c) {
    if (y(r, c) == 1.0) {
      if (label >= 0) return -1;
      label = c;
    } else if (y(r, c) != 0.0) {
      return -1;
    }
  }
  return label;
}

double logsumexp(const RealMatrix& m, Index r, Index begin, Index end) {
  double hi = -kInf;
  for (Index c = begin; c < end; ++c) hi = std::max(hi, m(r, c));
  double s = 0.0;
  for (Index c = begin; c < end; ++c) s += std::exp(m(r, c) - hi);
  return hi + std::log(s);
}

}  // namespace

std::string loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::kSquared:
      return "squared";
    case LossKind::kLogistic:
      return "logistic";
    case LossKind::kSoftmax:
      return "softmax";
  }
  return "squared";
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "squared") return LossKind::kSquared;
  if (name == "logistic") return LossKind::kLogistic;
  if (name == "softmax") return LossKind::kSoftmax;
  fail("unknown loss '" + name + "'");
}

LossSpec LossSpec::single(LossKind kind, Index d_out) {
  LossSpec spec;
  spec.heads.push_back({0, d_out, kind, 1.0});
  return spec;
}

Index LossSpec::d_out() const { return heads.empty() ? 0 : heads.back().end; }

bool LossSpec::all_squared() const {
  return std::all_of(heads.begin(), heads.end(), [](const LossHead& h) {
    return h.kind == LossKind::kSquared;
  });
}

void LossSpec::validate(Index rows) const {
  check(!heads.empty(), "loss needs at least one head");
  Index next = 0;
  for (const auto& h : heads) {
    check(h.begin == next && h.end > h.begin, "loss heads must tile the outputs");
    check(std::isfinite(h.weight) && h.weight >= 0.0,
          "loss head weights must be nonnegative");
    next = h.end;
  }
  if (row_weights.size() != 0) {
    check(row_weights.size() == rows, "row weight length mismatch");
    check((row_weights.array() >= 0.0).all() && row_weights.allFinite(),
          "row weights must be nonnegative");
  }
}

double LossSpec::curvature_bound() const {
  double c = 0.0;
  for (const auto& h : heads) {
    const double k = h.kind == LossKind::kSquared    ? 1.0
                     : h.kind == LossKind::kLogistic ? 0.25
                                                     : 0.5;
    c = std::max(c, k * h.weight);
  }
  return c;
}

void validate_targets(const LossSpec& spec, const RealMatrix& y) {
  spec.validate(y.rows());
  check(y.cols() == spec.d_out(), "target width does not match the loss heads");
  check(all_finite(y), "label out of domain");
  for (const auto& h : spec.heads) {
    for (Index r = 0; r < y.rows(); ++r) {
      if (h.kind == LossKind::kLogistic) {
        for (Index c = h.begin; c < h.end; ++c) {
          check(y(r, c) == 1.0 || y(r, c) == -1.0, "label out of domain");
        }
      } else if (h.kind == LossKind::kSoftmax) {
        check(label_of(y, r, h) >= 0, "label out of domain");
      }
    }
  }
}

double loss_value(const LossSpec& spec, const RealMatrix& pred,
                  const RealMatrix& y) {
  double total = 0.0;
  for (Index r = 0; r < pred.rows(); ++r) {
    const double rw = spec.row_weight(r);
    if (rw == 0.0) continue;
    for (const auto& h : spec.heads) {
      const double a = rw * h.weight;
      if (a == 0.0) continue;
      switch (h.kind) {
        case LossKind::kSquared:
          for (Index c = h.begin; c < h.end; ++c) {
            const double d = pred(r, c) - y(r, c);
            total += 0.5 * a * d * d;
          }
          break;
        case LossKind::kLogistic:
          for (Index c = h.begin; c < h.end; ++c) {
            total += a * softplus(-y(r, c) * pred(r, c));
          }
          break;
        case LossKind::kSoftmax: {
          const Index label = label_of(y, r, h);
          total += a * (logsumexp(pred, r, h.begin, h.end) - pred(r, label));
          break;
        }
      }
    }
  }
  return total;
}

RealMatrix loss_gradient(const LossSpec& spec, const RealMatrix& pred,
                         const RealMatrix& y) {
  RealMatrix g = RealMatrix::Zero(pred.rows(), pred.cols());
  for (Index r = 0; r < pred.rows(); ++r) {
    const double rw = spec.row_weight(r);
    if (rw == 0.0) continue;
    for (const auto& h : spec.heads) {
      const double a = rw * h.weight;
      if (a == 0.0) continue;
      switch (h.kind) {
        case LossKind::kSquared:
          for (Index c = h.begin; c < h.end; ++c) g(r, c) = a * (pred(r, c) - y(r, c));
          break;
        case LossKind::kLogistic:
          for (Index c = h.begin; c < h.end; ++c) {
            g(r, c) = -a * y(r, c) * sigmoid(-y(r, c) * pred(r, c));
          }
          break;
        case LossKind::kSoftmax: {
          const double lse = logsumexp(pred, r, h.begin, h.end);
          for (Index c = h.begin; c < h.end; ++c) {
            g(r, c) = a * (std::exp(pred(r, c) - lse) - y(r, c));
          }
          break;
        }
      }
    }
  }
  return g;
}

double loss_conjugate(const LossSpec& spec, const RealMatrix& z,
                      const RealMatrix& y) {
  double total = 0.0;
  for (Index r = 0; r < z.rows(); ++r) {
    const double rw = spec.row_weight(r);
    for (const auto& h : spec.heads) {
      const double a = rw * h.weight;
      if (a == 0.0) {
        for (Index c = h.begin; c < h.end; ++c) {
          if (z(r, c) != 0.0) return kInf;
        }
        continue;
      }
      switch (h.kind) {
        case LossKind::kSquared:
          for (Index c = h.begin; c < h.end; ++c) {
            total += z(r, c) * z(r, c) / (2.0 * a) + z(r, c) * y(r, c);
          }
          break;
        case LossKind::kLogistic:
          for (Index c = h.begin; c < h.end; ++c) {
            double v = z(r, c) * y(r, c) / a;
            if (v > kDomainSlack || v < -1.0 - kDomainSlack) return kInf;
            v = std::clamp(v, -1.0, 0.0);
            total += a * (xlogx(-v) + xlogx(1.0 + v));
          }
          break;
        case LossKind::kSoftmax: {
          double sum = 0.0;
          double ent = 0.0;
          for (Index c = h.begin; c < h.end; ++c) {
            const double q = z(r, c) / a + y(r, c);
            if (q < -kDomainSlack) return kInf;
            sum += q;
            ent += xlogx(std::max(q, 0.0));
          }
          if (std::abs(sum - 1.0) > kDomainSlack * (h.end - h.begin)) return kInf;
          total += a * ent;
          break;
        }
      }
    }
  }
  return total;
}

}  // namespace csnn
