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

#include "csnn/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>

namespace csnn::kernels {
namespace {

// Runs body(i) for i in [0, n). The parallel path uses a static schedule;
// bodies write disjoint outputs, so the split never affects results.
template <typename Body>
void for_each_index(Index n, Exec exec, Body&& body) {
  if (exec == Exec::kSerial) {
    for (Index i = 0; i < n; ++i) body(i);
    return;
  }
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) body(i);
}

template <typename Body>
bool all_of_indices(Index n, Exec exec, Body&& body) {
  bool ok = true;
  if (exec == Exec::kSerial) {
    for (Index i = 0; i < n; ++i) ok = body(i) && ok;
    return ok;
  }
#pragma omp parallel for schedule(static) reduction(&& : ok)
  for (Index i = 0; i < n; ++i) ok = body(i) && ok;
  return ok;
}

// acc += x_row * p, summing input coordinates in ascending order.
template <typename Scalar>
inline void accumulate_row(const Scalar* x, Index in_dim, const RealMatrix& p,
                           double* acc) {
  const Index width = p.cols();
  for (Index k = 0; k < in_dim; ++k) {
    const double xk = static_cast<double>(x[k]);
    if (xk == 0.0) continue;
    const double* row = p.data() + k * width;
    if (xk == 1.0) {
      for (Index j = 0; j < width; ++j) acc[j] += row[j];
    } else {
      for (Index j = 0; j < width; ++j) acc[j] += xk * row[j];
    }
  }
}

template <typename Input>
bool lif_step_impl(const Input& x, const RealMatrix& p_in,
                   const RealVector& leak, const RealVector& thr,
                   RealMatrix& u, ByteMatrix& s, Exec exec) {
  const Index width = p_in.cols();
  const Index in_dim = p_in.rows();
  return all_of_indices(x.rows(), exec, [&](Index i) {
    std::vector<double> acc(static_cast<std::size_t>(width), 0.0);
    accumulate_row(x.data() + i * in_dim, in_dim, p_in, acc.data());
    double* u_row = u.data() + i * width;
    std::uint8_t* s_row = s.data() + i * width;
    bool finite = true;
    for (Index j = 0; j < width; ++j) {
      const double reset = s_row[j] ? thr[j] : 0.0;
      const double v = (acc[j] + leak[j] * u_row[j]) - reset;
      u_row[j] = v;
      s_row[j] = v >= 0.0 ? 1 : 0;
      finite = finite && std::isfinite(v);
    }
    return finite;
  });
}

template <typename Input>
bool rnn_step_impl(const Input& x, const RealMatrix& p_in,
                   const RealMatrix& p_rec, ByteMatrix& h, Exec exec) {
  const Index width = p_in.cols();
  const Index in_dim = p_in.rows();
  return all_of_indices(x.rows(), exec, [&](Index i) {
    std::vector<double> acc(static_cast<std::size_t>(width), 0.0);
    std::vector<std::uint8_t> prev(h.data() + i * width,
                                   h.data() + (i + 1) * width);
    accumulate_row(x.data() + i * in_dim, in_dim, p_in, acc.data());
    accumulate_row(prev.data(), width, p_rec, acc.data());
    bool finite = true;
    for (Index j = 0; j < width; ++j) {
      h(i, j) = acc[j] >= 0.0 ? 1 : 0;
      finite = finite && std::isfinite(acc[j]);
    }
    return finite;
  });
}

}  // namespace

bool lif_step(const RealMatrix& x, const RealMatrix& p_in,
              const RealVector& leak, const RealVector& thr, RealMatrix& u,
              ByteMatrix& s, Exec exec) {
  return lif_step_impl(x, p_in, leak, thr, u, s, exec);
}

bool lif_step(const ByteMatrix& x, const RealMatrix& p_in,
              const RealVector& leak, const RealVector& thr, RealMatrix& u,
              ByteMatrix& s, Exec exec) {
  return lif_step_impl(x, p_in, leak, thr, u, s, exec);
}

bool threshold_rnn_step(const RealMatrix& x, const RealMatrix& p_in,
                        const RealMatrix& p_rec, ByteMatrix& h, Exec exec) {
  return rnn_step_impl(x, p_in, p_rec, h, exec);
}

bool threshold_rnn_step(const ByteMatrix& x, const RealMatrix& p_in,
                        const RealMatrix& p_rec, ByteMatrix& h, Exec exec) {
  return rnn_step_impl(x, p_in, p_rec, h, exec);
}

void bit_matmul(const BitColumns& d, const RealMatrix& w, RealMatrix& out,
                Exec exec) {
  check(w.rows() == d.cols(), "bit_matmul: shape mismatch");
  const Index k = w.cols();
  out.setZero(d.rows(), k);
  // Skip all-zero coefficient rows (lasso iterates are sparse).
  std::vector<Index> active;
  for (Index j = 0; j < d.cols(); ++j) {
    if (!w.row(j).isZero(0.0)) active.push_back(j);
  }
  const Index words = d.words_per_column();
  for_each_index(words, exec, [&](Index wb) {
    for (Index j : active) {
      std::uint64_t word = d.column(j)[static_cast<std::size_t>(wb)];
      const double* wr = w.data() + j * k;
      while (word) {
        const Index r = wb * 64 + std::countr_zero(word);
        word &= word - 1;
        double* orow = out.data() + r * k;
        for (Index c = 0; c < k; ++c) orow[c] += wr[c];
      }
    }
  });
}

void bit_matmul_transpose(const BitColumns& d, const RealMatrix& v,
                          RealMatrix& out, Exec exec) {
  check(v.rows() == d.rows(), "bit_matmul_transpose: shape mismatch");
  const Index k = v.cols();
  out.setZero(d.cols(), k);
  const Index words = d.words_per_column();
  for_each_index(d.cols(), exec, [&](Index j) {
    const auto col = d.column(j);
    double* orow = out.data() + j * k;
    for (Index wb = 0; wb < words; ++wb) {
      std::uint64_t word = col[static_cast<std::size_t>(wb)];
      while (word) {
        const Index r = wb * 64 + std::countr_zero(word);
        word &= word - 1;
        const double* vr = v.data() + r * k;
        for (Index c = 0; c < k; ++c) orow[c] += vr[c];
      }
    }
  });
}

void bit_gram(const BitColumns& d, const RealVector& row_weights,
              RealMatrix& gram, Exec exec) {
  const Index words = d.words_per_column();
  // One mask per distinct nonzero weight, in ascending weight order.
  std::vector<double> weights;
  std::vector<std::vector<std::uint64_t>> masks;
  if (row_weights.size() == 0) {
    weights.push_back(1.0);
    std::vector<std::uint64_t> all(static_cast<std::size_t>(words), ~0ULL);
    if (d.rows() % 64 != 0 && words > 0) {
      all.back() = (std::uint64_t{1} << (d.rows() % 64)) - 1;
    }
    masks.push_back(std::move(all));
  } else {
    check(row_weights.size() == d.rows(), "bit_gram: weight length mismatch");
    std::map<double, std::vector<std::uint64_t>> by_value;
    for (Index r = 0; r < d.rows(); ++r) {
      const double wv = row_weights[r];
      if (wv == 0.0) continue;
      auto& mask = by_value[wv];
      if (mask.empty()) mask.assign(static_cast<std::size_t>(words), 0);
      mask[r / 64] |= std::uint64_t{1} << (r % 64);
    }
    for (auto& [value, mask] : by_value) {
      weights.push_back(value);
      masks.push_back(std::move(mask));
    }
  }
  const Index p = d.cols();
  gram.setZero(p, p);
  for_each_index(p, exec, [&](Index i) {
    const auto ci = d.column(i);
    for (Index j = 0; j <= i; ++j) {
      const auto cj = d.column(j);
      double total = 0.0;
      for (std::size_t m = 0; m < masks.size(); ++m) {
        Index count = 0;
        for (Index wb = 0; wb < words; ++wb) {
          count += std::popcount(ci[static_cast<std::size_t>(wb)] &
                                 cj[static_cast<std::size_t>(wb)] &
                                 masks[m][static_cast<std::size_t>(wb)]);
        }
        total += weights[m] * static_cast<double>(count);
      }
      gram(i, j) = total;
    }
  });
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < i; ++j) gram(j, i) = gram(i, j);
  }
}

}  // namespace csnn::kernels
