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

// Data-parallel inner loops. Every kernel has an OpenMP variant and a serial
// reference variant selected by `Exec`; both evaluate each output element with
// the same arithmetic in the same order, so results are bit-identical and do
// not depend on the thread count. Tests compare the two; bench/ times them.

#ifndef CSNN_KERNELS_HPP_
#define CSNN_KERNELS_HPP_

#include "csnn/bitmatrix.hpp"
#include "csnn/common.hpp"

namespace csnn::kernels {

enum class Exec { kParallel, kSerial };

// One timestep of a LIF layer for every row (sample):
//   u <- (x * p_in + leak .* u) - thr .* s ;  s <- [u >= 0]
// `s` holds the previous spikes on entry. Returns false if any membrane value
// is non-finite.
bool lif_step(const RealMatrix& x, const RealMatrix& p_in,
              const RealVector& leak, const RealVector& thr, RealMatrix& u,
              ByteMatrix& s, Exec exec = Exec::kParallel);
bool lif_step(const ByteMatrix& x, const RealMatrix& p_in,
              const RealVector& leak, const RealVector& thr, RealMatrix& u,
              ByteMatrix& s, Exec exec = Exec::kParallel);

// One timestep of a binary-state recurrent threshold layer:
//   h <- [x * p_in + h * p_rec >= 0]
bool threshold_rnn_step(const RealMatrix& x, const RealMatrix& p_in,
                        const RealMatrix& p_rec, ByteMatrix& h,
                        Exec exec = Exec::kParallel);
bool threshold_rnn_step(const ByteMatrix& x, const RealMatrix& p_in,
                        const RealMatrix& p_rec, ByteMatrix& h,
                        Exec exec = Exec::kParallel);

// out = D * w, with D given as packed columns (rows x P) and w dense (P x k).
// Rows are partitioned across threads in 64-row words; each output row sums
// its columns in ascending column order.
void bit_matmul(const BitColumns& d, const RealMatrix& w, RealMatrix& out,
                Exec exec = Exec::kParallel);

// out = D^T * v (P x k). Each column sums its set rows in ascending order.
void bit_matmul_transpose(const BitColumns& d, const RealMatrix& v,
                          RealMatrix& out, Exec exec = Exec::kParallel);

// gram = D^T diag(row_weights) D via popcounts. Rows sharing a weight value
// are grouped into one mask, so piecewise-constant weights (per-timestep
// ramps) cost one popcount pass per distinct value. Empty weights mean 1.
void bit_gram(const BitColumns& d, const RealVector& row_weights,
              RealMatrix& gram, Exec exec = Exec::kParallel);

}  // namespace csnn::kernels

#endif  // CSNN_KERNELS_HPP_
