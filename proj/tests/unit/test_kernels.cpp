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

#include "csnn/bitmatrix.hpp"
#include "csnn/kernels.hpp"
#include "test_util.hpp"

using namespace csnn;
using kernels::Exec;

namespace {

BitColumns random_bits(Index rows, Index cols, Rng& rng) {
  return BitColumns::from_dense(csnn::testing::binary(rows, cols, rng));
}

}  // namespace

TEST_CASE("bit columns round trip and keep padding clear") {
  Rng rng(1);
  const RealMatrix dense = csnn::testing::binary(130, 7, rng);
  const auto bits = BitColumns::from_dense(dense);
  CHECK(bits.words_per_column() == 3);
  CHECK(bits.to_dense() == dense);
  for (Index c = 0; c < 7; ++c) {
    CHECK((bits.column(c)[2] >> 2) == 0);
    CHECK(bits.column_popcount(c) == static_cast<Index>(dense.col(c).sum()));
  }
  CHECK_THROWS_AS(BitColumns::from_dense(RealMatrix::Constant(2, 2, 0.5)), Error);
}

TEST_CASE("append and pack agree with set") {
  std::vector<std::uint8_t> bits{1, 0, 0, 1, 1};
  BitColumns a(5, 0);
  a.append_column(pack_bits(bits));
  BitColumns b(5, 1);
  for (Index r = 0; r < 5; ++r) b.set(r, 0, bits[r] != 0);
  CHECK(a == b);
  CHECK(a.column_hash(0) == b.column_hash(0));
}

TEST_CASE("bit matmul kernels match dense products") {
  Rng rng(2);
  for (Index rows : {1, 63, 64, 65, 300}) {
    const auto d = random_bits(rows, 17, rng);
    const RealMatrix dense = d.to_dense();
    const RealMatrix w = csnn::testing::gaussian(17, 3, rng);
    const RealMatrix v = csnn::testing::gaussian(rows, 2, rng);
    RealMatrix out;
    kernels::bit_matmul(d, w, out, Exec::kSerial);
    CHECK((out - dense * w).cwiseAbs().maxCoeff() < 1e-12);
    kernels::bit_matmul_transpose(d, v, out, Exec::kSerial);
    CHECK((out - dense.transpose() * v).cwiseAbs().maxCoeff() < 1e-12);
    RealVector weights(rows);
    for (Index r = 0; r < rows; ++r) weights[r] = 0.5 + (r % 3);
    kernels::bit_gram(d, weights, out, Exec::kSerial);
    CHECK((out - dense.transpose() * weights.asDiagonal() * dense)
              .cwiseAbs()
              .maxCoeff() < 1e-9);
    kernels::bit_gram(d, RealVector(), out, Exec::kSerial);
    CHECK(out == dense.transpose() * dense);
  }
}

TEST_CASE("parallel and serial kernels are bit-identical") {
  Rng rng(3);
  const auto d = random_bits(777, 41, rng);
  const RealMatrix w = csnn::testing::gaussian(41, 4, rng);
  const RealMatrix v = csnn::testing::gaussian(777, 4, rng);
  RealVector weights(777);
  for (Index r = 0; r < 777; ++r) weights[r] = 1.0 + (r % 5) * 0.25;
  RealMatrix a, b;
  kernels::bit_matmul(d, w, a, Exec::kParallel);
  kernels::bit_matmul(d, w, b, Exec::kSerial);
  CHECK(a == b);
  kernels::bit_matmul_transpose(d, v, a, Exec::kParallel);
  kernels::bit_matmul_transpose(d, v, b, Exec::kSerial);
  CHECK(a == b);
  kernels::bit_gram(d, weights, a, Exec::kParallel);
  kernels::bit_gram(d, weights, b, Exec::kSerial);
  CHECK(a == b);

  const RealMatrix x = csnn::testing::gaussian(200, 6, rng);
  const RealMatrix p = csnn::testing::gaussian(6, 9, rng);
  const RealVector leak = RealVector::Constant(9, 0.7);
  const RealVector thr = RealVector::Constant(9, 1.0);
  RealMatrix u1 = RealMatrix::Zero(200, 9), u2 = u1;
  ByteMatrix s1 = ByteMatrix::Zero(200, 9), s2 = s1;
  for (int t = 0; t < 5; ++t) {
    CHECK(kernels::lif_step(x, p, leak, thr, u1, s1, Exec::kParallel));
    CHECK(kernels::lif_step(x, p, leak, thr, u2, s2, Exec::kSerial));
  }
  CHECK(u1 == u2);
  CHECK(s1 == s2);

  const RealMatrix rec = csnn::testing::gaussian(9, 9, rng);
  ByteMatrix h1 = ByteMatrix::Zero(200, 9), h2 = h1;
  for (int t = 0; t < 5; ++t) {
    kernels::threshold_rnn_step(x, p, rec, h1, Exec::kParallel);
    kernels::threshold_rnn_step(x, p, rec, h2, Exec::kSerial);
  }
  CHECK(h1 == h2);
}

TEST_CASE("zero coefficient rows are skipped without changing results") {
  Rng rng(4);
  const auto d = random_bits(100, 10, rng);
  RealMatrix w = csnn::testing::gaussian(10, 1, rng);
  w.row(3).setZero();
  w.row(7).setZero();
  RealMatrix out;
  kernels::bit_matmul(d, w, out, Exec::kSerial);
  CHECK((out - d.to_dense() * w).cwiseAbs().maxCoeff() < 1e-12);
}
