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


// Parallel kernels against their serial references. The second argument of
// every benchmark selects the path: 0 serial, 1 parallel.

#include <benchmark/benchmark.h>

#include <random>

#include "csnn/kernels.hpp"
#include "csnn/surrogate.hpp"

namespace {

using csnn::Index;
using csnn::RealMatrix;
using csnn::RealVector;
using csnn::kernels::Exec;

Exec exec_of(const benchmark::State& state) {
  return state.range(1) ? Exec::kParallel : Exec::kSerial;
}

RealMatrix gaussian(Index rows, Index cols, std::uint64_t seed) {
  csnn::Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  RealMatrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

csnn::BitColumns random_bits(Index rows, Index cols, std::uint64_t seed) {
  csnn::Rng rng(seed);
  csnn::BitColumns d(rows, cols);
  for (Index c = 0; c < cols; ++c) {
    for (Index r = 0; r < rows; ++r) d.set(r, c, rng() & 1u);
  }
  return d;
}

void BM_LifStep(benchmark::State& state) {
  const Index n = state.range(0);
  const RealMatrix x = gaussian(n, 256, 1);
  const RealMatrix p = gaussian(256, 512, 2) / 16.0;
  const RealVector leak = RealVector::Constant(512, 0.9);
  const RealVector thr = RealVector::Ones(512);
  RealMatrix u = RealMatrix::Zero(n, 512);
  csnn::ByteMatrix s = csnn::ByteMatrix::Zero(n, 512);
  for (auto _ : state) {
    csnn::kernels::lif_step(x, p, leak, thr, u, s, exec_of(state));
    benchmark::DoNotOptimize(u.data());
  }
  state.SetItemsProcessed(state.iterations() * n * 512);
}
BENCHMARK(BM_LifStep)->ArgsProduct({{512, 4096}, {0, 1}});

void BM_BitMatmul(benchmark::State& state) {
  const Index rows = state.range(0);
  const csnn::BitColumns d = random_bits(rows, 1024, 3);
  const RealMatrix w = gaussian(1024, 4, 4);
  RealMatrix out;
  for (auto _ : state) {
    csnn::kernels::bit_matmul(d, w, out, exec_of(state));
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_BitMatmul)->ArgsProduct({{2048, 13824}, {0, 1}});

void BM_BitMatmulTranspose(benchmark::State& state) {
  const Index rows = state.range(0);
  const csnn::BitColumns d = random_bits(rows, 1024, 5);
  const RealMatrix v = gaussian(rows, 4, 6);
  RealMatrix out;
  for (auto _ : state) {
    csnn::kernels::bit_matmul_transpose(d, v, out, exec_of(state));
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_BitMatmulTranspose)->ArgsProduct({{2048, 13824}, {0, 1}});

void BM_BitGram(benchmark::State& state) {
  const Index cols = state.range(0);
  const csnn::BitColumns d = random_bits(4096, cols, 7);
  const RealVector wts = RealVector::Ones(4096);
  RealMatrix gram;
  for (auto _ : state) {
    csnn::kernels::bit_gram(d, wts, gram, exec_of(state));
    benchmark::DoNotOptimize(gram.data());
  }
}
BENCHMARK(BM_BitGram)->ArgsProduct({{256, 1024}, {0, 1}});

void BM_Bptt(benchmark::State& state) {
  const Index k = state.range(0);
  csnn::WitnessArch arch{3, {64, 128}, 6};
  const csnn::TrainableSnn snn =
      csnn::init_trainable(arch, k, 4, csnn::ReadoutRule::kPerTimestep, 8, {}, {});
  std::vector<RealMatrix> xs;
  for (Index t = 0; t < 6; ++t) xs.push_back(gaussian(128, 3, 10 + static_cast<std::uint64_t>(t)));
  const RealMatrix y = gaussian(6 * 128, 4, 20);
  const csnn::LossSpec spec = csnn::LossSpec::single(csnn::LossKind::kSquared, 4);
  for (auto _ : state) {
    auto lg = csnn::surrogate_forward_backward(snn, xs, y, spec, {});
    benchmark::DoNotOptimize(lg.gradient.data());
  }
}
BENCHMARK(BM_Bptt)->Args({2, 0})->Args({8, 0});

}  // namespace

BENCHMARK_MAIN();
