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

#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>

#include "csnn/tasks.hpp"
#include "test_util.hpp"

using namespace csnn;

namespace {

using u128 = unsigned __int128;

u128 value_of(const IntMatrix& digits, Index row, int base) {
  u128 v = 0;
  for (Index k = digits.cols(); k-- > 0;) v = v * static_cast<u128>(base) + digits(row, k);
  return v;
}

std::filesystem::path tmp(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

std::vector<char> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

IdxArray synthetic_images(std::uint32_t count, std::uint64_t seed) {
  Rng rng(seed);
  IdxArray a{{count, 28, 28}, {}};
  for (std::size_t i = 0; i < std::size_t{count} * 784; ++i) {
    a.data.push_back(static_cast<std::uint8_t>(rng() & 0xff));
  }
  return a;
}

}  // namespace

TEST_CASE("binary addition example") {
  TaskDataset d = gen_addition(2, 3, 1, 0);
  d.a_digits << 1, 0, 1;
  d.b_digits << 1, 1, 0;
  // regenerate sums from the fixed operands through the public pipeline
  int carry = 0;
  std::vector<std::pair<int, int>> got;
  for (Index t = 0; t < 4; ++t) {
    const int a = t < 3 ? d.a_digits(0, t) : 0;
    const int b = t < 3 ? d.b_digits(0, t) : 0;
    const int s = a + b + carry;
    carry = s / 2;
    got.emplace_back(s % 2, carry);
  }
  const std::vector<std::pair<int, int>> want = {{0, 1}, {0, 1}, {0, 1}, {1, 0}};
  CHECK(got == want);

  // find a generated sample with these operands and compare its targets
  const auto pool = gen_addition(2, 3, 4000, 5);
  bool found = false;
  for (Index i = 0; i < pool.n() && !found; ++i) {
    if (pool.a_digits.row(i) == d.a_digits.row(0) && pool.b_digits.row(i) == d.b_digits.row(0)) {
      found = true;
      for (Index t = 0; t < 4; ++t) {
        CHECK(pool.sum_digits(i, t) == want[t].first);
        CHECK(pool.carry_out(i, t) == want[t].second);
        CHECK(pool.targets(t * pool.n() + i, want[t].first) == 1.0);
        CHECK(pool.targets(t * pool.n() + i, 2 + want[t].second) == 1.0);
      }
      CHECK(value_of(pool.sum_digits, i, 2) == 8);
    }
  }
  CHECK(found);
}

TEST_CASE("zero operands give zero sums and carries") {
  const auto pool = gen_addition(2, 3, 3000, 1);
  Index zeros = 0;
  for (Index i = 0; i < pool.n(); ++i) {
    if (pool.a_digits.row(i).any() || pool.b_digits.row(i).any()) continue;
    ++zeros;
    CHECK(pool.sum_digits.row(i).sum() == 0);
    CHECK(pool.carry_out.row(i).sum() == 0);
  }
  CHECK(zeros > 0);
}

TEST_CASE("integer identity on 10^4 samples for bases 2, 3, 5") {
  for (int base : {2, 3, 5}) {
    for (Index digits : {Index{5}, Index{10}, Index{50}}) {
      const auto d = gen_addition(base, digits, 10000, 100 + base);
      CHECK(d.meta.timesteps == digits + 1);
      Index bad = 0;
      for (Index i = 0; i < d.n(); ++i) {
        const u128 a = value_of(d.a_digits, i, base);
        const u128 b = value_of(d.b_digits, i, base);
        if (value_of(d.sum_digits, i, base) != a + b) ++bad;
        // carry chain and inputs
        for (Index t = 1; t < d.meta.timesteps; ++t) {
          if (d.inputs[t](i, 2) != d.carry_out(i, t - 1)) ++bad;
        }
        if (d.inputs[0](i, 2) != 0.0) ++bad;
      }
      CHECK(bad == 0);
    }
  }
}

TEST_CASE("addition inputs are normalized digits") {
  const auto d = gen_addition(5, 5, 200, 3);
  CHECK(d.input_dim() == 3);
  for (Index t = 0; t < 6; ++t) {
    for (Index i = 0; i < d.n(); ++i) {
      const double a = t < 5 ? d.a_digits(i, t) / 4.0 : 0.0;
      CHECK(d.inputs[t](i, 0) == a);
      CHECK(d.inputs[t](i, 1) <= 1.0);
    }
  }
  std::vector<int> carry(200, 1);
  const RealMatrix x = addition_step_input(d, 2, carry);
  CHECK(x.col(2).isOnes());
  CHECK(x.leftCols(2) == d.inputs[2].leftCols(2));
}

TEST_CASE("splits are disjoint slices of one pool and deterministic") {
  SplitSizes sizes{40, 10, 40, 10, 20};
  const auto splits = addition_splits(2, 5, 7, sizes);
  const auto pool = gen_addition(2, 5, 120, 7);
  Index offset = 0;
  for (const char* name : {"train_pre", "val_pre", "train_ft", "val_ft", "test"}) {
    const auto& s = splits.at(name);
    CHECK(s.meta.split == name);
    CHECK(s.a_digits == pool.a_digits.middleRows(offset, s.n()));
    CHECK(s.b_digits == pool.b_digits.middleRows(offset, s.n()));
    offset += s.n();
  }
  CHECK(offset == 120);
  CHECK(addition_splits(2, 5, 7, sizes).at("test") == splits.at("test"));
  const SplitSizes defaults;
  CHECK(defaults.train_pre == 2304);
  CHECK(defaults.val_pre == 512);
  CHECK(defaults.train_ft == 2304);
  CHECK(defaults.val_ft == 512);
  CHECK(defaults.test == 1024);
  CHECK(ood_digit_lengths(2) == std::vector<Index>{10, 20, 50});
  CHECK(ood_digit_lengths(3) == std::vector<Index>{10, 25, 50});
  CHECK(ood_digit_lengths(5) == std::vector<Index>{10, 25, 50});
}

TEST_CASE("first-last XOR labels and balance") {
  for (Index n : {Index{100}, Index{101}}) {
    const auto d = gen_first_last_xor(6, n, 9);
    Index pos = 0;
    for (Index i = 0; i < n; ++i) {
      const int first = static_cast<int>(d.inputs.front()(i, 0));
      const int last = static_cast<int>(d.inputs.back()(i, 0));
      CHECK(d.labels[i] == (first ^ last));
      CHECK(d.targets(i, 0) == (d.labels[i] ? 1.0 : -1.0));
      pos += d.labels[i];
    }
    CHECK(std::abs(2 * pos - n) <= 1);
  }
  const auto oh = gen_first_last_xor(4, 50, 9, true);
  CHECK(oh.input_dim() == 2);
  for (const auto& x : oh.inputs) CHECK((x.rowwise().sum().array() == 1.0).all());
  CHECK(gen_first_last_xor(6, 64, 3) == gen_first_last_xor(6, 64, 3));
  CHECK_FALSE(gen_first_last_xor(6, 64, 3) == gen_first_last_xor(6, 64, 4));
}

TEST_CASE("IDX files round-trip and patch reassembly is byte exact") {
  const IdxArray images = synthetic_images(12, 1);
  IdxArray labels{{12}, {}};
  for (int i = 0; i < 12; ++i) labels.data.push_back(static_cast<std::uint8_t>(i % 10));
  for (bool gz : {false, true}) {
    const auto ip = tmp(gz ? "csnn_img.idx.gz" : "csnn_img.idx");
    const auto lp = tmp(gz ? "csnn_lab.idx.gz" : "csnn_lab.idx");
    write_idx(images, ip, gz);
    write_idx(labels, lp, gz);
    if (!gz) {
      const auto raw = file_bytes(ip);
      CHECK(raw[0] == 0x00);
      CHECK(raw[1] == 0x00);
      CHECK(raw[2] == 0x08);
      CHECK(raw[3] == 0x03);
      CHECK(file_bytes(lp)[3] == 0x01);
    }
    CHECK(read_idx(ip) == images);
    CHECK(read_idx(lp) == labels);
    for (Index t : {Index{1}, Index{2}, Index{28}, Index{784}}) {
      const auto d = load_mnist_seq(ip, lp, t);
      CHECK(d.inputs.size() == static_cast<std::size_t>(t));
      CHECK(d.input_dim() == 784 / t);
      for (Index i = 0; i < 12; ++i) {
        const auto bytes = mnist_image_bytes(d, i);
        CHECK(std::equal(bytes.begin(), bytes.end(), images.data.begin() + i * 784));
        CHECK(d.targets(i, i % 10) == 1.0);
      }
    }
    const auto part = load_mnist_seq(ip, lp, 28, 5, 4);
    CHECK(part.n() == 5);
    CHECK(part.labels[0] == 4);
    std::filesystem::remove(ip);
    std::filesystem::remove(lp);
  }
  CHECK_THROWS_AS(load_mnist_seq(tmp("missing.idx"), tmp("missing.idx"), 2), Error);
}

TEST_CASE("corrupt IDX files are rejected") {
  const auto p = tmp("csnn_bad.idx");
  {
    std::ofstream out(p, std::ios::binary);
    const char bad[] = {0, 0, 0x09, 3, 0, 0, 0, 1};
    out.write(bad, sizeof(bad));
  }
  CHECK_THROWS_WITH_AS(read_idx(p), "corrupt IDX file", Error);
  IdxArray short_payload = synthetic_images(2, 3);
  short_payload.data.pop_back();
  write_idx(short_payload, p, false);
  CHECK_THROWS_WITH_AS(read_idx(p), "corrupt IDX file", Error);
  IdxArray wrong_shape{{2, 27, 28}, std::vector<std::uint8_t>(2 * 27 * 28)};
  write_idx(wrong_shape, p, false);
  const auto lp = tmp("csnn_bad_lab.idx");
  write_idx(IdxArray{{2}, {0, 1}}, lp, false);
  CHECK_THROWS_WITH_AS(load_mnist_seq(p, lp, 2), "corrupt IDX file", Error);
  std::filesystem::remove(p);
  std::filesystem::remove(lp);
}

TEST_CASE("joint loss weights and ramp") {
  const RealVector ramp = ramp_weights(6);
  CHECK(ramp[0] == 0.5);
  CHECK(ramp[5] == 1.5);
  CHECK(ramp.mean() == doctest::Approx(1.0).epsilon(1e-15));
  for (Index t = 1; t < 6; ++t) CHECK(ramp[t] >= ramp[t - 1]);
  CHECK(ramp_weights(1) == RealVector::Ones(1));

  Rng rng(4);
  const auto d = gen_addition(3, 5, 30, 2);
  const RealMatrix pred = testing::gaussian(d.targets.rows(), 5, rng);
  const auto joint = joint_loss_spec(3, 1.0, 0.0, 6, 30, true);
  LossSpec sum_only;
  sum_only.heads = {{0, 3, LossKind::kSquared, 1.0}};
  sum_only.row_weights = joint.row_weights;
  CHECK(loss_value(joint, pred, d.targets) ==
        doctest::Approx(loss_value(sum_only, pred.leftCols(3), d.targets.leftCols(3))).epsilon(1e-14));
  const auto both = joint_loss_spec(3, 1.0, 2.0, 6, 30, false);
  CHECK(both.row_weights.size() == 0);
  CHECK(both.heads[1].weight == 2.0);

  CHECK(lambda_carry_grid() == std::vector<double>{0.125, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5,
                                                   2.0, 4.0, 6.0, 8.0, 10.0});
  CHECK(reg_grid() == std::vector<double>{1e-2, 1e-1, 0.5, 1.0, 5.0, 10.0});
  CHECK(sg_lr_grid() == std::vector<double>{1e-3, 5e-3, 1e-2, 1e-1});
}

TEST_CASE("dataset cache round-trips and is byte deterministic") {
  const auto a = tmp("csnn_a.bin");
  const auto b = tmp("csnn_b.bin");
  auto d = gen_addition(5, 5, 64, 11);
  d.meta.split = "train_pre";
  save_dataset(d, a);
  save_dataset(gen_addition(5, 5, 64, 11), b);
  CHECK(load_dataset(a) == d);
  const auto x = gen_first_last_xor(11, 33, 2, true);
  save_dataset(x, b);
  CHECK(load_dataset(b) == x);
  save_dataset(d, b);
  CHECK(file_bytes(a) == file_bytes(b));
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}
