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

#include "csnn/bitmatrix.hpp"

#include <bit>

namespace csnn {

BitColumns::BitColumns(Index rows, Index cols)
    : rows_(rows),
      cols_(cols),
      words_(words_for_rows(rows)),
      data_(static_cast<std::size_t>(cols * words_for_rows(rows)), 0) {}

void BitColumns::set(Index row, Index col, bool value) {
  std::uint64_t& word = data_[col * words_ + row / 64];
  const std::uint64_t bit = std::uint64_t{1} << (row % 64);
  if (value) {
    word |= bit;
  } else {
    word &= ~bit;
  }
}

void BitColumns::append_column(std::span<const std::uint64_t> words) {
  check(static_cast<Index>(words.size()) == words_,
        "bit column length mismatch");
  data_.insert(data_.end(), words.begin(), words.end());
  ++cols_;
}

std::uint64_t BitColumns::column_hash(Index col) const {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (std::uint64_t w : column(col)) h = mix64(h ^ w);
  return h;
}

Index BitColumns::column_popcount(Index col) const {
  Index total = 0;
  for (std::uint64_t w : column(col)) total += std::popcount(w);
  return total;
}

RealMatrix BitColumns::to_dense() const {
  RealMatrix dense = RealMatrix::Zero(rows_, cols_);
  for (Index c = 0; c < cols_; ++c) {
    for (Index r = 0; r < rows_; ++r) {
      if (get(r, c)) dense(r, c) = 1.0;
    }
  }
  return dense;
}

BitColumns BitColumns::from_dense(const RealMatrix& dense) {
  BitColumns out(dense.rows(), dense.cols());
  for (Index c = 0; c < dense.cols(); ++c) {
    for (Index r = 0; r < dense.rows(); ++r) {
      const double v = dense(r, c);
      check(v == 0.0 || v == 1.0, "binary matrix entries must be 0 or 1");
      if (v == 1.0) out.set(r, c, true);
    }
  }
  return out;
}

std::vector<std::uint64_t> pack_bits(std::span<const std::uint8_t> bits) {
  std::vector<std::uint64_t> words(
      static_cast<std::size_t>(words_for_rows(static_cast<Index>(bits.size()))),
      0);
  for (std::size_t r = 0; r < bits.size(); ++r) {
    if (bits[r]) words[r / 64] |= std::uint64_t{1} << (r % 64);
  }
  return words;
}

}  // namespace csnn
