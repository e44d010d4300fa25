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

#ifndef CSNN_BITMATRIX_HPP_
#define CSNN_BITMATRIX_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "csnn/common.hpp"

namespace csnn {

using ByteMatrix =
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Column-major bit-packed binary matrix: each column occupies
// words_per_column() 64-bit words, row r of a column lives in bit (r % 64) of
// word (r / 64). Padding bits past rows() are always zero, so whole-word
// comparison and hashing are exact.
class BitColumns {
 public:
  BitColumns() = default;
  BitColumns(Index rows, Index cols);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index words_per_column() const { return words_; }

  bool get(Index row, Index col) const {
    return (data_[col * words_ + row / 64] >> (row % 64)) & 1u;
  }
  void set(Index row, Index col, bool value);

  std::span<const std::uint64_t> column(Index col) const {
    return {data_.data() + col * words_, static_cast<std::size_t>(words_)};
  }
  std::span<std::uint64_t> column(Index col) {
    return {data_.data() + col * words_, static_cast<std::size_t>(words_)};
  }

  // Appends a column given as packed words (padding must be zero).
  void append_column(std::span<const std::uint64_t> words);

  std::uint64_t column_hash(Index col) const;
  Index column_popcount(Index col) const;

  const std::vector<std::uint64_t>& data() const { return data_; }
  std::vector<std::uint64_t>& mutable_data() { return data_; }

  RealMatrix to_dense() const;
  static BitColumns from_dense(const RealMatrix& dense);

  friend bool operator==(const BitColumns& a, const BitColumns& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  Index words_ = 0;
  std::vector<std::uint64_t> data_;
};

inline Index words_for_rows(Index rows) { return (rows + 63) / 64; }

// Packs one column of 0/1 bytes.
std::vector<std::uint64_t> pack_bits(std::span<const std::uint8_t> bits);

}  // namespace csnn

#endif  // CSNN_BITMATRIX_HPP_
