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

#ifndef CSNN_COMMON_HPP_
#define CSNN_COMMON_HPP_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace csnn {

using Index = Eigen::Index;
using RealMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RealVector = Eigen::VectorXd;

// Every recoverable failure in the library is reported through this type. The
// message is part of the contract (tests match on it).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail(const std::string& message) {
  throw Error(message);
}

inline void check(bool condition, const std::string& message) {
  if (!condition) fail(message);
}

// SplitMix64 finalizer. Used to derive independent streams from
// (seed, counter...) tuples so that any single item can be regenerated in
// isolation.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <typename... Counters>
constexpr std::uint64_t derive_seed(std::uint64_t seed, Counters... counters) {
  std::uint64_t s = mix64(seed);
  ((s = mix64(s ^ static_cast<std::uint64_t>(counters))), ...);
  return s;
}

inline std::uint64_t tag_of(std::string_view tag) {
  // FNV-1a; stable across platforms, unlike std::hash.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Incremental FNV-1a over raw bytes; used for problem/run content hashes.
class Fnv1a {
 public:
  void update(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      hash_ ^= bytes[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  template <typename T>
  void update_value(const T& value) {
    update(&value, sizeof(T));
  }
  void update_string(std::string_view s) { update(s.data(), s.size()); }
  std::uint64_t digest() const { return hash_; }
  std::string hex() const;

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

bool all_finite(const RealMatrix& m);

}  // namespace csnn

#endif  // CSNN_COMMON_HPP_
