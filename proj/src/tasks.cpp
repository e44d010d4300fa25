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


#include "csnn/tasks.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>
#include <zlib.h>

namespace csnn {

namespace {

constexpr char kCacheMagic[8] = {'S', 'N', 'N', 'D', 'A', 'T', 'A', '1'};
constexpr Index kMnistPixels = 784;

// Modulo keeps the digit stream identical across standard libraries; the
// bias is below base / 2^64.
int draw_digit(Rng& rng, int base) {
  return static_cast<int>(rng() % static_cast<std::uint64_t>(base));
}

std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
         (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::uint8_t> read_all_gz(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  check(f != nullptr, "cannot read " + path.string());
  std::vector<std::uint8_t> bytes;
  std::array<std::uint8_t, 1 << 16> buf{};
  for (;;) {
    const int got = gzread(f, buf.data(), static_cast<unsigned>(buf.size()));
    if (got < 0) {
      gzclose(f);
      fail("corrupt IDX file");
    }
    if (got == 0) break;
    bytes.insert(bytes.end(), buf.begin(), buf.begin() + got);
  }
  gzclose(f);
  return bytes;
}

// float32 little-endian tensors
template <typename U>
void put_le(std::ofstream& out, U v) {
  char b[sizeof(U)];
  for (std::size_t k = 0; k < sizeof(U); ++k) b[k] = static_cast<char>(v >> (8 * k));
  out.write(b, sizeof(U));
}

template <typename U>
U get_le(std::ifstream& in) {
  unsigned char b[sizeof(U)] = {};
  in.read(reinterpret_cast<char*>(b), sizeof(U));
  check(static_cast<bool>(in), "truncated dataset cache");
  U v = 0;
  for (std::size_t k = 0; k < sizeof(U); ++k) v |= static_cast<U>(b[k]) << (8 * k);
  return v;
}

void put_f32(std::ofstream& out, double v) {
  put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

double get_f32(std::ifstream& in) {
  return static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(in)));
}

template <typename M>
void put_matrix(std::ofstream& out, const M& m) {
  for (Index i = 0; i < m.size(); ++i) put_f32(out, static_cast<double>(m.data()[i]));
}

template <typename M>
void get_matrix(std::ifstream& in, M& m, Index rows, Index cols) {
  m.resize(rows, cols);
  using Scalar = typename M::Scalar;
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(get_f32(in));
}

nlohmann::json meta_to_json(const TaskMeta& m) {
  return {{"task", task_kind_name(m.kind)}, {"base", m.base},
          {"n_digits", m.n_digits},         {"timesteps", m.timesteps},
          {"seed", m.seed},                 {"split", m.split},
          {"one_hot_input", m.one_hot_input}};
}

TaskMeta meta_from_json(const nlohmann::json& j) {
  TaskMeta m;
  m.kind = task_kind_from_name(j.at("task").get<std::string>());
  m.base = j.at("base").get<int>();
  m.n_digits = j.at("n_digits").get<Index>();
  m.timesteps = j.at("timesteps").get<Index>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.split = j.at("split").get<std::string>();
  m.one_hot_input = j.at("one_hot_input").get<bool>();
  return m;
}

}  // namespace

std::string task_kind_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::kAddition:
      return "addition";
    case TaskKind::kFirstLastXor:
      return "first_last_xor";
    case TaskKind::kMnist:
      return "mnist";
  }
  return "addition";
}

TaskKind task_kind_from_name(const std::string& name) {
  if (name == "addition") return TaskKind::kAddition;
  if (name == "first_last_xor" || name == "xor") return TaskKind::kFirstLastXor;
  if (name == "mnist") return TaskKind::kMnist;
  fail("unknown task '" + name + "'");
}

TaskDataset subset(const TaskDataset& data, const std::vector<Index>& rows) {
  const Index n = data.n();
  const Index m = static_cast<Index>(rows.size());
  for (Index r : rows) check(r >= 0 && r < n, "subset row out of range");
  TaskDataset out;
  out.meta = data.meta;
  for (const auto& x : data.inputs) out.inputs.emplace_back(x(rows, Eigen::all));
  if (data.per_timestep()) {
    const Index t_count = data.meta.timesteps;
    out.targets.resize(m * t_count, data.targets.cols());
    for (Index t = 0; t < t_count; ++t) {
      for (Index i = 0; i < m; ++i) {
        out.targets.row(t * m + i) = data.targets.row(t * n + rows[static_cast<std::size_t>(i)]);
      }
    }
    out.a_digits = data.a_digits(rows, Eigen::all);
    out.b_digits = data.b_digits(rows, Eigen::all);
    out.sum_digits = data.sum_digits(rows, Eigen::all);
    out.carry_out = data.carry_out(rows, Eigen::all);
  } else {
    out.targets = data.targets(rows, Eigen::all);
  }
  for (Index r : rows) {
    if (!data.labels.empty()) out.labels.push_back(data.labels[static_cast<std::size_t>(r)]);
  }
  return out;
}

TaskDataset gen_addition(int base, Index n_digits, Index n_samples,
                         std::uint64_t seed, Index first_index) {
  check(base >= 2, "base must be at least 2");
  check(n_digits >= 1, "n_digits must be positive");
  check(n_samples >= 1, "sample count must be positive");
  const Index t_count = n_digits + 1;
  TaskDataset d;
  d.meta = {TaskKind::kAddition, base, n_digits, t_count, seed, "", false};
  d.a_digits.resize(n_samples, n_digits);
  d.b_digits.resize(n_samples, n_digits);
  d.sum_digits.resize(n_samples, t_count);
  d.carry_out.resize(n_samples, t_count);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n_samples; ++i) {
    Rng rng(derive_seed(seed, tag_of("addition"), first_index + i));
    for (Index k = 0; k < n_digits; ++k) d.a_digits(i, k) = draw_digit(rng, base);
    for (Index k = 0; k < n_digits; ++k) d.b_digits(i, k) = draw_digit(rng, base);
    int carry = 0;
    for (Index t = 0; t < t_count; ++t) {
      const int a = t < n_digits ? d.a_digits(i, t) : 0;
      const int b = t < n_digits ? d.b_digits(i, t) : 0;
      const int s = a + b + carry;
      d.sum_digits(i, t) = s % base;
      carry = s / base;
      d.carry_out(i, t) = carry;
    }
  }
  const double scale = 1.0 / (base - 1);
  d.targets = RealMatrix::Zero(n_samples * t_count, base + 2);
  for (Index t = 0; t < t_count; ++t) {
    RealMatrix x(n_samples, 3);
    for (Index i = 0; i < n_samples; ++i) {
      x(i, 0) = t < n_digits ? d.a_digits(i, t) * scale : 0.0;
      x(i, 1) = t < n_digits ? d.b_digits(i, t) * scale : 0.0;
      x(i, 2) = t == 0 ? 0.0 : d.carry_out(i, t - 1);
      d.targets(t * n_samples + i, d.sum_digits(i, t)) = 1.0;
      d.targets(t * n_samples + i, base + d.carry_out(i, t)) = 1.0;
    }
    d.inputs.push_back(std::move(x));
  }
  return d;
}

RealMatrix addition_step_input(const TaskDataset& data, Index t,
                               const std::vector<int>& carry_in) {
  check(data.meta.kind == TaskKind::kAddition, "not an addition dataset");
  check(static_cast<Index>(carry_in.size()) == data.n(), "carry length mismatch");
  RealMatrix x = data.inputs[static_cast<std::size_t>(t)];
  for (Index i = 0; i < data.n(); ++i) x(i, 2) = carry_in[static_cast<std::size_t>(i)];
  return x;
}

std::map<std::string, TaskDataset> addition_splits(int base, Index n_digits,
                                                   std::uint64_t seed,
                                                   const SplitSizes& sizes) {
  const std::array<std::pair<const char*, Index>, 5> plan = {{
      {"train_pre", sizes.train_pre},
      {"val_pre", sizes.val_pre},
      {"train_ft", sizes.train_ft},
      {"val_ft", sizes.val_ft},
      {"test", sizes.test},
  }};
  std::map<std::string, TaskDataset> out;
  Index offset = 0;
  for (const auto& [name, size] : plan) {
    if (size > 0) {
      auto d = gen_addition(base, n_digits, size, seed, offset);
      d.meta.split = name;
      out.emplace(name, std::move(d));
    }
    offset += size;
  }
  return out;
}

std::vector<Index> ood_digit_lengths(int base) {
  if (base == 2) return {10, 20, 50};
  return {10, 25, 50};
}

TaskDataset gen_first_last_xor(Index timesteps, Index n_samples,
                               std::uint64_t seed, bool one_hot_input) {
  check(timesteps >= 2, "first-last XOR needs T >= 2");
  check(n_samples >= 1, "sample count must be positive");
  TaskDataset d;
  d.meta = {TaskKind::kFirstLastXor, 2, 0, timesteps, seed, "", one_hot_input};
  d.labels.assign(static_cast<std::size_t>(n_samples), 0);
  std::fill(d.labels.begin(), d.labels.begin() + n_samples / 2, 1);
  Rng order(derive_seed(seed, tag_of("xor-labels")));
  std::shuffle(d.labels.begin(), d.labels.end(), order);

  const Index dim = one_hot_input ? 2 : 1;
  for (Index t = 0; t < timesteps; ++t) d.inputs.emplace_back(RealMatrix::Zero(n_samples, dim));
  d.targets.resize(n_samples, 1);
  for (Index i = 0; i < n_samples; ++i) {
    Rng rng(derive_seed(seed, tag_of("xor"), i));
    std::vector<int> bits(static_cast<std::size_t>(timesteps));
    for (auto& b : bits) b = static_cast<int>(rng() & 1u);
    const int label = d.labels[static_cast<std::size_t>(i)];
    bits.back() = bits.front() ^ label;
    for (Index t = 0; t < timesteps; ++t) {
      const int b = bits[static_cast<std::size_t>(t)];
      if (one_hot_input) {
        d.inputs[static_cast<std::size_t>(t)](i, b) = 1.0;
      } else {
        d.inputs[static_cast<std::size_t>(t)](i, 0) = b;
      }
    }
    d.targets(i, 0) = label ? 1.0 : -1.0;
  }
  return d;
}

IdxArray read_idx(const std::filesystem::path& path) {
  const auto bytes = read_all_gz(path);
  check(bytes.size() >= 4, "corrupt IDX file");
  check(bytes[0] == 0 && bytes[1] == 0 && bytes[2] == 0x08 && bytes[3] >= 1,
        "corrupt IDX file");
  const std::size_t nd = bytes[3];
  check(bytes.size() >= 4 + 4 * nd, "corrupt IDX file");
  IdxArray a;
  std::size_t count = 1;
  for (std::size_t k = 0; k < nd; ++k) {
    a.dims.push_back(read_be32(bytes.data() + 4 + 4 * k));
    count *= a.dims.back();
  }
  check(bytes.size() == 4 + 4 * nd + count, "corrupt IDX file");
  a.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(4 + 4 * nd), bytes.end());
  return a;
}

void write_idx(const IdxArray& array, const std::filesystem::path& path,
               bool gzip) {
  check(!array.dims.empty() && array.dims.size() < 256, "bad IDX dims");
  std::vector<std::uint8_t> bytes = {0, 0, 0x08,
                                     static_cast<std::uint8_t>(array.dims.size())};
  for (auto d : array.dims) put_be32(bytes, d);
  bytes.insert(bytes.end(), array.data.begin(), array.data.end());
  if (gzip) {
    gzFile f = gzopen(path.string().c_str(), "wb");
    check(f != nullptr, "cannot write " + path.string());
    const int put = gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
    gzclose(f);
    check(put == static_cast<int>(bytes.size()), "cannot write " + path.string());
  } else {
    std::ofstream out(path, std::ios::binary);
    check(static_cast<bool>(out), "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  }
}

TaskDataset load_mnist_seq(const std::filesystem::path& images,
                           const std::filesystem::path& labels,
                           Index timesteps, Index n_samples, Index offset) {
  check(timesteps >= 1 && kMnistPixels % timesteps == 0, "T must divide 784");
  const IdxArray img = read_idx(images);
  const IdxArray lab = read_idx(labels);
  check(img.dims.size() == 3 && img.dims[1] == 28 && img.dims[2] == 28,
        "corrupt IDX file");
  check(lab.dims.size() == 1 && lab.dims[0] == img.dims[0], "corrupt IDX file");
  const Index total = img.dims[0];
  check(offset >= 0 && offset <= total, "sample offset out of range");
  const Index n = n_samples == 0 ? total - offset : n_samples;
  check(offset + n <= total, "not enough images");
  const Index width = kMnistPixels / timesteps;

  TaskDataset d;
  d.meta = {TaskKind::kMnist, 10, 0, timesteps, 0, "", false};
  for (Index t = 0; t < timesteps; ++t) d.inputs.emplace_back(n, width);
  d.targets = RealMatrix::Zero(n, 10);
  d.labels.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const std::uint8_t* px = img.data.data() + (offset + i) * kMnistPixels;
    for (Index p = 0; p < kMnistPixels; ++p) {
      // float-representable so the float32 cache round-trips exactly
      d.inputs[static_cast<std::size_t>(p / width)](i, p % width) =
          static_cast<float>(px[p] / 255.0);
    }
    const int label = lab.data[static_cast<std::size_t>(offset + i)];
    check(label < 10, "corrupt IDX file");
    d.labels[static_cast<std::size_t>(i)] = label;
    d.targets(i, label) = 1.0;
  }
  return d;
}

std::vector<std::uint8_t> mnist_image_bytes(const TaskDataset& data,
                                            Index sample) {
  std::vector<std::uint8_t> out;
  out.reserve(kMnistPixels);
  for (const auto& x : data.inputs) {
    for (Index c = 0; c < x.cols(); ++c) {
      out.push_back(static_cast<std::uint8_t>(std::lround(x(sample, c) * 255.0)));
    }
  }
  return out;
}

RealVector ramp_weights(Index timesteps) {
  check(timesteps >= 1, "timesteps must be positive");
  RealVector w = RealVector::Ones(timesteps);
  if (timesteps == 1) return w;
  for (Index t = 0; t < timesteps; ++t) {
    w[t] = 0.5 + static_cast<double>(t) / static_cast<double>(timesteps - 1);
  }
  return w;
}

LossSpec joint_loss_spec(int base, double lambda_sum, double lambda_carry,
                         Index timesteps, Index n, bool ramp, LossKind kind) {
  check(lambda_sum >= 0.0 && lambda_carry >= 0.0, "loss weights must be nonnegative");
  LossSpec spec;
  spec.heads = {{0, base, kind, lambda_sum}, {base, base + 2, kind, lambda_carry}};
  if (ramp) {
    const RealVector w = ramp_weights(timesteps);
    spec.row_weights.resize(n * timesteps);
    for (Index t = 0; t < timesteps; ++t) spec.row_weights.segment(t * n, n).setConstant(w[t]);
  }
  return spec;
}

const std::vector<double>& lambda_carry_grid() {
  static const std::vector<double> g = {0.125, 0.25, 0.5, 0.75, 1.0, 1.25,
                                        1.5,   2.0,  4.0, 6.0,  8.0, 10.0};
  return g;
}

const std::vector<double>& reg_grid() {
  static const std::vector<double> g = {1e-2, 1e-1, 0.5, 1.0, 5.0, 10.0};
  return g;
}

const std::vector<double>& sg_lr_grid() {
  static const std::vector<double> g = {1e-3, 5e-3, 1e-2, 1e-1};
  return g;
}

void save_dataset(const TaskDataset& data, const std::filesystem::path& path) {
  nlohmann::json h;
  h["meta"] = meta_to_json(data.meta);
  h["n"] = data.n();
  h["input_dim"] = data.input_dim();
  h["t"] = data.inputs.size();
  h["targets"] = {data.targets.rows(), data.targets.cols()};
  h["a_digits"] = {data.a_digits.rows(), data.a_digits.cols()};
  h["sum_digits"] = {data.sum_digits.rows(), data.sum_digits.cols()};
  h["labels"] = data.labels.size();
  const std::string header = h.dump();

  std::ofstream out(path, std::ios::binary);
  check(static_cast<bool>(out), "cannot write " + path.string());
  out.write(kCacheMagic, sizeof(kCacheMagic));
  put_le<std::uint64_t>(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& x : data.inputs) put_matrix(out, x);
  put_matrix(out, data.targets);
  put_matrix(out, data.a_digits);
  put_matrix(out, data.b_digits);
  put_matrix(out, data.sum_digits);
  put_matrix(out, data.carry_out);
  for (int l : data.labels) put_f32(out, l);
  check(static_cast<bool>(out), "cannot write " + path.string());
}

TaskDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  check(static_cast<bool>(in), "cannot read " + path.string());
  char magic[8];
  in.read(magic, 8);
  check(in && std::memcmp(magic, kCacheMagic, 8) == 0, "not a dataset cache");
  const auto len = get_le<std::uint64_t>(in);
  check(len < (1u << 20), "corrupt dataset cache");
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  const auto h = nlohmann::json::parse(header);
  TaskDataset d;
  d.meta = meta_from_json(h.at("meta"));
  const Index n = h.at("n").get<Index>();
  const Index dim = h.at("input_dim").get<Index>();
  const Index t_count = h.at("t").get<Index>();
  d.inputs.resize(static_cast<std::size_t>(t_count));
  for (auto& x : d.inputs) get_matrix(in, x, n, dim);
  get_matrix(in, d.targets, h["targets"][0].get<Index>(), h["targets"][1].get<Index>());
  const Index ar = h["a_digits"][0].get<Index>();
  const Index ac = h["a_digits"][1].get<Index>();
  const Index sr = h["sum_digits"][0].get<Index>();
  const Index sc = h["sum_digits"][1].get<Index>();
  get_matrix(in, d.a_digits, ar, ac);
  get_matrix(in, d.b_digits, ar, ac);
  get_matrix(in, d.sum_digits, sr, sc);
  get_matrix(in, d.carry_out, sr, sc);
  d.labels.resize(h.at("labels").get<std::size_t>());
  for (auto& l : d.labels) l = static_cast<int>(get_f32(in));
  return d;
}

}  // namespace csnn
