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


#include "csnn/dictionary.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_map>

namespace csnn {

namespace {

constexpr char kMagic[8] = {'S', 'N', 'N', 'D', 'I', 'C', 'T', '1'};

std::vector<std::uint64_t> pack_neuron(std::span<const ByteMatrix> spikes,
                                       Index neuron, bool stacked) {
  const Index n = spikes.front().rows();
  const Index t_count = static_cast<Index>(spikes.size());
  const Index rows = stacked ? n * t_count : n;
  std::vector<std::uint64_t> words(static_cast<std::size_t>(words_for_rows(rows)), 0);
  const Index t_first = stacked ? 0 : t_count - 1;
  for (Index t = t_first; t < t_count; ++t) {
    const Index offset = stacked ? t * n : 0;
    for (Index i = 0; i < n; ++i) {
      if (spikes[t](i, neuron)) {
        const Index r = offset + i;
        words[r / 64] |= std::uint64_t{1} << (r % 64);
      }
    }
  }
  return words;
}

SpikeDictionary build(const WitnessStore& store,
                      std::span<const RealMatrix> inputs, bool stacked,
                      kernels::Exec exec) {
  check(!store.witnesses.empty(), "no witnesses");
  check(!inputs.empty(), "rollout needs at least one timestep");
  const Index n = inputs.front().rows();
  const Index t_count = static_cast<Index>(inputs.size());
  const Index m = store.witnesses.front().output_width();
  for (const auto& w : store.witnesses) {
    check(w.output_width() == m, "witnesses disagree on the final width");
  }
  const Index rows = stacked ? n * t_count : n;
  const Index words = words_for_rows(rows);
  const Index count = store.size();

  // Candidate generation is parallel over witnesses; each rollout is serial.
  std::vector<std::vector<std::uint64_t>> candidates(
      static_cast<std::size_t>(count));
  auto generate = [&](Index w) {
    const auto spikes =
        lif_output_spikes(store.witnesses[w], inputs, kernels::Exec::kSerial);
    auto& block = candidates[w];
    block.reserve(static_cast<std::size_t>(m * words));
    for (Index j = 0; j < m; ++j) {
      const auto col = pack_neuron(spikes, j, stacked);
      block.insert(block.end(), col.begin(), col.end());
    }
  };
  if (exec == kernels::Exec::kParallel) {
#pragma omp parallel for schedule(dynamic)
    for (Index w = 0; w < count; ++w) generate(w);
  } else {
    for (Index w = 0; w < count; ++w) generate(w);
  }

  SpikeDictionary dict;
  dict.columns = BitColumns(rows, 0);
  dict.n = n;
  dict.timesteps = t_count;
  dict.m_last = m;
  dict.stacked = stacked;
  // Merge in (witness, neuron) order so the first occurrence is the
  // representative. Hash buckets hold column indices; equality is exact.
  std::unordered_map<std::uint64_t, std::vector<Index>> buckets;
  for (Index w = 0; w < count; ++w) {
    for (Index j = 0; j < m; ++j) {
      std::span<const std::uint64_t> col(
          candidates[w].data() + j * words, static_cast<std::size_t>(words));
      std::uint64_t h = 0x243f6a8885a308d3ULL;
      for (std::uint64_t word : col) h = mix64(h ^ word);
      auto& bucket = buckets[h];
      bool seen = false;
      for (Index c : bucket) {
        const auto existing = dict.columns.column(c);
        if (std::equal(existing.begin(), existing.end(), col.begin())) {
          seen = true;
          break;
        }
      }
      if (seen) continue;
      bucket.push_back(dict.columns.cols());
      dict.columns.append_column(col);
      dict.witness_of.push_back({w, j});
    }
    std::vector<std::uint64_t>().swap(candidates[w]);
  }
  return dict;
}

template <typename T>
void write_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<unsigned char>(
        (static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff);
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  check(in.good(), "truncated dictionary file");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  }
  return static_cast<T>(v);
}

std::uint32_t to_u32(Index v) {
  check(v >= 0 && v <= static_cast<Index>(UINT32_MAX),
        "dictionary dimension exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::vector<std::uint64_t> witness_column(const LifWitness& witness,
                                          Index neuron,
                                          std::span<const RealMatrix> inputs,
                                          bool stacked) {
  const auto spikes =
      lif_output_spikes(witness, inputs, kernels::Exec::kSerial);
  check(neuron >= 0 && neuron < witness.output_width(),
        "neuron index out of range");
  return pack_neuron(spikes, neuron, stacked);
}

SpikeDictionary build_sampled_dictionary(const WitnessStore& store,
                                         std::span<const RealMatrix> inputs,
                                         kernels::Exec exec) {
  return build(store, inputs, false, exec);
}

TrajectoryDictionary build_trajectory_dictionary(
    const WitnessStore& store, std::span<const RealMatrix> inputs,
    kernels::Exec exec) {
  return build(store, inputs, true, exec);
}

bool verify_witnessed(const SpikeDictionary& dict, const WitnessStore& store,
                      std::span<const RealMatrix> inputs) {
  if (static_cast<Index>(dict.witness_of.size()) != dict.size()) return false;
  for (Index c = 0; c < dict.size(); ++c) {
    const auto ref = dict.witness_of[c];
    if (ref.witness < 0 || ref.witness >= store.size()) return false;
    const auto col = witness_column(store.witnesses[ref.witness], ref.neuron,
                                    inputs, dict.stacked);
    const auto stored = dict.columns.column(c);
    if (!std::equal(stored.begin(), stored.end(), col.begin(), col.end())) {
      return false;
    }
  }
  return true;
}

void save_dictionary(const SpikeDictionary& dict,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_le<std::uint32_t>(out, to_u32(dict.n));
  write_le<std::uint32_t>(out, to_u32(dict.size()));
  write_le<std::uint32_t>(out, to_u32(dict.timesteps));
  write_le<std::uint32_t>(out, to_u32(dict.m_last));
  for (std::uint64_t w : dict.columns.data()) write_le<std::uint64_t>(out, w);
  nlohmann::json trailer;
  trailer["stacked"] = dict.stacked;
  nlohmann::json map = nlohmann::json::array();
  for (const auto& ref : dict.witness_of) map.push_back({ref.witness, ref.neuron});
  trailer["witness_of"] = map;
  const std::string text = trailer.dump();
  write_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  check(out.good(), "cannot write " + path.string());
}

SpikeDictionary load_dictionary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "cannot read " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  check(in.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
        "not a spike dictionary file");
  SpikeDictionary dict;
  dict.n = read_le<std::uint32_t>(in);
  const Index p = read_le<std::uint32_t>(in);
  dict.timesteps = read_le<std::uint32_t>(in);
  dict.m_last = read_le<std::uint32_t>(in);
  const std::string rest((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  // The header does not carry the row count; the payload length tells a
  // final-time dictionary (n rows) from a stacked one (nT rows).
  for (bool stacked : {false, true}) {
    const Index rows = stacked ? dict.n * dict.timesteps : dict.n;
    const std::size_t payload =
        static_cast<std::size_t>(words_for_rows(rows) * p) * 8;
    if (payload + 8 > rest.size()) continue;
    std::uint64_t len = 0;
    for (int i = 0; i < 8; ++i) {
      len |= static_cast<std::uint64_t>(
                 static_cast<unsigned char>(rest[payload + i]))
             << (8 * i);
    }
    if (payload + 8 + len != rest.size()) continue;
    nlohmann::json trailer;
    try {
      trailer = nlohmann::json::parse(rest.substr(payload + 8));
    } catch (const nlohmann::json::exception&) {
      continue;
    }
    if (trailer.at("stacked").get<bool>() != stacked) continue;
    dict.stacked = stacked;
    dict.columns = BitColumns(rows, p);
    auto& words = dict.columns.mutable_data();
    for (std::size_t w = 0; w < words.size(); ++w) {
      std::uint64_t v = 0;
      for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(
                 static_cast<unsigned char>(rest[w * 8 + i]))
             << (8 * i);
      }
      words[w] = v;
    }
    for (const auto& e : trailer.at("witness_of")) {
      dict.witness_of.push_back({e.at(0).get<Index>(), e.at(1).get<Index>()});
    }
    check(static_cast<Index>(dict.witness_of.size()) == p,
          "corrupt dictionary trailer");
    return dict;
  }
  fail("corrupt dictionary file");
}

}  // namespace csnn
