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


#include "csnn/witness.hpp"

#include <cmath>
#include <fstream>
#include <random>

namespace csnn {

namespace {

constexpr int kStoreFormat = 1;

const char* source_name(WitnessSource s) {
  switch (s) {
    case WitnessSource::kGaussian:
      return "gaussian";
    case WitnessSource::kPretrained:
      return "pretrained";
    case WitnessSource::kEnumerated:
      return "enumerated";
  }
  return "gaussian";
}

WitnessSource source_from_name(const std::string& s) {
  if (s == "gaussian") return WitnessSource::kGaussian;
  if (s == "pretrained") return WitnessSource::kPretrained;
  if (s == "enumerated") return WitnessSource::kEnumerated;
  fail("unknown witness provenance '" + s + "'");
}

void check_leak_spec(const LeakSpec& leak) {
  if (leak.mode == LeakMode::kFixed) {
    check(leak.value >= 0.0 && leak.value < 1.0, "leak out of [0,1)");
  } else {
    check(leak.lo >= 0.0 && leak.hi <= 1.0 && leak.lo < leak.hi,
          "leak out of [0,1)");
  }
}

}  // namespace

void WitnessArch::validate() const {
  check(input_dim > 0, "architecture needs a positive input dimension");
  check(!widths.empty(), "architecture needs at least one hidden layer");
  for (Index m : widths) check(m > 0, "hidden widths must be positive");
  check(timesteps > 0, "architecture needs at least one timestep");
}

bool WitnessArch::matches(const LifWitness& w) const {
  if (w.layers.size() != widths.size()) return false;
  Index prev = input_dim;
  for (std::size_t l = 0; l < widths.size(); ++l) {
    if (w.layers[l].input_dim() != prev || w.layers[l].width() != widths[l]) {
      return false;
    }
    prev = widths[l];
  }
  return true;
}

void WitnessStore::validate() const {
  arch.validate();
  check(provenance.size() == witnesses.size(),
        "one provenance record per witness required");
  for (const auto& w : witnesses) {
    check(arch.matches(w), "witness does not match the store architecture");
    w.validate();
  }
}

LifWitness sample_gaussian_witness(const WitnessArch& arch, std::uint64_t seed,
                                   Index index, const LeakSpec& leak,
                                   const ThresholdSpec& thr) {
  check_leak_spec(leak);
  LifWitness w;
  Index prev = arch.input_dim;
  for (std::size_t l = 0; l < arch.widths.size(); ++l) {
    const Index m = arch.widths[l];
    Rng rng(derive_seed(seed, tag_of("witness"), index, l));
    std::normal_distribution<double> weight(0.0, 1.0 / std::sqrt(double(prev)));
    LifLayerParams layer;
    layer.p_in.resize(prev, m);
    for (Index i = 0; i < layer.p_in.size(); ++i) {
      layer.p_in.data()[i] = weight(rng);
    }
    layer.leak.resize(m);
    layer.u_thr.resize(m);
    layer.u_init = RealVector::Zero(m);
    std::uniform_real_distribution<double> leak_dist(leak.lo, leak.hi);
    std::normal_distribution<double> unit(0.0, 1.0);
    for (Index j = 0; j < m; ++j) {
      double b = leak.mode == LeakMode::kFixed ? leak.value : leak_dist(rng);
      // uniform_real_distribution may return hi on rounding.
      if (b >= 1.0) b = std::nextafter(1.0, 0.0);
      layer.leak[j] = b;
      layer.u_thr[j] =
          thr.mode == ThresholdMode::kFixed ? thr.value : std::abs(unit(rng));
    }
    w.layers.push_back(std::move(layer));
    prev = m;
  }
  return w;
}

WitnessStore sample_gaussian_witnesses(const WitnessArch& arch, Index count,
                                       std::uint64_t seed, const LeakSpec& leak,
                                       const ThresholdSpec& thr) {
  arch.validate();
  check(count >= 1, "witness count must be positive");
  check_leak_spec(leak);
  WitnessStore store;
  store.arch = arch;
  store.witnesses.resize(count);
  store.provenance.resize(count);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < count; ++i) {
    store.witnesses[i] = sample_gaussian_witness(arch, seed, i, leak, thr);
    store.provenance[i] = {WitnessSource::kGaussian, seed, i, "", 0};
  }
  return store;
}

WitnessStore extract_pretrained_witnesses(const WitnessArch& arch,
                                          std::span<const LifWitness> hidden,
                                          const std::string& checkpoint_id) {
  arch.validate();
  check(!hidden.empty(), "no witnesses");
  WitnessStore store;
  store.arch = arch;
  for (std::size_t k = 0; k < hidden.size(); ++k) {
    if (!arch.matches(hidden[k])) fail("incompatible checkpoint");
    store.witnesses.push_back(hidden[k]);
    store.provenance.push_back({WitnessSource::kPretrained, 0,
                                static_cast<Index>(k), checkpoint_id,
                                static_cast<Index>(k)});
  }
  return store;
}

nlohmann::json matrix_to_json(const RealMatrix& m) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["data"] = std::vector<double>(m.data(), m.data() + m.size());
  return j;
}

RealMatrix matrix_from_json(const nlohmann::json& j) {
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  check(static_cast<Index>(data.size()) == rows * cols,
        "matrix payload has the wrong length");
  RealMatrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

nlohmann::json vector_to_json(const RealVector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

RealVector vector_from_json(const nlohmann::json& j) {
  const auto data = j.get<std::vector<double>>();
  return Eigen::Map<const RealVector>(data.data(),
                                      static_cast<Index>(data.size()));
}

nlohmann::json witness_to_json(const LifWitness& w) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : w.layers) {
    layers.push_back({{"p_in", matrix_to_json(layer.p_in)},
                      {"leak", vector_to_json(layer.leak)},
                      {"u_thr", vector_to_json(layer.u_thr)},
                      {"u_init", vector_to_json(layer.u_init)}});
  }
  return {{"layers", layers}};
}

LifWitness witness_from_json(const nlohmann::json& j) {
  LifWitness w;
  for (const auto& layer : j.at("layers")) {
    w.layers.push_back({matrix_from_json(layer.at("p_in")),
                        vector_from_json(layer.at("leak")),
                        vector_from_json(layer.at("u_thr")),
                        vector_from_json(layer.at("u_init"))});
  }
  w.validate();
  return w;
}

nlohmann::json store_to_json(const WitnessStore& store) {
  nlohmann::json j;
  j["format_version"] = kStoreFormat;
  j["arch"] = {{"input_dim", store.arch.input_dim},
               {"widths", store.arch.widths},
               {"timesteps", store.arch.timesteps}};
  nlohmann::json prov = nlohmann::json::array();
  for (const auto& p : store.provenance) {
    nlohmann::json e = {{"source", source_name(p.source)}, {"index", p.index}};
    if (p.source == WitnessSource::kPretrained) {
      e["checkpoint"] = p.checkpoint;
      e["subnet"] = p.subnet;
    } else {
      e["seed"] = p.seed;
    }
    prov.push_back(e);
  }
  j["provenance"] = prov;
  nlohmann::json ws = nlohmann::json::array();
  for (const auto& w : store.witnesses) ws.push_back(witness_to_json(w));
  j["witnesses"] = ws;
  return j;
}

WitnessStore store_from_json(const nlohmann::json& j) {
  check(j.at("format_version").get<int>() == kStoreFormat,
        "unsupported witness store version");
  WitnessStore store;
  const auto& a = j.at("arch");
  store.arch.input_dim = a.at("input_dim").get<Index>();
  store.arch.widths = a.at("widths").get<std::vector<Index>>();
  store.arch.timesteps = a.at("timesteps").get<Index>();
  for (const auto& e : j.at("provenance")) {
    WitnessProvenance p;
    p.source = source_from_name(e.at("source").get<std::string>());
    p.index = e.at("index").get<Index>();
    if (p.source == WitnessSource::kPretrained) {
      p.checkpoint = e.at("checkpoint").get<std::string>();
      p.subnet = e.at("subnet").get<Index>();
    } else {
      p.seed = e.at("seed").get<std::uint64_t>();
    }
    store.provenance.push_back(std::move(p));
  }
  for (const auto& w : j.at("witnesses")) {
    store.witnesses.push_back(witness_from_json(w));
  }
  store.validate();
  return store;
}

void save_store(const WitnessStore& store, const std::filesystem::path& path) {
  std::ofstream out(path);
  check(out.good(), "cannot write " + path.string());
  out << store_to_json(store).dump();
  check(out.good(), "cannot write " + path.string());
}

WitnessStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path);
  check(in.good(), "cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail("malformed witness store: " + std::string(e.what()));
  }
  return store_from_json(j);
}

}  // namespace csnn
