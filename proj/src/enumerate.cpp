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


#include "csnn/enumerate.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <boost/multiprecision/gmp.hpp>

namespace csnn {

namespace {

using Q = boost::multiprecision::mpq_rational;
using QVec = std::vector<Q>;

[[noreturn]] void out_of_budget() { fail("exact enumeration out of budget"); }

Q dot(const QVec& a, const QVec& b) {
  Q s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Q qabs(const Q& x) { return x < 0 ? Q(-x) : x; }

QVec axpy(const QVec& p, const Q& scale, const QVec& n) {
  QVec out = p;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += scale * n[i];
  return out;
}

QVec to_q(const RealMatrix& m, Index row) {
  QVec v(static_cast<std::size_t>(m.cols()));
  for (Index k = 0; k < m.cols(); ++k) v[k] = Q(m(row, k));
  return v;
}

// ---------------------------------------------------------------------------
// Central arrangement {u : z_i . u = 0}.

struct Flat {
  std::vector<QVec> basis;
  std::vector<int> vanishing;  // rows whose hyperplane contains the flat
};

class CentralArrangement {
 public:
  explicit CentralArrangement(std::vector<QVec> rows, int d)
      : rows_(std::move(rows)), d_(d) {}

  std::set<Pattern> patterns() {
    std::vector<QVec> identity(d_, QVec(d_, Q(0)));
    for (int i = 0; i < d_; ++i) identity[i][i] = 1;
    const int top = intern(std::move(identity));
    points(top);
    std::set<Pattern> out;
    for (const auto& [id, pts] : memo_) {
      for (const auto& [pattern, u] : pts) out.insert(pattern);
    }
    return out;
  }

 private:
  Pattern pattern_at(const QVec& u) const {
    Pattern p(rows_.size());
    for (std::size_t i = 0; i < rows_.size(); ++i) p[i] = dot(rows_[i], u) >= 0;
    return p;
  }

  int intern(std::vector<QVec> basis) {
    std::vector<int> vanishing;
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      bool all_zero = true;
      for (const auto& b : basis) all_zero = all_zero && dot(rows_[r], b) == 0;
      if (all_zero) vanishing.push_back(static_cast<int>(r));
    }
    auto it = ids_.find(vanishing);
    if (it != ids_.end()) return it->second;
    const int id = static_cast<int>(flats_.size());
    ids_.emplace(vanishing, id);
    flats_.push_back({std::move(basis), std::move(vanishing)});
    return id;
  }

  // One exact point per open cell of the arrangement restricted to the flat,
  // keyed by its pattern. Cells of a k-flat are reached from points of its
  // (k-1)-subflats nudged off their hyperplane inside the flat.
  const std::map<Pattern, QVec>& points(int id) {
    if (auto it = memo_.find(id); it != memo_.end()) return it->second;
    const Flat flat = flats_[id];
    std::map<Pattern, QVec> result;
    if (flat.basis.empty()) {
      const QVec zero(d_, Q(0));
      result.emplace(pattern_at(zero), zero);
      return memo_[id] = std::move(result);
    }
    std::vector<int> restricted;
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      if (!std::binary_search(flat.vanishing.begin(), flat.vanishing.end(),
                              static_cast<int>(r))) {
        restricted.push_back(static_cast<int>(r));
      }
    }
    if (restricted.empty()) {
      result.emplace(pattern_at(flat.basis.front()), flat.basis.front());
      return memo_[id] = std::move(result);
    }
    for (int j : restricted) {
      const QVec& z = rows_[j];
      std::vector<Q> c(flat.basis.size());
      std::size_t pivot = flat.basis.size();
      for (std::size_t i = 0; i < flat.basis.size(); ++i) {
        c[i] = dot(z, flat.basis[i]);
        if (pivot == flat.basis.size() && c[i] != 0) pivot = i;
      }
      std::vector<QVec> sub;
      for (std::size_t i = 0; i < flat.basis.size(); ++i) {
        if (i == pivot) continue;
        sub.push_back(axpy(flat.basis[i], -c[i] / c[pivot], flat.basis[pivot]));
      }
      const QVec& normal = flat.basis[pivot];
      const int child = intern(std::move(sub));
      const auto child_points = points(child);
      for (const auto& [pattern, p] : child_points) {
        Q eps = 1;
        for (const auto& row : rows_) {
          const Q num = dot(row, p);
          const Q den = dot(row, normal);
          if (num != 0 && den != 0) eps = std::min(eps, Q(qabs(num) / qabs(den)));
        }
        eps /= 2;
        for (int sign : {1, -1}) {
          QVec u = axpy(p, eps * sign, normal);
          result.emplace(pattern_at(u), std::move(u));
        }
      }
    }
    return memo_[id] = std::move(result);
  }

  std::vector<QVec> rows_;
  int d_;
  std::vector<Flat> flats_;
  std::map<std::vector<int>, int> ids_;
  std::map<int, std::map<Pattern, QVec>> memo_;
};

// ---------------------------------------------------------------------------
// Affine arrangement {p : a . p = b} in one or two dimensions.

struct Line {
  QVec a;
  Q b;
  friend bool operator<(const Line& x, const Line& y) {
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  }
  friend bool operator==(const Line& x, const Line& y) {
    return x.a == y.a && x.b == y.b;
  }
};

// One exact point on every face (vertices, edges, cells).
std::vector<QVec> affine_face_points(std::vector<Line> lines, int q) {
  std::vector<Line> clean;
  for (auto& line : lines) {
    auto nz = std::find_if(line.a.begin(), line.a.end(),
                           [](const Q& v) { return v != 0; });
    if (nz == line.a.end()) continue;
    const Q lead = *nz;
    for (auto& v : line.a) v /= lead;
    line.b /= lead;
    clean.push_back(std::move(line));
  }
  std::sort(clean.begin(), clean.end());
  clean.erase(std::unique(clean.begin(), clean.end()), clean.end());
  std::vector<QVec> pts;
  if (clean.empty()) return {QVec(q, Q(0))};

  if (q == 1) {
    std::vector<Q> xs;
    for (const auto& l : clean) xs.push_back(l.b);  // a == 1 after scaling
    std::sort(xs.begin(), xs.end());
    pts.push_back({xs.front() - 1});
    for (std::size_t i = 0; i < xs.size(); ++i) {
      pts.push_back({xs[i]});
      if (i + 1 < xs.size()) pts.push_back({(xs[i] + xs[i + 1]) / 2});
    }
    pts.push_back({xs.back() + 1});
    return pts;
  }

  const std::size_t count = clean.size();
  std::vector<QVec> base(count), dir(count);
  std::vector<Q> dir_norm(count);
  for (std::size_t k = 0; k < count; ++k) {
    const auto& a = clean[k].a;
    const Q norm2 = dot(a, a);
    base[k] = {a[0] * clean[k].b / norm2, a[1] * clean[k].b / norm2};
    dir[k] = {-a[1], a[0]};
    dir_norm[k] = norm2;
  }
  std::vector<std::vector<Q>> params(count);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = i + 1; j < count; ++j) {
      const auto& ai = clean[i].a;
      const auto& aj = clean[j].a;
      const Q det = ai[0] * aj[1] - ai[1] * aj[0];
      if (det == 0) continue;
      QVec v{(clean[i].b * aj[1] - ai[1] * clean[j].b) / det,
             (ai[0] * clean[j].b - clean[i].b * aj[0]) / det};
      for (std::size_t k : {i, j}) {
        QVec rel{v[0] - base[k][0], v[1] - base[k][1]};
        params[k].push_back(dot(rel, dir[k]) / dir_norm[k]);
      }
      pts.push_back(std::move(v));
    }
  }
  for (std::size_t k = 0; k < count; ++k) {
    auto& s = params[k];
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    std::vector<Q> edge;
    if (s.empty()) {
      edge.push_back(0);
    } else {
      edge.push_back(s.front() - 1);
      for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        edge.push_back((s[i] + s[i + 1]) / 2);
      }
      edge.push_back(s.back() + 1);
    }
    const QVec& normal = clean[k].a;
    for (const Q& t : edge) {
      QVec e = axpy(base[k], t, dir[k]);
      Q eps = 1;
      for (std::size_t j = 0; j < count; ++j) {
        if (j == k) continue;
        const Q an = dot(clean[j].a, normal);
        if (an == 0) continue;
        eps = std::min(eps, Q(qabs(dot(clean[j].a, e) - clean[j].b) / qabs(an)));
      }
      eps /= 2;
      pts.push_back(axpy(e, eps, normal));
      pts.push_back(axpy(e, -eps, normal));
      pts.push_back(std::move(e));
    }
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

// ---------------------------------------------------------------------------
// Single-neuron trajectories.

struct NeuronPoint {
  RealVector p;
  double leak = 0.0;
  double thr = 0.0;
};

// Trajectory bits, row t * n + i.
Pattern rollout_bits(std::span<const RealMatrix> xs, const RealVector& p,
                     double leak, double thr) {
  const Index n = xs.front().rows();
  const Index q = p.size();
  RealMatrix p_in(q, 1);
  p_in.col(0) = p;
  const RealVector b = RealVector::Constant(1, leak);
  const RealVector r = RealVector::Constant(1, thr);
  RealMatrix u = RealMatrix::Zero(n, 1);
  ByteMatrix s = ByteMatrix::Zero(n, 1);
  Pattern bits;
  bits.reserve(static_cast<std::size_t>(n * xs.size()));
  for (const auto& x : xs) {
    check(kernels::lif_step(x, p_in, b, r, u, s, kernels::Exec::kSerial),
          "membrane overflow");
    for (Index i = 0; i < n; ++i) bits.push_back(s(i, 0));
  }
  return bits;
}

Pattern exact_rollout_bits(const std::vector<std::vector<QVec>>& xq,
                           const QVec& p, const Q& leak, const Q& thr) {
  const std::size_t n = xq.front().size();
  std::vector<Q> u(n, Q(0));
  std::vector<std::uint8_t> s(n, 0);
  Pattern bits;
  for (const auto& x : xq) {
    for (std::size_t i = 0; i < n; ++i) {
      u[i] = dot(x[i], p) + leak * u[i] - (s[i] ? thr : Q(0));
      s[i] = u[i] >= 0;
      bits.push_back(s[i]);
    }
  }
  return bits;
}

class NeuronEnumerator {
 public:
  NeuronEnumerator(Index budget) : budget_(budget) {}

  // Adds every trajectory realizable with this (leak, threshold) to `out`
  // (first witness point kept).
  void run(std::span<const RealMatrix> xs, double leak, double thr,
           std::map<Pattern, NeuronPoint>& out) {
    const Index n = xs.front().rows();
    const int q = static_cast<int>(xs.front().cols());
    std::vector<std::vector<QVec>> xq;
    for (const auto& x : xs) {
      std::vector<QVec> rows;
      for (Index i = 0; i < n; ++i) rows.push_back(to_q(x, i));
      xq.push_back(std::move(rows));
    }
    const Q b(leak), r(thr);
    std::vector<Line> lines;
    std::vector<QVec> drive(n, QVec(q, Q(0)));
    std::vector<Q> offsets{0};
    for (std::size_t t = 0; t < xq.size(); ++t) {
      if (t > 0) {
        std::vector<Q> next;
        for (const Q& o : offsets) {
          next.push_back(b * o);
          next.push_back(b * o + r);
        }
        std::sort(next.begin(), next.end());
        next.erase(std::unique(next.begin(), next.end()), next.end());
        offsets = std::move(next);
      }
      for (Index i = 0; i < n; ++i) {
        for (int k = 0; k < q; ++k) drive[i][k] = b * drive[i][k] + xq[t][i][k];
        for (const Q& o : offsets) lines.push_back({drive[i], o});
      }
    }
    const auto pts = affine_face_points(std::move(lines), q);
    work_ += static_cast<Index>(pts.size());
    if (work_ > budget_) out_of_budget();
    for (const auto& pq : pts) {
      RealVector p(q);
      for (int k = 0; k < q; ++k) p[k] = pq[k].convert_to<double>();
      Pattern bits = rollout_bits(xs, p, leak, thr);
      if (bits != exact_rollout_bits(xq, pq, b, r)) ++inexact_;
      out.emplace(std::move(bits), NeuronPoint{p, leak, thr});
    }
  }

  Index inexact() const { return inexact_; }

 private:
  Index budget_;
  Index work_ = 0;
  Index inexact_ = 0;
};

LifLayerParams replicated_layer(const std::vector<NeuronPoint>& sources,
                                Index width_prev) {
  LifLayerParams layer;
  const Index m = static_cast<Index>(sources.size());
  layer.p_in.resize(width_prev, m);
  layer.leak.resize(m);
  layer.u_thr.resize(m);
  layer.u_init = RealVector::Zero(m);
  for (Index j = 0; j < m; ++j) {
    layer.p_in.col(j) = sources[j].p;
    layer.leak[j] = sources[j].leak;
    layer.u_thr[j] = sources[j].thr;
  }
  return layer;
}

Pattern final_slice(const Pattern& traj, Index n) {
  return Pattern(traj.end() - n, traj.end());
}

}  // namespace

std::vector<Pattern> exact_enumerate_arrangement(const RealMatrix& z,
                                                 Index n_max) {
  if (z.rows() > n_max || z.cols() > 3 || z.cols() < 1) out_of_budget();
  check(all_finite(z), "non-finite pre-activation");
  std::vector<QVec> rows;
  for (Index i = 0; i < z.rows(); ++i) rows.push_back(to_q(z, i));
  CentralArrangement arrangement(std::move(rows), static_cast<int>(z.cols()));
  const auto set = arrangement.patterns();
  return {set.begin(), set.end()};
}

EnumeratedDictionary exact_enumerate_snn_dictionary(
    const WitnessArch& arch, std::span<const RealMatrix> inputs,
    const SnnGrid& grid, const MicroLimits& limits) {
  arch.validate();
  check(static_cast<Index>(inputs.size()) == arch.timesteps,
        "input length does not match the architecture");
  const Index n = inputs.front().rows();
  if (n > limits.n_max || arch.timesteps > limits.t_max ||
      arch.depth() > limits.depth_max || arch.depth() < 2 ||
      arch.input_dim > limits.input_dim_max) {
    out_of_budget();
  }
  for (Index m : arch.widths) {
    if (m > limits.width_max) out_of_budget();
  }
  check(!grid.leaks.empty() && !grid.thresholds.empty(), "empty witness grid");
  for (double b : grid.leaks) check(b >= 0.0 && b < 1.0, "leak out of [0,1)");

  NeuronEnumerator enumerator(limits.work_budget);
  std::map<Pattern, NeuronPoint> first;
  for (double b : grid.leaks) {
    for (double r : grid.thresholds) enumerator.run(inputs, b, r, first);
  }

  EnumeratedDictionary result;
  result.first_layer_trajectories = static_cast<Index>(first.size());
  WitnessStore& store = result.store;
  store.arch = arch;
  std::set<Pattern> seen_final;
  auto add = [&](LifWitness w) {
    store.provenance.push_back(
        {WitnessSource::kEnumerated, 0, store.size(), "", 0});
    store.witnesses.push_back(std::move(w));
  };

  if (arch.depth() == 2) {
    const Index m = arch.widths[0];
    for (const auto& [traj, point] : first) {
      if (!seen_final.insert(final_slice(traj, n)).second) continue;
      add(LifWitness{{replicated_layer(
          std::vector<NeuronPoint>(static_cast<std::size_t>(m), point),
          arch.input_dim)}});
    }
  } else {
    const Index m1 = arch.widths[0];
    const Index m2 = arch.widths[1];
    std::vector<const std::pair<const Pattern, NeuronPoint>*> pool;
    for (const auto& entry : first) pool.push_back(&entry);
    // Tuples of first-layer neurons (with replacement, order irrelevant for
    // the second layer since its input weights are free).
    std::vector<std::vector<std::size_t>> tuples;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (m1 == 1) {
        tuples.push_back({i});
        continue;
      }
      for (std::size_t j = i; j < pool.size(); ++j) tuples.push_back({i, j});
    }
    std::set<Pattern> seen_inputs;
    for (const auto& tuple : tuples) {
      std::vector<RealMatrix> xs2(inputs.size(), RealMatrix(n, m1));
      Pattern key;
      for (std::size_t t = 0; t < inputs.size(); ++t) {
        for (Index i = 0; i < n; ++i) {
          for (Index k = 0; k < m1; ++k) {
            const auto bit =
                pool[tuple[static_cast<std::size_t>(k)]]->first[t * n + i];
            xs2[t](i, k) = bit;
            key.push_back(bit);
          }
        }
      }
      if (!seen_inputs.insert(key).second) continue;
      std::map<Pattern, NeuronPoint> second;
      for (double b : grid.leaks) {
        for (double r : grid.thresholds) enumerator.run(xs2, b, r, second);
      }
      std::vector<NeuronPoint> layer1;
      for (std::size_t k : tuple) layer1.push_back(pool[k]->second);
      for (const auto& [traj, point] : second) {
        if (!seen_final.insert(final_slice(traj, n)).second) continue;
        add(LifWitness{
            {replicated_layer(layer1, arch.input_dim),
             replicated_layer(std::vector<NeuronPoint>(
                                  static_cast<std::size_t>(m2), point),
                              m1)}});
      }
    }
  }
  result.inexact_points = enumerator.inexact();
  result.dictionary = build_sampled_dictionary(store, inputs);
  return result;
}

}  // namespace csnn
