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


#include "csnn/convex.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <functional>
#include <memory>

namespace csnn {

namespace {

using kernels::Exec;

constexpr int kFormatVersion = 1;
constexpr int kPowerIterations = 60;
constexpr double kObjectiveSlack = 1e-13;

double dual_norm(Penalty penalty, const RealMatrix& m, Index i) {
  return penalty == Penalty::kRowGroup ? m.row(i).norm()
                                       : m.row(i).cwiseAbs().maxCoeff();
}

void prox(Penalty penalty, RealMatrix& w, double s) {
  if (penalty == Penalty::kIndependent) {
    w = w.unaryExpr([s](double v) {
      return v > s ? v - s : (v < -s ? v + s : 0.0);
    });
    return;
  }
  for (Index i = 0; i < w.rows(); ++i) {
    const double nrm = w.row(i).norm();
    if (nrm <= s) {
      w.row(i).setZero();
    } else {
      w.row(i) *= 1.0 - s / nrm;
    }
  }
}

RealVector head_weight_per_column(const LossSpec& loss) {
  RealVector hw(loss.d_out());
  for (const auto& h : loss.heads) {
    for (Index c = h.begin; c < h.end; ++c) hw[c] = h.weight;
  }
  return hw;
}

// Smooth part f(W) = L(D W, Y), evaluated through an auxiliary linear image
// A W (the Gram product G W, or the predictions D W). Linearity of A lets the
// accelerated iteration extrapolate A W without an extra product.
class SmoothModel {
 public:
  virtual ~SmoothModel() = default;
  virtual void apply(const RealMatrix& w, RealMatrix& aw) const = 0;
  virtual double value(const RealMatrix& w, const RealMatrix& aw) const = 0;
  virtual void gradient(const RealMatrix& w, const RealMatrix& aw,
                        RealMatrix& g) const = 0;
  // Largest eigenvalue of the weighted Gram D^T Omega D.
  virtual double gram_norm() const = 0;
  // Cheap certificate from the auxiliary image; may differ from the direct
  // one by roundoff.
  virtual DualCertificate certificate(const RealMatrix& w,
                                      const RealMatrix& aw) const = 0;
};

double power_iteration(Index p, const std::function<void(const RealVector&,
                                                         RealVector&)>& op) {
  if (p == 0) return 0.0;
  RealVector v(p);
  for (Index i = 0; i < p; ++i) v[i] = 1.0 + 0.01 * static_cast<double>(i % 7);
  v.normalize();
  RealVector gv(p);
  double est = 0.0;
  for (int it = 0; it < kPowerIterations; ++it) {
    op(v, gv);
    const double nrm = gv.norm();
    if (nrm == 0.0) return 0.0;
    est = nrm;
    v = gv / nrm;
  }
  return est;
}

class GramModel final : public SmoothModel {
 public:
  GramModel(const ConvexProblem& pb, Exec exec) : pb_(pb) {
    RealVector rw = pb.loss.row_weights;
    kernels::bit_gram(pb.dictionary->columns, rw, gram_, exec);
    kernels::bit_matmul_transpose(pb.dictionary->columns, weighted_rows(pb),
                                  c_, exec);
    hw_ = head_weight_per_column(pb.loss);
    yy_ = RealVector::Zero(pb.d_out());
    for (Index r = 0; r < pb.targets.rows(); ++r) {
      const double w = pb.loss.row_weight(r);
      for (Index c = 0; c < pb.d_out(); ++c) {
        yy_[c] += w * pb.targets(r, c) * pb.targets(r, c);
      }
    }
  }

  void apply(const RealMatrix& w, RealMatrix& aw) const override {
    aw.noalias() = gram_ * w;
  }

  double value(const RealMatrix& w, const RealMatrix& aw) const override {
    double total = 0.0;
    for (Index c = 0; c < w.cols(); ++c) {
      const double quad = w.col(c).dot(aw.col(c)) - 2.0 * c_.col(c).dot(w.col(c)) + yy_[c];
      total += 0.5 * hw_[c] * quad;
    }
    return total;
  }

  void gradient(const RealMatrix&, const RealMatrix& aw,
                RealMatrix& g) const override {
    g = aw - c_;
    for (Index c = 0; c < g.cols(); ++c) g.col(c) *= hw_[c];
  }

  double gram_norm() const override {
    return power_iteration(gram_.rows(), [this](const RealVector& v,
                                                RealVector& out) {
      out.noalias() = gram_ * v;
    });
  }

  DualCertificate certificate(const RealMatrix& w,
                              const RealMatrix& aw) const override {
    DualCertificate cert;
    RealMatrix g;
    gradient(w, aw, g);
    double worst = 0.0;
    for (Index i = 0; i < g.rows(); ++i) {
      worst = std::max(worst, dual_norm(pb_.penalty, g, i));
    }
    const double tau = pb_.tau();
    cert.scale = worst > tau ? tau / worst : 1.0;
    // With residual r = D w - y and entry weights a:
    //   sum a r^2 = w'Gw - 2c'w + y'Omega y,  sum a r y = c'w - y'Omega y,
    // and L*(theta a r) = theta sum a r y + theta^2/2 sum a r^2.
    double arr = 0.0;
    double ary = 0.0;
    for (Index c = 0; c < w.cols(); ++c) {
      const double cw = c_.col(c).dot(w.col(c));
      arr += hw_[c] * (w.col(c).dot(aw.col(c)) - 2.0 * cw + yy_[c]);
      ary += hw_[c] * (cw - yy_[c]);
    }
    const double th = cert.scale;
    cert.primal = 0.5 * arr + tau * penalty_value(pb_.penalty, w);
    cert.dual = -(th * ary + 0.5 * th * th * arr);
    cert.gap = cert.primal - cert.dual;
    return cert;
  }

 private:
  static RealMatrix weighted_rows(const ConvexProblem& pb) {
    RealMatrix wy = pb.targets;
    for (Index r = 0; r < wy.rows(); ++r) wy.row(r) *= pb.loss.row_weight(r);
    return wy;
  }

  const ConvexProblem& pb_;
  RealMatrix gram_;
  RealMatrix c_;
  RealVector hw_;
  RealVector yy_;
};

class MatvecModel final : public SmoothModel {
 public:
  MatvecModel(const ConvexProblem& pb, Exec exec) : pb_(pb), exec_(exec) {}

  void apply(const RealMatrix& w, RealMatrix& aw) const override {
    kernels::bit_matmul(pb_.dictionary->columns, w, aw, exec_);
  }

  double value(const RealMatrix&, const RealMatrix& aw) const override {
    return loss_value(pb_.loss, aw, pb_.targets);
  }

  void gradient(const RealMatrix&, const RealMatrix& aw,
                RealMatrix& g) const override {
    const RealMatrix lg = loss_gradient(pb_.loss, aw, pb_.targets);
    kernels::bit_matmul_transpose(pb_.dictionary->columns, lg, g, exec_);
  }

  double gram_norm() const override {
    const auto& d = pb_.dictionary->columns;
    RealVector rw(d.rows());
    for (Index r = 0; r < d.rows(); ++r) rw[r] = pb_.loss.row_weight(r);
    return power_iteration(d.cols(), [&](const RealVector& v, RealVector& out) {
      RealMatrix dv;
      kernels::bit_matmul(d, v, dv, exec_);
      dv.col(0).array() *= rw.array();
      RealMatrix back;
      kernels::bit_matmul_transpose(d, dv, back, exec_);
      out = back.col(0);
    });
  }

  DualCertificate certificate(const RealMatrix& w,
                              const RealMatrix&) const override {
    return dual_certificate(pb_, w, exec_);
  }

 private:
  const ConvexProblem& pb_;
  Exec exec_;
};

void require_finite(double v) {
  if (!std::isfinite(v)) fail("divergence (check step size)");
}

}  // namespace

std::string penalty_name(Penalty penalty) {
  return penalty == Penalty::kRowGroup ? "row_group" : "independent";
}

Penalty penalty_from_name(const std::string& name) {
  if (name == "row_group") return Penalty::kRowGroup;
  if (name == "independent") return Penalty::kIndependent;
  fail("unknown penalty '" + name + "'");
}

double ConvexProblem::tau() const {
  return reg_beta / std::sqrt(static_cast<double>(m_last));
}

void ConvexProblem::validate() const {
  check(dictionary != nullptr && dictionary->size() > 0, "empty dictionary");
  check(std::isfinite(reg_beta) && reg_beta > 0.0, "reg_beta must be positive");
  check(m_last >= 1, "m_last must be positive");
  check(targets.rows() == dictionary->rows(),
        "targets do not match the dictionary rows");
  validate_targets(loss, targets);
}

std::string ConvexProblem::hash() const {
  Fnv1a h;
  const auto& d = dictionary->columns;
  h.update_value(d.rows());
  h.update_value(d.cols());
  h.update(d.data().data(), d.data().size() * sizeof(std::uint64_t));
  h.update_value(targets.rows());
  h.update_value(targets.cols());
  h.update(targets.data(), static_cast<std::size_t>(targets.size()) * sizeof(double));
  h.update_value(loss.row_weights.size());
  h.update(loss.row_weights.data(),
           static_cast<std::size_t>(loss.row_weights.size()) * sizeof(double));
  for (const auto& head : loss.heads) {
    h.update_value(head.begin);
    h.update_value(head.end);
    h.update_value(static_cast<int>(head.kind));
    h.update_value(head.weight);
  }
  h.update_value(reg_beta);
  h.update_value(m_last);
  h.update_value(static_cast<int>(penalty));
  return h.hex();
}

Index ConvexSolution::support() const {
  Index s = 0;
  for (Index i = 0; i < w_tilde.rows(); ++i) {
    if (!w_tilde.row(i).isZero(0.0)) ++s;
  }
  return s;
}

double penalty_value(Penalty penalty, const RealMatrix& w) {
  if (penalty == Penalty::kIndependent) return w.cwiseAbs().sum();
  double s = 0.0;
  for (Index i = 0; i < w.rows(); ++i) s += w.row(i).norm();
  return s;
}

double primal_objective(const ConvexProblem& problem, const RealMatrix& w,
                        Exec exec) {
  RealMatrix pred;
  kernels::bit_matmul(problem.dictionary->columns, w, pred, exec);
  return loss_value(problem.loss, pred, problem.targets) +
         problem.tau() * penalty_value(problem.penalty, w);
}

DualCertificate dual_certificate(const ConvexProblem& problem,
                                 const RealMatrix& w, Exec exec) {
  check(w.rows() == problem.columns() && w.cols() == problem.d_out(),
        "coefficient shape mismatch");
  check(all_finite(w), "coefficients must be finite");
  const auto& d = problem.dictionary->columns;
  DualCertificate cert;
  RealMatrix pred;
  kernels::bit_matmul(d, w, pred, exec);
  const RealMatrix g = loss_gradient(problem.loss, pred, problem.targets);
  RealMatrix corr;
  kernels::bit_matmul_transpose(d, g, corr, exec);
  double worst = 0.0;
  for (Index i = 0; i < corr.rows(); ++i) {
    worst = std::max(worst, dual_norm(problem.penalty, corr, i));
  }
  const double tau = problem.tau();
  cert.scale = worst > tau ? tau / worst : 1.0;
  cert.lambda = -cert.scale * g;
  cert.primal = loss_value(problem.loss, pred, problem.targets) +
                tau * penalty_value(problem.penalty, w);
  cert.dual = -loss_conjugate(problem.loss, -cert.lambda, problem.targets);
  cert.gap = cert.primal - cert.dual;
  return cert;
}

ConvexSolution solve(const ConvexProblem& problem,
                     const SolverOptions& options) {
  problem.validate();
  check(options.tol > 0.0, "tol must be positive");
  check(options.max_iter >= 1 && options.check_every >= 1,
        "iteration limits must be positive");
  const Index p = problem.columns();
  const Index k = problem.d_out();
  const double tau = problem.tau();

  std::unique_ptr<SmoothModel> model;
  if (problem.loss.all_squared() && p <= options.gram_max_columns) {
    model = std::make_unique<GramModel>(problem, options.exec);
  } else {
    model = std::make_unique<MatvecModel>(problem, options.exec);
  }
  double lip = problem.loss.curvature_bound() * model->gram_norm() * 1.01;
  if (!(lip > 0.0)) lip = 1.0;

  RealMatrix x = RealMatrix::Zero(p, k);
  if (options.warm_start != nullptr) {
    check(options.warm_start->rows() == p && options.warm_start->cols() == k,
          "warm start shape mismatch");
    x = *options.warm_start;
  }
  RealMatrix ax;
  model->apply(x, ax);
  double fx = model->value(x, ax);
  double obj = fx + tau * penalty_value(problem.penalty, x);
  require_finite(obj);

  ConvexSolution sol;
  sol.problem_hash = problem.hash();
  sol.objective_history.push_back(obj);

  RealMatrix xprev = x;
  RealMatrix axprev = ax;
  double t = 1.0;
  RealMatrix y, ay, gy, xn, axn, diff;
  Index it = 0;
  bool done = false;
  while (it < options.max_iter && !done) {
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double mom = (t - 1.0) / tn;
    y = x + mom * (x - xprev);
    ay = ax + mom * (ax - axprev);
    const double fy = model->value(y, ay);
    model->gradient(y, ay, gy);
    require_finite(fy);
    double fxn = 0.0;
    for (;;) {
      xn = y - gy / lip;
      prox(problem.penalty, xn, tau / lip);
      model->apply(xn, axn);
      fxn = model->value(xn, axn);
      require_finite(fxn);
      diff = xn - y;
      const double model_bound = fy + (gy.array() * diff.array()).sum() +
                                 0.5 * lip * diff.squaredNorm();
      if (fxn <= model_bound + 1e-12 * (1.0 + std::abs(fy))) break;
      lip *= 2.0;
    }
    ++it;
    const double objn = fxn + tau * penalty_value(problem.penalty, xn);
    // Near the optimum successive objectives differ by less than their
    // evaluation error; only a rise beyond that triggers the safeguard.
    if (objn > obj + kObjectiveSlack * (1.0 + std::abs(obj))) {
      // Restart: drop momentum and retry from x (a plain proximal step from x
      // cannot increase the objective once the step is valid).
      if (mom > 0.0) {
        xprev = x;
        axprev = ax;
        t = 1.0;
      } else {
        lip *= 2.0;
      }
      continue;
    }
    // Gradient restart: the step points against the momentum direction.
    const bool restart = ((y - xn).array() * (xn - x).array()).sum() > 0.0;
    xprev.swap(x);
    axprev.swap(ax);
    x.swap(xn);
    ax.swap(axn);
    obj = objn;
    t = restart ? 1.0 : tn;
    sol.objective_history.push_back(obj);

    if (it % options.check_every == 0 || it == options.max_iter) {
      const DualCertificate cheap = model->certificate(x, ax);
      if (cheap.gap <= options.tol) {
        const DualCertificate full = dual_certificate(problem, x, options.exec);
        if (full.gap <= options.tol) done = true;
      }
    }
  }

  const DualCertificate cert = dual_certificate(problem, x, options.exec);
  sol.w_tilde = std::move(x);
  sol.lambda = cert.lambda;
  sol.primal = cert.primal;
  sol.dual = cert.dual;
  sol.gap = cert.gap;
  sol.iterations = it;
  sol.converged = cert.gap <= options.tol;
  return sol;
}

DualCertificate certify(const ConvexProblem& problem,
                        const ConvexSolution& solution) {
  problem.validate();
  check(solution.problem_hash.empty() ||
            solution.problem_hash == problem.hash(),
        "problem hash mismatch");
  return dual_certificate(problem, solution.w_tilde);
}

nlohmann::json solution_to_json(const ConvexSolution& solution) {
  nlohmann::json triplets = nlohmann::json::array();
  for (Index i = 0; i < solution.w_tilde.rows(); ++i) {
    for (Index c = 0; c < solution.w_tilde.cols(); ++c) {
      const double v = solution.w_tilde(i, c);
      if (v != 0.0) triplets.push_back({i, c, v});
    }
  }
  return {{"format_version", kFormatVersion},
          {"rows", solution.w_tilde.rows()},
          {"cols", solution.w_tilde.cols()},
          {"w_tilde", triplets},
          {"primal", solution.primal},
          {"dual", solution.dual},
          {"gap", solution.gap},
          {"iterations", solution.iterations},
          {"converged", solution.converged},
          {"problem_hash", solution.problem_hash}};
}

ConvexSolution solution_from_json(const nlohmann::json& j) {
  check(j.at("format_version").get<int>() == kFormatVersion,
        "unsupported solution format");
  ConvexSolution sol;
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  sol.w_tilde = RealMatrix::Zero(rows, cols);
  for (const auto& t : j.at("w_tilde")) {
    const Index i = t.at(0).get<Index>();
    const Index c = t.at(1).get<Index>();
    check(i >= 0 && i < rows && c >= 0 && c < cols, "solution entry out of range");
    sol.w_tilde(i, c) = t.at(2).get<double>();
  }
  sol.primal = j.at("primal").get<double>();
  sol.dual = j.at("dual").get<double>();
  sol.gap = j.at("gap").get<double>();
  sol.iterations = j.at("iterations").get<Index>();
  sol.converged = j.at("converged").get<bool>();
  sol.problem_hash = j.at("problem_hash").get<std::string>();
  return sol;
}

void save_solution(const ConvexSolution& solution,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  check(static_cast<bool>(out), "cannot write " + path.string());
  out << solution_to_json(solution).dump(1) << '\n';
}

ConvexSolution load_solution(const std::filesystem::path& path) {
  std::ifstream in(path);
  check(static_cast<bool>(in), "cannot read " + path.string());
  return solution_from_json(nlohmann::json::parse(in));
}

}  // namespace csnn
