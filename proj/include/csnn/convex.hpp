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


// l1-regularized convex readout over a spike dictionary:
//
//   min_W  L(D W, Y) + tau * R(W),   tau = reg_beta / sqrt(m_last)
//
// R is the row-group norm sum_i ||W_i||_2 (default) or the entrywise l1 norm.
// Solved by accelerated proximal gradient with function-value restarts and
// backtracking; every solution carries a Fenchel dual certificate.

#ifndef CSNN_CONVEX_HPP_
#define CSNN_CONVEX_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "csnn/dictionary.hpp"
#include "csnn/kernels.hpp"
#include "csnn/loss.hpp"

namespace csnn {

enum class Penalty { kRowGroup, kIndependent };

std::string penalty_name(Penalty penalty);
Penalty penalty_from_name(const std::string& name);

struct ConvexProblem {
  const SpikeDictionary* dictionary = nullptr;  // not owned
  RealMatrix targets;                           // rows x d_out
  double reg_beta = 1.0;
  Index m_last = 1;
  LossSpec loss;
  Penalty penalty = Penalty::kRowGroup;

  double tau() const;
  Index columns() const { return dictionary->size(); }
  Index d_out() const { return targets.cols(); }
  void validate() const;
  // FNV-1a over the dictionary bits, targets, weights, heads, reg_beta,
  // m_last and penalty.
  std::string hash() const;
};

struct SolverOptions {
  double tol = 1e-7;
  Index max_iter = 50000;
  Index check_every = 10;
  // Use the P x P weighted Gram matrix for all-squared problems with at most
  // this many columns; otherwise iterate with bit-packed matvecs.
  Index gram_max_columns = 4096;
  const RealMatrix* warm_start = nullptr;
  kernels::Exec exec = kernels::Exec::kParallel;
};

struct DualCertificate {
  RealMatrix lambda;  // rows x d_out, always feasible
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  double scale = 1.0;  // factor applied to -grad L
};

struct ConvexSolution {
  RealMatrix w_tilde;  // P x d_out
  RealMatrix lambda;
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  Index iterations = 0;
  bool converged = false;
  std::string problem_hash;
  std::vector<double> objective_history;  // one entry per accepted step

  Index support() const;
};

double penalty_value(Penalty penalty, const RealMatrix& w);
double primal_objective(const ConvexProblem& problem, const RealMatrix& w,
                        kernels::Exec exec = kernels::Exec::kParallel);

// lambda_0 = -grad L(D w, Y), rescaled into the dual ball
// sqrt(m_last) * ||lambda^T d_i||_* <= reg_beta; dual = -L*(-lambda).
DualCertificate dual_certificate(const ConvexProblem& problem,
                                 const RealMatrix& w,
                                 kernels::Exec exec = kernels::Exec::kParallel);

ConvexSolution solve(const ConvexProblem& problem,
                     const SolverOptions& options = {});

// Recomputes the certificate of a stored solution; throws
// "problem hash mismatch" when the solution belongs to another problem.
DualCertificate certify(const ConvexProblem& problem,
                        const ConvexSolution& solution);

nlohmann::json solution_to_json(const ConvexSolution& solution);
ConvexSolution solution_from_json(const nlohmann::json& j);
void save_solution(const ConvexSolution& solution,
                   const std::filesystem::path& path);
ConvexSolution load_solution(const std::filesystem::path& path);

}  // namespace csnn

#endif  // CSNN_CONVEX_HPP_
