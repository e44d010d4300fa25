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


// Experiment orchestration behind the command-line tool: TOML configs, data
// materialization, content-addressed run directories, certification,
// evaluation and sweeps.

#ifndef CSNN_HARNESS_HPP_
#define CSNN_HARNESS_HPP_

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "csnn/metrics.hpp"
#include "csnn/variants.hpp"

namespace csnn {

// Invalid configuration; the message starts with the offending field path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitCertification = 3;

// Relative data paths resolve against this variable when it is set.
inline constexpr const char* kDataRootEnv = "CSNN_DATA_ROOT";

struct TaskConfig {
  TaskKind kind = TaskKind::kAddition;
  int base = 2;
  Index n_digits = 5;
  Index timesteps = 0;  // XOR and MNIST; addition uses n_digits + 1
  bool one_hot_input = false;
  SplitSizes sizes;  // XOR and MNIST read train_pre, val_pre and test
  std::filesystem::path mnist_train_images, mnist_train_labels;
  std::filesystem::path mnist_test_images, mnist_test_labels;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs";
  TaskConfig task;
  VariantConfig variant;  // arch, witness, loss, solver and SG settings
  std::vector<double> reg_grid{0.01, 0.1, 0.5, 1.0, 5.0, 10.0};
  std::vector<double> lr_grid{1e-3, 5e-3, 1e-2, 1e-1};
  std::vector<Index> ood_lengths;  // empty: defaults for the base
  std::string eval_mode = "tf";

  void validate() const;
};

ExperimentConfig parse_config(const std::string& toml_text,
                              const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& config);

// {10, 20, 50} for base 2, {10, 25, 50} otherwise.
std::vector<Index> default_ood_lengths(int base);

// Keys: train_pre, val_pre, train_ft, val_ft, test. XOR and MNIST reuse the
// pretraining splits for the finetune stage.
std::map<std::string, TaskDataset> materialize_data(const ExperimentConfig& config);

// Writes one dataset cache per split; existing identical caches are kept.
std::vector<std::filesystem::path> gen_data(const ExperimentConfig& config,
                                            const std::filesystem::path& out_dir,
                                            std::ostream& log);

// Hex digest of everything that determines a training run.
std::string run_hash(const ExperimentConfig& config, VariantKind kind,
                     double reg_beta, double lr);

struct RunOutcome {
  std::filesystem::path dir;
  std::string hash;
  bool reused = false;
  double val_metric = 0.0;
  std::optional<ConvexSolution> solution;
};

// Trains one variant at (reg_beta, lr) into <output_dir>/<variant>-<hash>.
// Prerequisite stages run (or are reused) first. A completed run directory is
// left untouched and reported as reused.
RunOutcome run_training(const ExperimentConfig& config, VariantKind kind,
                        double reg_beta, double lr, std::ostream& log);

struct CertifyOutcome {
  DualCertificate certificate;
  double stored_gap = 0.0;
  double tol = 0.0;
  bool passed() const { return certificate.gap <= tol; }
};

// Rebuilds the dictionary of a convex run and recomputes its gap.
CertifyOutcome certify_run(const std::filesystem::path& run_dir);

// Evaluates the run's model on the test split and on every OOD length
// (addition); appends the records to <run_dir>/metrics.csv.
std::vector<MetricsRecord> evaluate_run(const std::filesystem::path& run_dir,
                                        const std::string& mode,
                                        const std::vector<Index>& ood_lengths);

struct SweepCell {
  double reg_beta = 0.0;
  double lr = 0.0;
  double val_metric = 0.0;
  std::filesystem::path dir;
};

// Highest validation metric; ties go to the smaller reg_beta, then the
// smaller lr.
std::size_t select_best(const std::vector<SweepCell>& cells);

struct SweepOutcome {
  std::vector<SweepCell> cells;
  std::size_t best = 0;
};

// Cells run on `jobs` workers; results are written to
// <output_dir>/sweep-<variant>.csv by a single writer.
SweepOutcome run_sweep(const ExperimentConfig& config, VariantKind kind, int jobs,
                       std::ostream& log);

}  // namespace csnn

#endif  // CSNN_HARNESS_HPP_
