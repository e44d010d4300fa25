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


// csnn: data generation, training, certification, evaluation and sweeps for
// convexly trained parallel LIF networks.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "csnn/harness.hpp"
#include "csnn/oracle.hpp"

namespace fs = std::filesystem;
using namespace csnn;

namespace {

fs::path default_data_dir(const ExperimentConfig& config) {
  if (const char* root = std::getenv(kDataRootEnv); root != nullptr && *root != '\0') {
    return fs::path(root) / "cache";
  }
  return config.output_dir / "data";
}

void print_metrics(const std::vector<MetricsRecord>& records) {
  std::cout << metrics_csv_header() << '\n';
  for (const auto& r : records) std::cout << metrics_csv_row(r) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convex training of parallel LIF spiking networks"};
  app.require_subcommand(1);
  const std::vector<std::string> variants{"sg", "cvx", "sg-cvx", "sg-sg", "cvx-sg"};

  std::string config_path, variant = "cvx", out_dir, run_dir, mode;
  std::vector<double> reg_beta, lr;
  std::vector<Index> ood;
  int jobs = 1;

  auto* gen = app.add_subcommand("gen-data", "Write dataset caches for every split");
  gen->add_option("--config", config_path, "Experiment TOML")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out_dir, "Output directory (default: $CSNN_DATA_ROOT/cache or <output_dir>/data)");

  auto* train = app.add_subcommand("train", "Train one variant at one grid cell");
  train->add_option("--config", config_path, "Experiment TOML")->required()->check(CLI::ExistingFile);
  train->add_option("--variant", variant)->check(CLI::IsMember(variants));
  train->add_option("--reg-beta", reg_beta, "Override the first reg_beta grid value")->expected(1);
  train->add_option("--lr", lr, "Override the first learning-rate grid value")->expected(1);

  auto* cert = app.add_subcommand("certify", "Recompute the duality gap of a convex run");
  cert->add_option("--run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

  auto* eval = app.add_subcommand("eval", "Evaluate a run on the test split and OOD lengths");
  eval->add_option("--run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--mode", mode, "tf (teacher forced) or ar (autoregressive)")
      ->check(CLI::IsMember({"tf", "ar"}));
  eval->add_option("--ood-lengths", ood, "Digit counts for length OOD")->delimiter(',');

  auto* sweep = app.add_subcommand("sweep", "Grid over reg_beta and lr; pick by validation");
  sweep->add_option("--config", config_path, "Experiment TOML")->required()->check(CLI::ExistingFile);
  sweep->add_option("--variant", variant)->check(CLI::IsMember(variants));
  sweep->add_option("--jobs", jobs, "Concurrent cells")->check(CLI::PositiveNumber);

  Index instances = 20, trials = 100000, off_grid = 10000;
  double oracle_beta = 0.1;
  std::uint64_t oracle_seed = 1;
  std::string report_path;
  auto* oracle = app.add_subcommand("oracle", "Brute-force optimality check on micro instances");
  oracle->add_option("--instances", instances)->check(CLI::PositiveNumber);
  oracle->add_option("--trials", trials, "Grid networks per instance");
  oracle->add_option("--off-grid", off_grid, "Off-grid networks per instance");
  oracle->add_option("--reg-beta", oracle_beta);
  oracle->add_option("--seed", oracle_seed);
  oracle->add_option("--report", report_path, "Write the per-instance JSON report here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const ExperimentConfig c = load_config(config_path);
      gen_data(c, out_dir.empty() ? default_data_dir(c) : fs::path(out_dir), std::cout);
    } else if (*train) {
      const ExperimentConfig c = load_config(config_path);
      const double b = reg_beta.empty() ? c.reg_grid.front() : reg_beta.front();
      const double l = lr.empty() ? c.lr_grid.front() : lr.front();
      const RunOutcome r = run_training(c, variant_from_name(variant), b, l, std::cout);
      std::cout << r.dir.string() << '\n';
    } else if (*cert) {
      const CertifyOutcome r = certify_run(run_dir);
      const nlohmann::json j = {{"primal", r.certificate.primal},
                                {"dual", r.certificate.dual},
                                {"gap", r.certificate.gap},
                                {"stored_gap", r.stored_gap},
                                {"tol", r.tol},
                                {"passed", r.passed()}};
      std::cout << j.dump(2) << '\n';
      if (!r.passed()) return kExitCertification;
    } else if (*eval) {
      const ExperimentConfig c = load_config(fs::path(run_dir) / "config.toml");
      const std::string m = mode.empty() ? c.eval_mode : mode;
      std::vector<Index> lengths = ood;
      if (lengths.empty() && c.task.kind == TaskKind::kAddition) {
        lengths = c.ood_lengths.empty() ? default_ood_lengths(c.task.base) : c.ood_lengths;
      }
      print_metrics(evaluate_run(run_dir, m, lengths));
    } else if (*sweep) {
      const ExperimentConfig c = load_config(config_path);
      const SweepOutcome s = run_sweep(c, variant_from_name(variant), jobs, std::cout);
      const SweepCell& best = s.cells[s.best];
      std::cout << "best reg_beta=" << best.reg_beta << " lr=" << best.lr
                << " val=" << best.val_metric << " run=" << best.dir.string() << '\n';
    } else if (*oracle) {
      TrialOptions opt;
      opt.n_trials = trials;
      nlohmann::json report = nlohmann::json::array();
      Index violations = 0;
      for (Index i = 0; i < instances; ++i) {
        const MicroInstance inst =
            make_micro_instance(derive_seed(oracle_seed, static_cast<std::uint64_t>(i)));
        const OracleReport r = run_oracle_instance(inst, oracle_beta, opt, off_grid);
        violations += r.violations;
        report.push_back(oracle_report_to_json(r));
        std::cout << "instance " << i << " n=" << r.n << " T=" << r.timesteps
                  << " P=" << r.dictionary_size << " dual=" << r.dual
                  << " min_net=" << r.min_network_objective << " violations=" << r.violations
                  << " off_grid_violations=" << r.off_grid_violations << '\n';
      }
      if (!report_path.empty()) {
        std::ofstream(report_path) << report.dump(2) << '\n';
      }
      if (violations > 0) return kExitCertification;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}
