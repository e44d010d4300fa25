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


#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "csnn/harness.hpp"

using namespace csnn;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("csnn_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string small_addition(const fs::path& out) {
  return "seed = 4\noutput_dir = \"" + out.string() + "\"\n" + R"(
[task]
kind = "addition"
base = 2
n_digits = 3
n_train_pre = 96
n_val_pre = 32
n_train_ft = 96
n_val_ft = 32
n_test = 64
[arch]
widths = [8, 16]
[solver]
reg_beta = [0.05, 0.01]
tol = 1e-8
max_iter = 20000
[sg]
lr = [0.01, 0.001]
epochs = 2
batch_size = 32
)";
}

std::string read(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("defaults follow the addition protocol") {
  const ExperimentConfig c = parse_config("");
  CHECK(c.task.kind == TaskKind::kAddition);
  CHECK(c.task.timesteps == c.task.n_digits + 1);
  CHECK(c.variant.arch.input_dim == 3);
  CHECK(c.variant.arch.widths == std::vector<Index>{256, 512});
  CHECK(c.variant.k == 2);
  CHECK(c.task.sizes.train_pre == 2304);
  CHECK(c.task.sizes.test == 1024);
  CHECK(c.reg_grid == reg_grid());
  CHECK(c.lr_grid == sg_lr_grid());
  CHECK(c.variant.sg.slope == 25.0);
  CHECK_FALSE(c.variant.trainable.leak);
  CHECK_FALSE(c.variant.trainable.u_thr);
}

TEST_CASE("OOD defaults per base") {
  CHECK(default_ood_lengths(2) == std::vector<Index>{10, 20, 50});
  CHECK(default_ood_lengths(3) == std::vector<Index>{10, 25, 50});
  CHECK(default_ood_lengths(5) == std::vector<Index>{10, 25, 50});
}

TEST_CASE("config errors name the field") {
  auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message("[solver]\nreg_beta = []\n") == "solver.reg_beta: grid must be nonempty");
  CHECK(message("[sg]\nlr = []\n") == "sg.lr: grid must be nonempty");
  CHECK(message("[task]\nbase = 1\n") == "task.base: must be at least 2");
  CHECK(message("[task]\nbase = \"two\"\n") == "task.base: expected an integer");
  CHECK(message("[arch]\nwidths = [4, -1]\n") == "arch.widths: widths must be positive");
  CHECK(message("[task]\nfoo = 1\n") == "task.foo: unknown key");
  CHECK(message("[loss]\nkind = \"hinge\"\n") == "loss.kind: unknown value \"hinge\"");
  CHECK(message("[task]\nkind = \"first_last_xor\"\ntimesteps = 4\n[eval]\nmode = \"ar\"\n") ==
        "eval.mode: autoregressive mode requires carry task");
  CHECK(message("[task]\nkind = \"mnist\"\ntimesteps = 5\n") == "task.timesteps: must divide 784");
  CHECK(message("[task]\nkind = \"mnist\"\ntimesteps = 28\nmnist_train_images = \"nope.gz\"\n")
            .rfind("task.mnist_train_images: file not found", 0) == 0);
  CHECK(message("seed = [\n").rfind("<toml>: line", 0) == 0);
}

TEST_CASE("relative data paths honour the data root variable") {
  const fs::path root = fresh_dir("root");
  ::setenv(kDataRootEnv, root.c_str(), 1);
  std::string what;
  try {
    parse_config("[task]\nkind = \"mnist\"\ntimesteps = 28\nmnist_train_images = \"a.gz\"\n");
  } catch (const ConfigError& e) {
    what = e.what();
  }
  CHECK(what.find((root / "a.gz").string()) != std::string::npos);
  ::unsetenv(kDataRootEnv);
}

TEST_CASE("sweep selection breaks ties by smaller reg_beta then smaller lr") {
  std::vector<SweepCell> cells{{1.0, 0.01, 0.9, {}}, {0.1, 0.1, 0.9, {}}, {0.1, 0.01, 0.9, {}},
                               {5.0, 0.001, 0.8, {}}};
  CHECK(select_best(cells) == 2);
  cells.push_back({10.0, 0.1, 0.95, {}});
  CHECK(select_best(cells) == 4);
  CHECK_THROWS_AS(select_best({}), Error);
}

TEST_CASE("run hashes track only what a variant uses") {
  const ExperimentConfig c = parse_config(small_addition("/tmp/unused"));
  CHECK(run_hash(c, VariantKind::kCvx, 0.1, 0.01) == run_hash(c, VariantKind::kCvx, 0.1, 0.5));
  CHECK(run_hash(c, VariantKind::kCvx, 0.1, 0.01) != run_hash(c, VariantKind::kCvx, 0.2, 0.01));
  CHECK(run_hash(c, VariantKind::kSg, 0.1, 0.01) == run_hash(c, VariantKind::kSg, 0.2, 0.01));
  CHECK(run_hash(c, VariantKind::kSg, 0.1, 0.01) != run_hash(c, VariantKind::kSgSg, 0.1, 0.01));
  ExperimentConfig other = c;
  other.output_dir = "/elsewhere";
  CHECK(run_hash(c, VariantKind::kCvx, 0.1, 0.0) == run_hash(other, VariantKind::kCvx, 0.1, 0.0));
}

TEST_CASE("training is idempotent and the stored config reloads") {
  const fs::path out = fresh_dir("idem");
  const ExperimentConfig c = parse_config(small_addition(out));
  std::ostringstream log;
  const RunOutcome a = run_training(c, VariantKind::kCvx, 0.05, 0.0, log);
  CHECK_FALSE(a.reused);
  const std::string model = read(a.dir / "model.json");
  const RunOutcome b = run_training(c, VariantKind::kCvx, 0.05, 0.0, log);
  CHECK(b.reused);
  CHECK(b.dir == a.dir);
  CHECK(read(a.dir / "model.json") == model);
  CHECK(log.str().find("already complete (hash " + a.hash + ")") != std::string::npos);
  CHECK(config_to_json(load_config(a.dir / "config.toml")) == config_to_json(c));
}

TEST_CASE("certify reproduces the stored gap") {
  const fs::path out = fresh_dir("certify");
  const ExperimentConfig c = parse_config(small_addition(out));
  std::ostringstream log;
  const RunOutcome r = run_training(c, VariantKind::kCvx, 0.05, 0.0, log);
  const CertifyOutcome cert = certify_run(r.dir);
  CHECK(std::abs(cert.certificate.gap - cert.stored_gap) <= 1e-10);
  CHECK(cert.tol == 1e-8);
  const RunOutcome sg = run_training(c, VariantKind::kSg, 0.0, 0.01, log);
  CHECK_THROWS_WITH_AS(certify_run(sg.dir), "run has no convex solution", Error);
}

TEST_CASE("evaluation covers the test split and OOD lengths") {
  const fs::path out = fresh_dir("eval");
  const ExperimentConfig c = parse_config(small_addition(out));
  std::ostringstream log;
  const RunOutcome r = run_training(c, VariantKind::kCvx, 0.05, 0.0, log);
  const auto tf = evaluate_run(r.dir, "tf", {10, 20});
  REQUIRE(tf.size() == 3);
  CHECK(tf[0].split == "test");
  CHECK(tf[1].split == "ood-10");
  CHECK(tf[1].timesteps == 11);
  CHECK(tf[2].n == 64);
  const auto ar = evaluate_run(r.dir, "ar", {10});
  CHECK(ar[0].mode == "ar");
  CHECK(evaluate_run(r.dir, "ar", {10})[1].seq_acc == ar[1].seq_acc);
  std::istringstream lines(read(r.dir / "metrics.csv"));
  std::string line;
  Index count = 0;
  while (std::getline(lines, line)) ++count;
  CHECK(count == 1 + 1 + 3 + 2 + 2);  // header, val row, tf, ar, ar again
}

TEST_CASE("two-stage training runs its prerequisite") {
  const fs::path out = fresh_dir("stages");
  const ExperimentConfig c = parse_config(small_addition(out));
  std::ostringstream log;
  const RunOutcome r = run_training(c, VariantKind::kSgCvx, 0.05, 0.01, log);
  CHECK(fs::exists(out / ("sg-" + run_hash(c, VariantKind::kSg, 0.05, 0.01)) / "checkpoint.json"));
  CHECK(fs::exists(r.dir / "solution.json"));
  const auto done = nlohmann::json::parse(read(r.dir / "done.json"));
  CHECK(done.at("hidden_frozen").get<bool>());
}

TEST_CASE("sweep writes one row per cell and marks the best") {
  const fs::path out = fresh_dir("sweep");
  const ExperimentConfig c = parse_config(small_addition(out));
  std::ostringstream log;
  const SweepOutcome s = run_sweep(c, VariantKind::kCvx, 2, log);
  REQUIRE(s.cells.size() == 2);
  CHECK(s.best == select_best(s.cells));
  const std::string csv = read(out / "sweep-cvx.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("gen-data writes caches once") {
  const fs::path out = fresh_dir("gen");
  const ExperimentConfig c = parse_config(small_addition(out));
  std::ostringstream log;
  const auto files = gen_data(c, out / "data", log);
  CHECK(files.size() == 5);
  CHECK(load_dataset(out / "data" / "test.snn") == materialize_data(c).at("test"));
  std::ostringstream again;
  gen_data(c, out / "data", again);
  CHECK(again.str().find("unchanged") != std::string::npos);
}
