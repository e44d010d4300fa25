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


#include "csnn/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <toml.hpp>

namespace csnn {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void config_fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"", {"seed", "output_dir", "task", "arch", "witness", "loss", "solver", "sg", "eval"}},
      {"task",
       {"kind", "base", "n_digits", "timesteps", "one_hot_input", "n_train_pre", "n_val_pre",
        "n_train_ft", "n_val_ft", "n_test", "mnist_train_images", "mnist_train_labels",
        "mnist_test_images", "mnist_test_labels"}},
      {"arch", {"widths", "k"}},
      {"witness", {"m", "leak_mode", "leak", "leak_lo", "leak_hi", "thr_mode", "thr"}},
      {"loss", {"kind", "lambda_carry", "ramp"}},
      {"solver",
       {"reg_beta", "tol", "max_iter", "check_every", "gram_max_columns", "penalty",
        "output_rule"}},
      {"sg",
       {"lr", "epochs", "finetune_epochs", "batch_size", "slope", "reg", "detach_reset",
        "train_p_in", "train_leak", "train_u_thr", "train_p_out", "beta1", "beta2", "eps"}},
      {"eval", {"ood_lengths", "mode"}},
  };
  return keys;
}

class Reader {
 public:
  explicit Reader(const toml::table& t) : t_(t) {
    for (const auto& [key, node] : t_) {
      const std::string k(key.str());
      if (!known_keys().at("").count(k)) config_fail(k, "unknown key");
      if (k == "seed" || k == "output_dir") continue;
      if (!node.is_table()) config_fail(k, "expected a table");
      for (const auto& [sub, unused] : *node.as_table()) {
        if (!known_keys().at(k).count(std::string(sub.str()))) {
          config_fail(k + "." + std::string(sub.str()), "unknown key");
        }
      }
    }
  }

  template <typename T>
  T get(const std::string& path, T fallback) const {
    const auto node = t_.at_path(path);
    if (!node) return fallback;
    if constexpr (std::is_same_v<T, bool>) {
      if (auto v = node.value_exact<bool>()) return *v;
      config_fail(path, "expected a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (auto v = node.value_exact<std::string>()) return *v;
      config_fail(path, "expected a string");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (node.is_number()) return static_cast<T>(*node.value<double>());
      config_fail(path, "expected a number");
    } else {
      if (auto v = node.value_exact<std::int64_t>()) return static_cast<T>(*v);
      config_fail(path, "expected an integer");
    }
  }

  template <typename T>
  std::vector<T> list(const std::string& path, std::vector<T> fallback) const {
    const auto node = t_.at_path(path);
    if (!node) return fallback;
    if (!node.is_array()) return {get<T>(path, T{})};
    std::vector<T> out;
    const auto& arr = *node.as_array();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = path + "[" + std::to_string(i) + "]";
      if constexpr (std::is_floating_point_v<T>) {
        if (!arr[i].is_number()) config_fail(p, "expected a number");
        out.push_back(static_cast<T>(*arr[i].template value<double>()));
      } else {
        auto v = arr[i].template value_exact<std::int64_t>();
        if (!v) config_fail(p, "expected an integer");
        out.push_back(static_cast<T>(*v));
      }
    }
    return out;
  }

 private:
  const toml::table& t_;
};

fs::path resolve_data_path(const std::string& p, const fs::path& base_dir) {
  if (p.empty()) return {};
  const fs::path path(p);
  if (path.is_absolute()) return path;
  if (const char* root = std::getenv(kDataRootEnv); root != nullptr && *root != '\0') {
    return fs::path(root) / path;
  }
  return fs::absolute(base_dir / path);
}

template <typename E>
E parse_enum(const std::string& path, const std::string& name, E (*from)(const std::string&)) {
  try {
    return from(name);
  } catch (const Error&) {
    config_fail(path, "unknown value \"" + name + "\"");
  }
}

OutputRule output_rule_from_name(const std::string& s) {
  if (s == "auto") return OutputRule::kAuto;
  if (s == "uniform") return OutputRule::kUniform;
  if (s == "masked") return OutputRule::kMasked;
  if (s == "replicated") return OutputRule::kReplicated;
  fail("unknown output rule");
}

std::string output_rule_name(OutputRule r) {
  switch (r) {
    case OutputRule::kAuto:
      return "auto";
    case OutputRule::kUniform:
      return "uniform";
    case OutputRule::kMasked:
      return "masked";
    case OutputRule::kReplicated:
      return "replicated";
  }
  return "auto";
}

LeakMode leak_mode_from_name(const std::string& s) {
  if (s == "fixed") return LeakMode::kFixed;
  if (s == "uniform") return LeakMode::kUniform;
  fail("unknown leak mode");
}

ThresholdMode thr_mode_from_name(const std::string& s) {
  if (s == "fixed") return ThresholdMode::kFixed;
  if (s == "half_normal") return ThresholdMode::kHalfNormal;
  fail("unknown threshold mode");
}

Index input_dim_of(const TaskConfig& t) {
  switch (t.kind) {
    case TaskKind::kAddition:
      return 3;
    case TaskKind::kFirstLastXor:
      return t.one_hot_input ? 2 : 1;
    case TaskKind::kMnist:
      return t.timesteps > 0 ? 784 / t.timesteps : 0;
  }
  return 0;
}

toml::array to_array(const auto& values) {
  toml::array a;
  for (const auto& v : values) a.push_back(v);
  return a;
}

toml::table config_table(const ExperimentConfig& c) {
  const VariantConfig& v = c.variant;
  toml::table task{{"kind", task_kind_name(c.task.kind)},
                   {"base", c.task.base},
                   {"n_digits", static_cast<std::int64_t>(c.task.n_digits)},
                   {"timesteps", static_cast<std::int64_t>(c.task.timesteps)},
                   {"one_hot_input", c.task.one_hot_input},
                   {"n_train_pre", static_cast<std::int64_t>(c.task.sizes.train_pre)},
                   {"n_val_pre", static_cast<std::int64_t>(c.task.sizes.val_pre)},
                   {"n_train_ft", static_cast<std::int64_t>(c.task.sizes.train_ft)},
                   {"n_val_ft", static_cast<std::int64_t>(c.task.sizes.val_ft)},
                   {"n_test", static_cast<std::int64_t>(c.task.sizes.test)}};
  if (c.task.kind == TaskKind::kMnist) {
    task.insert("mnist_train_images", c.task.mnist_train_images.string());
    task.insert("mnist_train_labels", c.task.mnist_train_labels.string());
    task.insert("mnist_test_images", c.task.mnist_test_images.string());
    task.insert("mnist_test_labels", c.task.mnist_test_labels.string());
  }
  std::vector<std::int64_t> widths(v.arch.widths.begin(), v.arch.widths.end());
  std::vector<std::int64_t> ood(c.ood_lengths.begin(), c.ood_lengths.end());
  return toml::table{
      {"seed", static_cast<std::int64_t>(c.seed)},
      {"output_dir", c.output_dir.string()},
      {"task", task},
      {"arch", toml::table{{"widths", to_array(widths)}, {"k", static_cast<std::int64_t>(v.k)}}},
      {"witness",
       toml::table{{"m", static_cast<std::int64_t>(v.m_witnesses)},
                   {"leak_mode", v.leak.mode == LeakMode::kFixed ? "fixed" : "uniform"},
                   {"leak", v.leak.value},
                   {"leak_lo", v.leak.lo},
                   {"leak_hi", v.leak.hi},
                   {"thr_mode", v.thr.mode == ThresholdMode::kFixed ? "fixed" : "half_normal"},
                   {"thr", v.thr.value}}},
      {"loss", toml::table{{"kind", loss_kind_name(v.loss.kind)},
                           {"lambda_carry", v.loss.lambda_carry},
                           {"ramp", v.loss.ramp}}},
      {"solver",
       toml::table{{"reg_beta", to_array(c.reg_grid)},
                   {"tol", v.solver.tol},
                   {"max_iter", static_cast<std::int64_t>(v.solver.max_iter)},
                   {"check_every", static_cast<std::int64_t>(v.solver.check_every)},
                   {"gram_max_columns", static_cast<std::int64_t>(v.solver.gram_max_columns)},
                   {"penalty", penalty_name(v.penalty)},
                   {"output_rule", output_rule_name(v.output_rule)}}},
      {"sg", toml::table{{"lr", to_array(c.lr_grid)},
                         {"epochs", static_cast<std::int64_t>(v.sg.epochs)},
                         {"finetune_epochs", static_cast<std::int64_t>(v.finetune.epochs)},
                         {"batch_size", static_cast<std::int64_t>(v.sg.batch_size)},
                         {"slope", v.sg.slope},
                         {"reg", v.sg.reg},
                         {"detach_reset", v.sg.detach_reset},
                         {"train_p_in", v.trainable.p_in},
                         {"train_leak", v.trainable.leak},
                         {"train_u_thr", v.trainable.u_thr},
                         {"train_p_out", v.trainable.p_out},
                         {"beta1", v.sg.adam.beta1},
                         {"beta2", v.sg.adam.beta2},
                         {"eps", v.sg.adam.eps}}},
      {"eval", toml::table{{"ood_lengths", to_array(ood)}, {"mode", c.eval_mode}}},
  };
}

std::string config_toml(const ExperimentConfig& c) {
  std::ostringstream os;
  os << config_table(c) << '\n';
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  check(static_cast<bool>(f), "cannot write " + path.string());
  f << text;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream f(path);
  check(static_cast<bool>(f), "cannot read " + path.string());
  return nlohmann::json::parse(f);
}

bool uses_reg(VariantKind k) {
  return k == VariantKind::kCvx || k == VariantKind::kSgCvx || k == VariantKind::kCvxSg;
}

bool uses_lr(VariantKind k) { return k != VariantKind::kCvx; }

bool is_convex(VariantKind k) { return k == VariantKind::kCvx || k == VariantKind::kSgCvx; }

VariantConfig cell_config(const ExperimentConfig& c, double reg_beta, double lr) {
  VariantConfig v = c.variant;
  v.seed = c.seed;
  v.reg_beta = reg_beta;
  v.sg.learning_rate = lr;
  v.finetune.learning_rate = lr;
  return v;
}

void write_curve(const fs::path& path, const TrainResult& tr) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,train_loss,val_metric\n";
  for (const auto& e : tr.curve) os << e.epoch << ',' << e.train_loss << ',' << e.val_metric << '\n';
  write_text(path, os.str());
}

void append_metrics(const fs::path& path, const std::vector<MetricsRecord>& records) {
  const bool fresh = !fs::exists(path);
  std::ofstream f(path, std::ios::app);
  check(static_cast<bool>(f), "cannot write " + path.string());
  if (fresh) f << metrics_csv_header() << '\n';
  for (const auto& r : records) f << metrics_csv_row(r) << '\n';
}

}  // namespace

void ExperimentConfig::validate() const {
  const VariantConfig& v = variant;
  if (task.kind == TaskKind::kAddition) {
    if (task.base < 2) config_fail("task.base", "must be at least 2");
    if (task.n_digits < 1) config_fail("task.n_digits", "must be at least 1");
  } else {
    if (task.timesteps < 2) config_fail("task.timesteps", "must be at least 2");
  }
  if (task.kind == TaskKind::kMnist) {
    if (784 % task.timesteps != 0) config_fail("task.timesteps", "must divide 784");
    const std::pair<const char*, const fs::path*> files[] = {
        {"task.mnist_train_images", &task.mnist_train_images},
        {"task.mnist_train_labels", &task.mnist_train_labels},
        {"task.mnist_test_images", &task.mnist_test_images},
        {"task.mnist_test_labels", &task.mnist_test_labels}};
    for (const auto& [name, path] : files) {
      if (path->empty() || !fs::exists(*path)) config_fail(name, "file not found: " + path->string());
    }
  }
  if (task.sizes.train_pre < 1) config_fail("task.n_train_pre", "must be positive");
  if (task.sizes.val_pre < 1) config_fail("task.n_val_pre", "must be positive");
  if (task.sizes.test < 1) config_fail("task.n_test", "must be positive");
  if (v.arch.widths.empty()) config_fail("arch.widths", "must be nonempty");
  for (Index w : v.arch.widths) {
    if (w < 1) config_fail("arch.widths", "widths must be positive");
  }
  if (v.k < 1) config_fail("arch.k", "must be positive");
  if (v.m_witnesses < 1) config_fail("witness.m", "must be positive");
  if (v.leak.value < 0.0 || v.leak.value >= 1.0) config_fail("witness.leak", "must lie in [0, 1)");
  if (v.leak.lo < 0.0 || v.leak.hi >= 1.0 || v.leak.lo > v.leak.hi) {
    config_fail("witness.leak_lo", "need 0 <= leak_lo <= leak_hi < 1");
  }
  if (v.thr.value < 0.0) config_fail("witness.thr", "must be nonnegative");
  if (reg_grid.empty()) config_fail("solver.reg_beta", "grid must be nonempty");
  for (double b : reg_grid) {
    if (!(b > 0.0)) config_fail("solver.reg_beta", "values must be positive");
  }
  if (!(v.solver.tol > 0.0)) config_fail("solver.tol", "must be positive");
  if (v.solver.max_iter < 1) config_fail("solver.max_iter", "must be positive");
  if (lr_grid.empty()) config_fail("sg.lr", "grid must be nonempty");
  for (double lr : lr_grid) {
    if (lr < 0.0) config_fail("sg.lr", "values must be nonnegative");
  }
  if (v.sg.epochs < 0) config_fail("sg.epochs", "must be nonnegative");
  if (v.finetune.epochs < 0) config_fail("sg.finetune_epochs", "must be nonnegative");
  if (v.sg.batch_size < 1) config_fail("sg.batch_size", "must be positive");
  if (!(v.sg.slope > 0.0)) config_fail("sg.slope", "must be positive");
  if (eval_mode != "tf" && eval_mode != "ar") config_fail("eval.mode", "must be tf or ar");
  if (eval_mode == "ar" && task.kind != TaskKind::kAddition) {
    config_fail("eval.mode", "autoregressive mode requires carry task");
  }
  if (v.loss.kind == LossKind::kSoftmax && task.kind != TaskKind::kMnist) {
    config_fail("loss.kind", "softmax needs one-hot class targets");
  }
  if (v.loss.kind == LossKind::kLogistic && task.kind != TaskKind::kFirstLastXor) {
    config_fail("loss.kind", "logistic needs +-1 targets");
  }
  for (Index l : ood_lengths) {
    if (l < 1) config_fail("eval.ood_lengths", "lengths must be positive");
  }
}

ExperimentConfig parse_config(const std::string& toml_text, const fs::path& base_dir) {
  toml::table t;
  try {
    t = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "line " << e.source().begin.line << ": " << e.description();
    config_fail("<toml>", os.str());
  }
  const Reader r(t);
  ExperimentConfig c;
  const std::int64_t seed = r.get<std::int64_t>("seed", 0);
  if (seed < 0) config_fail("seed", "must be nonnegative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.output_dir = r.get<std::string>("output_dir", "runs");

  TaskConfig& task = c.task;
  task.kind = parse_enum("task.kind", r.get<std::string>("task.kind", "addition"),
                         &task_kind_from_name);
  task.base = r.get<int>("task.base", 2);
  task.n_digits = r.get<Index>("task.n_digits", 5);
  task.timesteps = task.kind == TaskKind::kAddition ? task.n_digits + 1
                                                    : r.get<Index>("task.timesteps", 0);
  task.one_hot_input = r.get<bool>("task.one_hot_input", false);
  task.sizes.train_pre = r.get<Index>("task.n_train_pre", task.sizes.train_pre);
  task.sizes.val_pre = r.get<Index>("task.n_val_pre", task.sizes.val_pre);
  task.sizes.train_ft = r.get<Index>("task.n_train_ft", task.sizes.train_ft);
  task.sizes.val_ft = r.get<Index>("task.n_val_ft", task.sizes.val_ft);
  task.sizes.test = r.get<Index>("task.n_test", task.sizes.test);
  task.mnist_train_images = resolve_data_path(r.get<std::string>("task.mnist_train_images", ""), base_dir);
  task.mnist_train_labels = resolve_data_path(r.get<std::string>("task.mnist_train_labels", ""), base_dir);
  task.mnist_test_images = resolve_data_path(r.get<std::string>("task.mnist_test_images", ""), base_dir);
  task.mnist_test_labels = resolve_data_path(r.get<std::string>("task.mnist_test_labels", ""), base_dir);

  VariantConfig& v = c.variant;
  v.arch.widths = r.list<Index>("arch.widths", {256, 512});
  v.arch.timesteps = task.timesteps;
  v.arch.input_dim = input_dim_of(task);
  v.k = r.get<Index>("arch.k", 2);
  v.m_witnesses = r.get<Index>("witness.m", v.k);
  v.leak.mode = parse_enum("witness.leak_mode", r.get<std::string>("witness.leak_mode", "fixed"),
                           &leak_mode_from_name);
  v.leak.value = r.get<double>("witness.leak", v.leak.value);
  v.leak.lo = r.get<double>("witness.leak_lo", v.leak.lo);
  v.leak.hi = r.get<double>("witness.leak_hi", v.leak.hi);
  v.thr.mode = parse_enum("witness.thr_mode", r.get<std::string>("witness.thr_mode", "fixed"),
                          &thr_mode_from_name);
  v.thr.value = r.get<double>("witness.thr", v.thr.value);
  v.loss.kind = parse_enum("loss.kind", r.get<std::string>("loss.kind", "squared"),
                           &loss_kind_from_name);
  v.loss.lambda_carry = r.get<double>("loss.lambda_carry", 1.0);
  if (v.loss.lambda_carry < 0.0) config_fail("loss.lambda_carry", "must be nonnegative");
  v.loss.ramp = r.get<bool>("loss.ramp", true);

  c.reg_grid = r.list<double>("solver.reg_beta", c.reg_grid);
  v.solver.tol = r.get<double>("solver.tol", 1e-6);
  v.solver.max_iter = r.get<Index>("solver.max_iter", 5000);
  v.solver.check_every = r.get<Index>("solver.check_every", v.solver.check_every);
  v.solver.gram_max_columns = r.get<Index>("solver.gram_max_columns", v.solver.gram_max_columns);
  v.penalty = parse_enum("solver.penalty", r.get<std::string>("solver.penalty", "row_group"),
                         &penalty_from_name);
  v.output_rule = parse_enum("solver.output_rule", r.get<std::string>("solver.output_rule", "auto"),
                             &output_rule_from_name);

  c.lr_grid = r.list<double>("sg.lr", c.lr_grid);
  v.sg.epochs = r.get<Index>("sg.epochs", 100);
  v.sg.batch_size = r.get<Index>("sg.batch_size", 128);
  v.sg.slope = r.get<double>("sg.slope", 25.0);
  v.sg.reg = r.get<double>("sg.reg", 0.0);
  v.sg.detach_reset = r.get<bool>("sg.detach_reset", false);
  v.sg.adam.beta1 = r.get<double>("sg.beta1", v.sg.adam.beta1);
  v.sg.adam.beta2 = r.get<double>("sg.beta2", v.sg.adam.beta2);
  v.sg.adam.eps = r.get<double>("sg.eps", v.sg.adam.eps);
  v.trainable.p_in = r.get<bool>("sg.train_p_in", true);
  v.trainable.leak = r.get<bool>("sg.train_leak", false);
  v.trainable.u_thr = r.get<bool>("sg.train_u_thr", false);
  v.trainable.p_out = r.get<bool>("sg.train_p_out", true);
  v.finetune = v.sg;
  v.finetune.epochs = r.get<Index>("sg.finetune_epochs", v.sg.epochs);

  c.ood_lengths = r.list<Index>("eval.ood_lengths", {});
  c.eval_mode = r.get<std::string>("eval.mode", "tf");
  v.seed = c.seed;
  v.reg_beta = c.reg_grid.empty() ? 0.0 : c.reg_grid.front();
  v.sg.learning_rate = c.lr_grid.empty() ? 0.0 : c.lr_grid.front();
  v.finetune.learning_rate = v.sg.learning_rate;
  v.sg.seed = derive_seed(c.seed, tag_of("sg-pre"));
  v.finetune.seed = derive_seed(c.seed, tag_of("sg-ft"));
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream f(path);
  if (!f) config_fail(path.string(), "cannot open config file");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path.has_parent_path() ? path.parent_path() : fs::path("."));
}

nlohmann::json config_to_json(const ExperimentConfig& config) {
  std::ostringstream os;
  os << toml::json_formatter{config_table(config)};
  return nlohmann::json::parse(os.str());
}

std::vector<Index> default_ood_lengths(int base) {
  return base == 2 ? std::vector<Index>{10, 20, 50} : std::vector<Index>{10, 25, 50};
}

std::map<std::string, TaskDataset> materialize_data(const ExperimentConfig& config) {
  const TaskConfig& t = config.task;
  std::map<std::string, TaskDataset> out;
  switch (t.kind) {
    case TaskKind::kAddition:
      return addition_splits(t.base, t.n_digits, derive_seed(config.seed, tag_of("data")), t.sizes);
    case TaskKind::kFirstLastXor: {
      const std::pair<const char*, Index> plan[] = {
          {"train_pre", t.sizes.train_pre}, {"val_pre", t.sizes.val_pre}, {"test", t.sizes.test}};
      for (const auto& [name, n] : plan) {
        TaskDataset d = gen_first_last_xor(t.timesteps, n, derive_seed(config.seed, tag_of(name)),
                                           t.one_hot_input);
        d.meta.split = name;
        out.emplace(name, std::move(d));
      }
      break;
    }
    case TaskKind::kMnist: {
      TaskDataset train = load_mnist_seq(t.mnist_train_images, t.mnist_train_labels, t.timesteps,
                                         t.sizes.train_pre, 0);
      train.meta.split = "train_pre";
      TaskDataset val = load_mnist_seq(t.mnist_train_images, t.mnist_train_labels, t.timesteps,
                                       t.sizes.val_pre, t.sizes.train_pre);
      val.meta.split = "val_pre";
      TaskDataset test = load_mnist_seq(t.mnist_test_images, t.mnist_test_labels, t.timesteps,
                                        t.sizes.test, 0);
      test.meta.split = "test";
      out.emplace("train_pre", std::move(train));
      out.emplace("val_pre", std::move(val));
      out.emplace("test", std::move(test));
      break;
    }
  }
  out.emplace("train_ft", out.at("train_pre"));
  out.emplace("val_ft", out.at("val_pre"));
  return out;
}

std::vector<fs::path> gen_data(const ExperimentConfig& config, const fs::path& out_dir,
                               std::ostream& log) {
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  for (const auto& [name, data] : materialize_data(config)) {
    const fs::path path = out_dir / (name + ".snn");
    if (fs::exists(path) && load_dataset(path) == data) {
      log << "dataset " << path.string() << " unchanged\n";
    } else {
      save_dataset(data, path);
      log << "wrote " << path.string() << " (n=" << data.n() << ")\n";
    }
    written.push_back(path);
  }
  return written;
}

std::string run_hash(const ExperimentConfig& config, VariantKind kind, double reg_beta,
                     double lr) {
  nlohmann::json j = config_to_json(config);
  j.erase("output_dir");
  j.erase("eval");
  j["solver"].erase("reg_beta");
  j["sg"].erase("lr");
  j["variant"] = variant_name(kind);
  j["cell"] = {{"reg_beta", uses_reg(kind) ? reg_beta : 0.0}, {"lr", uses_lr(kind) ? lr : 0.0}};
  Fnv1a h;
  h.update_string(j.dump());
  return h.hex();
}

RunOutcome run_training(const ExperimentConfig& config, VariantKind kind, double reg_beta,
                        double lr, std::ostream& log) {
  RunOutcome out;
  out.hash = run_hash(config, kind, reg_beta, lr);
  out.dir = config.output_dir / (variant_name(kind) + "-" + out.hash);
  const fs::path done = out.dir / "done.json";
  if (fs::exists(done)) {
    const nlohmann::json d = read_json(done);
    if (d.at("hash").get<std::string>() == out.hash) {
      log << "run " << out.dir.string() << " already complete (hash " << out.hash << ")\n";
      out.reused = true;
      out.val_metric = d.at("val_metric").get<double>();
      if (is_convex(kind)) out.solution = load_solution(out.dir / "solution.json");
      return out;
    }
  }

  const auto data = materialize_data(config);
  const VariantConfig vc = cell_config(config, reg_beta, lr);
  const VariantData vd{&data.at("train_pre"), &data.at("val_pre"), &data.at("train_ft"),
                       &data.at("val_ft")};
  std::optional<TrainableSnn> sg_ckpt;
  std::optional<ParallelSnn> cvx_ckpt;
  if (kind == VariantKind::kSgCvx || kind == VariantKind::kSgSg) {
    const RunOutcome pre = run_training(config, VariantKind::kSg, reg_beta, lr, log);
    sg_ckpt = trainable_from_json(read_json(pre.dir / "checkpoint.json"));
  }
  if (kind == VariantKind::kCvxSg) {
    const RunOutcome pre = run_training(config, VariantKind::kCvx, reg_beta, lr, log);
    cvx_ckpt = load_snn(pre.dir / "model.json");
  }
  log << "training " << variant_name(kind) << " reg_beta=" << reg_beta << " lr=" << lr << '\n';
  const VariantResult res =
      run_variant(kind, vc, vd,
                  {sg_ckpt ? &*sg_ckpt : nullptr, cvx_ckpt ? &*cvx_ckpt : nullptr});

  const bool second_stage = kind == VariantKind::kSgCvx || kind == VariantKind::kSgSg ||
                            kind == VariantKind::kCvxSg;
  const TaskDataset& val = second_stage ? data.at("val_ft") : data.at("val_pre");
  MetricsRecord m = evaluate_teacher_forced(res.model, val);
  m.seconds = res.seconds;
  m.seed = config.seed;
  if (res.solution) {
    m.primal = res.solution->primal;
    m.dual = res.solution->dual;
    m.gap = res.solution->gap;
  }
  out.val_metric = m.accuracy;
  out.solution = res.solution;

  fs::create_directories(out.dir);
  write_text(out.dir / "config.toml", config_toml(config));
  save_snn(res.model, out.dir / "model.json");
  if (res.solution) {
    save_solution(*res.solution, out.dir / "solution.json");
    save_store(res.store, out.dir / "store.json");
  }
  if (res.trainable) {
    write_text(out.dir / "checkpoint.json", trainable_to_json(*res.trainable, variant_name(kind)).dump());
  }
  if (res.training) write_curve(out.dir / "curve.csv", *res.training);
  append_metrics(out.dir / "metrics.csv", {m});
  const nlohmann::json d = {{"hash", out.hash},
                            {"variant", variant_name(kind)},
                            {"reg_beta", reg_beta},
                            {"lr", lr},
                            {"val_metric", out.val_metric},
                            {"hidden_frozen", res.hidden_frozen},
                            {"diverged", res.training ? res.training->diverged : false},
                            {"seconds", res.seconds}};
  write_text(done, d.dump(2));
  log << "run " << out.dir.string() << " val=" << out.val_metric << '\n';
  return out;
}

CertifyOutcome certify_run(const fs::path& run_dir) {
  const nlohmann::json d = read_json(run_dir / "done.json");
  const VariantKind kind = variant_from_name(d.at("variant").get<std::string>());
  check(is_convex(kind), "run has no convex solution");
  const ExperimentConfig config = load_config(run_dir / "config.toml");
  const auto data = materialize_data(config);
  const TaskDataset& train =
      kind == VariantKind::kCvx ? data.at("train_pre") : data.at("train_ft");
  const VariantConfig vc = cell_config(config, d.at("reg_beta").get<double>(), d.at("lr").get<double>());
  const WitnessStore store = load_store(run_dir / "store.json");
  const SpikeDictionary dict = convex_dictionary(store, train);
  const ConvexProblem pb = convex_problem(dict, vc, train);
  const ConvexSolution sol = load_solution(run_dir / "solution.json");
  CertifyOutcome out;
  out.certificate = certify(pb, sol);
  out.stored_gap = sol.gap;
  out.tol = vc.solver.tol;
  return out;
}

std::vector<MetricsRecord> evaluate_run(const fs::path& run_dir, const std::string& mode,
                                        const std::vector<Index>& ood_lengths) {
  check(mode == "tf" || mode == "ar", "eval mode must be tf or ar");
  const ExperimentConfig config = load_config(run_dir / "config.toml");
  const ParallelSnn model = load_snn(run_dir / "model.json");
  const auto data = materialize_data(config);
  auto eval = [&](const TaskDataset& d) {
    MetricsRecord r = mode == "ar" ? eval_autoregressive(model, d) : evaluate_teacher_forced(model, d);
    r.seed = config.seed;
    return r;
  };
  std::vector<MetricsRecord> out{eval(data.at("test"))};
  if (config.task.kind == TaskKind::kAddition) {
    for (Index len : ood_lengths) {
      TaskDataset d = gen_addition(config.task.base, len, config.task.sizes.test,
                                   derive_seed(config.seed, tag_of("ood"), static_cast<std::uint64_t>(len)));
      d.meta.split = "ood-" + std::to_string(len);
      out.push_back(eval(d));
    }
  }
  append_metrics(run_dir / "metrics.csv", out);
  return out;
}

std::size_t select_best(const std::vector<SweepCell>& cells) {
  check(!cells.empty(), "empty sweep");
  std::size_t best = 0;
  for (std::size_t i = 1; i < cells.size(); ++i) {
    const SweepCell& a = cells[i];
    const SweepCell& b = cells[best];
    if (a.val_metric > b.val_metric ||
        (a.val_metric == b.val_metric &&
         (a.reg_beta < b.reg_beta || (a.reg_beta == b.reg_beta && a.lr < b.lr)))) {
      best = i;
    }
  }
  return best;
}

SweepOutcome run_sweep(const ExperimentConfig& config, VariantKind kind, int jobs,
                       std::ostream& log) {
  const std::vector<double> regs = uses_reg(kind) ? config.reg_grid : std::vector<double>{0.0};
  const std::vector<double> lrs = uses_lr(kind) ? config.lr_grid : std::vector<double>{0.0};
  SweepOutcome out;
  for (double b : regs) {
    for (double lr : lrs) out.cells.push_back({b, lr, 0.0, {}});
  }
  std::mutex mu;
  std::ostringstream quiet;
  // Shared prerequisite stages run first so that cells only reuse them.
  if (kind == VariantKind::kSgCvx || kind == VariantKind::kSgSg) {
    for (double lr : lrs) run_training(config, VariantKind::kSg, 0.0, lr, log);
  } else if (kind == VariantKind::kCvxSg) {
    for (double b : regs) run_training(config, VariantKind::kCvx, b, 0.0, log);
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t i = next++; i < out.cells.size(); i = next++) {
      try {
        std::ostringstream cell_log;
        SweepCell& c = out.cells[i];
        const RunOutcome r = run_training(config, kind, c.reg_beta, c.lr, cell_log);
        c.val_metric = r.val_metric;
        c.dir = r.dir;
        std::lock_guard<std::mutex> lock(mu);
        log << cell_log.str();
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int n_workers = std::max(1, std::min<int>(jobs, static_cast<int>(out.cells.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);

  out.best = select_best(out.cells);
  fs::create_directories(config.output_dir);
  std::ostringstream csv;
  csv.precision(17);
  csv << "reg_beta,lr,val_metric,best,run_dir\n";
  for (std::size_t i = 0; i < out.cells.size(); ++i) {
    const SweepCell& c = out.cells[i];
    csv << c.reg_beta << ',' << c.lr << ',' << c.val_metric << ',' << (i == out.best) << ','
        << c.dir.string() << '\n';
  }
  write_text(config.output_dir / ("sweep-" + variant_name(kind) + ".csv"), csv.str());
  return out;
}

}  // namespace csnn
