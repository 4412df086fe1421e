// Copyright 2026 The sslcalib Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sslcalib/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"
#include "sslcalib/checkpoint.hpp"
#include "sslcalib/config.hpp"
#include "sslcalib/infuse.hpp"
#include "sslcalib/report.hpp"
#include "sslcalib/trainer.hpp"

namespace sslcalib::cli {
namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "Experiment config file (key = value)");
  cmd->add_option("--seed", o.seed, "Root seed; overrides the config and SSLCALIB_SEED");
  cmd->add_option("--out", o.out, "Output directory; overrides output_dir");
  cmd->add_option("--set", o.sets, "Override one config key, as key=value (repeatable)");
}

std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv("SSLCALIB_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  const std::string_view s(raw);
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw UsageError("SSLCALIB_SEED must be a non-negative integer, got '" + std::string(s) + "'");
  }
  return v;
}

ExperimentConfig resolve_config(const CommonOptions& o) {
  ExperimentConfig cfg = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    try {
      set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw UsageError(std::string("--set: ") + e.what());
    }
  }
  if (o.seed) {
    cfg.train.seed = *o.seed;
  } else if (auto s = env_seed()) {
    cfg.train.seed = *s;
  }
  if (!o.out.empty()) cfg.output_dir = o.out;
  cfg.validate();
  return cfg;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw std::runtime_error("cannot create output directory '" + dir.string() + "'");
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

Split parse_split(const std::string& name) {
  for (Split s : {Split::kLabeled, Split::kUnlabeled, Split::kValidation, Split::kTest}) {
    if (name == split_name(s)) return s;
  }
  throw std::runtime_error("unknown split tag '" + name + "'");
}

// Config stored next to a checkpoint, if any.
std::optional<ExperimentConfig> sibling_config(const fs::path& checkpoint) {
  const fs::path p = checkpoint.parent_path() / kConfigFile;
  if (!fs::exists(p)) return std::nullopt;
  return load_config(p);
}

// ---- commands --------------------------------------------------------------

int cmd_generate_data(const CommonOptions& o, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(o);
  const Dataset ds = build_dataset(cfg.dataset, cfg.train.seed);
  const fs::path dir = cfg.output_dir;
  ensure_dir(dir);
  write_csv(dir / kFeaturesFile, ds);
  const auto echo = config_echo(cfg);
  write_file(dir / kManifestFile, split_manifest_json(ds, echo));
  save_config(dir / kConfigFile, cfg);
  out << "wrote " << ds.size() << " examples to " << (dir / kFeaturesFile).string() << '\n';
  return kExitOk;
}

struct TrainOptions {
  std::string data;
  std::int64_t checkpoint_every = 0;
  std::optional<std::int64_t> stop_at;
  bool resume = false;
  bool trace = false;
};

int cmd_train(const CommonOptions& o, const TrainOptions& t, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(o);
  const fs::path dir = cfg.output_dir;
  const fs::path data_dir = t.data.empty() ? dir : fs::path(t.data);
  const Dataset ds = load_dataset_dir(data_dir);
  ensure_dir(dir);
  save_config(dir / kConfigFile, cfg);

  Trainer trainer(cfg.train, ds);
  const fs::path ckpt = dir / kCheckpointFile;
  if (t.resume && fs::exists(ckpt)) {
    trainer.restore(load_checkpoint(ckpt));
    out << "resumed at iteration " << trainer.iteration() << '\n';
  }
  std::ofstream trace;
  if (t.trace) {
    trace.open(dir / kTraceFile, std::ios::binary | std::ios::trunc);
    if (!trace) throw std::runtime_error("cannot write '" + (dir / kTraceFile).string() + "'");
    trainer.set_trace_stream(&trace);
  }

  const std::int64_t stop =
      std::min(t.stop_at.value_or(trainer.target_iterations()), trainer.target_iterations());
  while (trainer.iteration() < stop) {
    std::int64_t next = stop;
    if (t.checkpoint_every > 0) next = std::min(stop, trainer.iteration() + t.checkpoint_every);
    trainer.run(next);
    if (trainer.iteration() < stop) trainer.save_checkpoint(ckpt);
  }
  trainer.save_checkpoint(ckpt);

  RunReport report = trainer.report();
  report.config_echo = config_echo(cfg);
  report.config_hash = config_hash(report.config_echo);
  write_run_report(dir / kReportFile, report);
  if (trainer.finished()) {
    const auto& f = report.final_metrics;
    out << "finished " << report.iterations << " iterations: error " << f.error_rate << "%, ECE "
        << f.ece << ", MCE " << f.mce << ", ACE " << f.ace << '\n';
  } else {
    out << "stopped at iteration " << trainer.iteration() << " of " << trainer.target_iterations()
        << '\n';
  }
  return kExitOk;
}

struct EvalOptions {
  std::string checkpoint;
  std::string data;
  std::string config_path;
  std::string out;
};

int cmd_evaluate(const EvalOptions& o, std::ostream& out) {
  const auto records = load_checkpoint(o.checkpoint);
  const Classifier model = load_classifier(records);
  const Dataset ds = load_dataset_dir(o.data);
  std::optional<ExperimentConfig> cfg =
      o.config_path.empty() ? sibling_config(o.checkpoint) : load_config(o.config_path);
  const LabeledSet test = evaluation_set(ds, Split::kTest);
  MetricsSummary summary;
  summary.examples = test.size();
  summary.buckets = cfg ? cfg->train.calibration_buckets : kDefaultBuckets;
  summary.metrics = evaluate_predictions(predict(model, test), summary.buckets);
  if (cfg) summary.config_echo = config_echo(*cfg);
  const std::string text = metrics_json(summary);
  if (!o.out.empty()) write_file(o.out, text);
  out << text;
  return kExitOk;
}

struct ScoreOptions {
  std::string checkpoint;
  std::string data;
  double keep_ratio = 1.0;
  std::string out;
};

int cmd_score_coreset(const CommonOptions& common, const ScoreOptions& o, std::ostream& out) {
  CommonOptions c = common;
  const fs::path sibling = fs::path(o.checkpoint).parent_path() / kConfigFile;
  if (c.config_path.empty() && fs::exists(sibling)) c.config_path = sibling.string();
  const ExperimentConfig cfg = resolve_config(c);
  const auto records = load_checkpoint(o.checkpoint);
  const Classifier model = load_classifier(records);
  const Dataset ds = load_dataset_dir(o.data);
  const TrainingView view = training_view(ds);

  InfuseOptions opts;
  opts.score_batch_size = cfg.train.score_batch_size;
  opts.subset = cfg.train.gradient_subset;
  opts.tau = cfg.train.tau;
  opts.lambda_unlab = cfg.train.lambda_unlab;
  opts.mixup_alpha = cfg.train.mixup_alpha;
  opts.support_pairs = cfg.train.support_size;
  opts.literal_highest_score = cfg.train.literal_highest_score;
  const CoreSet core =
      build_core_set(model, view.labeled, view.unlabeled, o.keep_ratio, opts, cfg.train.seed, 0);

  std::ostringstream csv;
  write_core_set_csv(csv, core);
  if (o.out.empty()) {
    out << csv.str();
  } else {
    write_file(o.out, csv.str());
    out << "selected " << core.selected_ids.size() << " of " << view.unlabeled.size()
        << " unlabeled examples\n";
  }
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& dirs, const std::string& out_dir, std::ostream& out) {
  std::vector<std::pair<std::string, RunReport>> runs;
  for (const auto& d : dirs) {
    const fs::path p = fs::path(d) / kReportFile;
    if (!fs::exists(p)) throw std::runtime_error("run report not found: " + p.string());
    runs.emplace_back(d, read_run_report(p));
  }
  const auto rows = aggregate_reports(runs);
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    std::ostringstream csv;
    write_aggregate_csv(csv, rows);
    write_file(fs::path(out_dir) / "aggregate.csv", csv.str());
  }
  write_aggregate_text(out, rows);
  return kExitOk;
}

}  // namespace

Dataset load_dataset_dir(const fs::path& dir) {
  const fs::path csv = dir / kFeaturesFile;
  const fs::path manifest = dir / kManifestFile;
  if (!fs::exists(csv)) throw std::runtime_error("dataset file not found: " + csv.string());
  if (!fs::exists(manifest)) throw std::runtime_error("dataset file not found: " + manifest.string());
  Dataset ds = read_csv(csv);
  std::ifstream in(manifest, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + manifest.string());
  try {
    const auto j = nlohmann::json::parse(in);
    const auto classes = j.at("num_classes").get<std::size_t>();
    if (classes < ds.num_classes) {
      throw std::runtime_error("num_classes smaller than the largest label");
    }
    ds.num_classes = classes;
    const auto& tags = j.at("splits");
    if (tags.size() != ds.size()) {
      throw std::runtime_error("has " + std::to_string(tags.size()) + " split tags for " +
                               std::to_string(ds.size()) + " examples");
    }
    ds.splits.clear();
    for (const auto& t : tags) ds.splits.push_back(parse_split(t.get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(manifest.string() + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(manifest.string() + ": " + e.what());
  }
  return ds;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semi-supervised training with calibrated pseudo-labels and core-set selection",
               "sslcalib"};
  app.require_subcommand(1);

  CommonOptions gen_opts;
  auto* gen = app.add_subcommand("generate-data", "Write a synthetic dataset and its split manifest");
  add_common(gen, gen_opts);

  CommonOptions train_opts;
  TrainOptions train_extra;
  auto* train = app.add_subcommand("train", "Train a model and write a run report");
  add_common(train, train_opts);
  train->add_option("--data", train_extra.data, "Dataset directory (default: the output directory)");
  train->add_option("--checkpoint-every", train_extra.checkpoint_every,
                    "Save a checkpoint every N iterations")
      ->check(CLI::NonNegativeNumber);
  train->add_option("--stop-at", train_extra.stop_at, "Stop after this iteration (resumable)");
  train->add_flag("--resume", train_extra.resume, "Continue from the checkpoint in the output directory");
  train->add_flag("--trace", train_extra.trace, "Dump per-example consistency scores");

  EvalOptions eval_opts;
  auto* eval = app.add_subcommand("evaluate", "Evaluate a checkpoint on the test split");
  eval->add_option("--checkpoint", eval_opts.checkpoint, "Checkpoint file")->required();
  eval->add_option("--data", eval_opts.data, "Dataset directory")->required();
  eval->add_option("--config", eval_opts.config_path, "Config (default: next to the checkpoint)");
  eval->add_option("--out", eval_opts.out, "Metrics JSON output file");

  CommonOptions score_common;
  ScoreOptions score_opts;
  auto* score = app.add_subcommand("score-coreset", "Score unlabeled examples and dump the core set");
  score->add_option("--checkpoint", score_opts.checkpoint, "Checkpoint file")->required();
  score->add_option("--data", score_opts.data, "Dataset directory")->required();
  score->add_option("--keep-ratio", score_opts.keep_ratio, "Fraction of unlabeled data to keep")
      ->required()
      ->check(CLI::Validator(
          [](std::string& v) -> std::string {
            const double k = std::stod(v);
            return k > 0.0 && k <= 1.0 ? std::string() : "keep ratio must lie in (0, 1]";
          },
          "(0, 1]"));
  score->add_option("--config", score_common.config_path, "Config (default: next to the checkpoint)");
  score->add_option("--seed", score_common.seed, "Root seed");
  score->add_option("--set", score_common.sets, "Override one config key, as key=value");
  score->add_option("--out", score_opts.out, "Core-set CSV output file (default: stdout)");

  std::vector<std::string> run_dirs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Aggregate run reports into a table");
  report->add_option("runs", run_dirs, "Run directories")->required();
  report->add_option("--out", report_out, "Directory for aggregate.csv");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_generate_data(gen_opts, out);
    if (train->parsed()) return cmd_train(train_opts, train_extra, out);
    if (eval->parsed()) return cmd_evaluate(eval_opts, out);
    if (score->parsed()) return cmd_score_coreset(score_common, score_opts, out);
    if (report->parsed()) return cmd_report(run_dirs, report_out, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace sslcalib::cli
