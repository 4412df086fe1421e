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

#ifndef SSLCALIB_TRAINER_HPP_
#define SSLCALIB_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sslcalib/consistency.hpp"
#include "sslcalib/data.hpp"
#include "sslcalib/infuse.hpp"
#include "sslcalib/metrics.hpp"
#include "sslcalib/nn.hpp"

namespace sslcalib {

enum class CoreSetMethod { kInfuse, kRandom };
const char* coreset_method_name(CoreSetMethod m);
CoreSetMethod parse_coreset_method(std::string_view name);

struct TrainConfig {
  std::uint64_t seed = 0;

  // Schedule. Full-size image runs use 2^20 iterations with 64/448 batches.
  std::int64_t total_iterations = 20000;
  std::int64_t epoch_iterations = 500;
  std::int64_t eval_period = 500;
  std::size_t labeled_batch = 16;
  std::size_t unlabeled_batch = 48;
  double eta0 = 0.03;

  // Classifier and pseudo-labeling.
  std::vector<std::size_t> hidden = {64, 64};
  double classifier_dropout = 0.0;
  double tau = 0.95;
  double lambda_unlab = 1.0;
  double ema_beta = 0.001;

  // Consistency scoring.
  std::size_t queue_capacity = 4096;
  std::size_t mc_passes = 8;
  double mc_dropout_rate = 0.3;
  std::size_t temporal_window = 1;
  bool invert_confidence_channel = false;

  // VCC.
  bool vcc_enabled = false;
  double lambda_vcc = 2.0;
  std::size_t z_dim = 16;
  std::vector<std::size_t> vae_hidden = {256, 64};
  std::int64_t warmup_epochs = 5;
  bool negate_kl = false;

  // Core-set selection.
  double keep_ratio = 1.0;
  CoreSetMethod coreset_method = CoreSetMethod::kInfuse;
  std::int64_t refresh_period = 5;
  std::size_t score_batch_size = 16;
  GradientSubset gradient_subset = GradientSubset::kHead;
  bool literal_highest_score = false;
  double mixup_alpha = 1.0;
  std::size_t support_size = 0;

  AugmentationPolicy augmentation;
  std::size_t calibration_buckets = kDefaultBuckets;
  // Compute consistency scores even without VCC (for trace dumps).
  bool record_consistency = false;

  void validate() const;
  // total_iterations scaled by keep_ratio (ceil).
  std::int64_t scaled_iterations() const;
};

// eta0 * cos(7 pi k / (16 K)).
double cosine_lr(std::int64_t iteration, std::int64_t total_iterations, double eta0);

struct UnlabeledLoss {
  Tensor loss;
  double mask_rate = 0.0;
  std::vector<std::uint8_t> mask;
};

// mean_i 1(selection_i >= tau) * CE(argmax weak_conf_i, softmax(strong_logits_i)),
// averaged over the full batch.
UnlabeledLoss fixmatch_unlabeled_loss(const Matrix& weak_conf, const Tensor& strong_logits,
                                      std::span<const double> selection_scores, double tau);

struct StepMetrics {
  std::int64_t iteration = 0;
  double lr = 0.0;
  double loss = 0.0;
  double loss_lab = 0.0;
  double loss_unlab = 0.0;
  double loss_recon = 0.0;
  double loss_kl = 0.0;
  double mask_rate = 0.0;
  // Fraction of the unlabeled batch gated by the VAE output rather than raw
  // confidence.
  double calibrated_fraction = 0.0;
};

struct EvalRecord {
  std::int64_t iteration = 0;
  double error_rate = 0.0;
  double ece = 0.0;
  double mce = 0.0;
  double ace = 0.0;
  double mask_rate = 0.0;
  double lr = 0.0;
};

struct RefreshRecord {
  std::int64_t iteration = 0;
  std::int64_t epoch = 0;
  std::string method;
  std::size_t pool_size = 0;
  std::size_t selected = 0;
  double seconds = 0.0;
};

struct RunReport {
  static constexpr int kSchemaVersion = 1;
  int schema_version = kSchemaVersion;
  std::vector<std::pair<std::string, std::string>> config_echo;
  std::string config_hash;
  std::vector<EvalRecord> evals;
  EvalRecord final_metrics;
  double wall_seconds = 0.0;
  std::vector<RefreshRecord> coreset_refresh_log;
  std::int64_t iterations = 0;
  std::uint64_t unlabeled_consumed = 0;
  std::uint64_t infuse_scoring_passes = 0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// FixMatch-style trainer with optional VCC calibration and INFUSE core sets.
// Deterministic: every random draw comes from a named stream keyed by the
// root seed and the iteration (or epoch) counter.
class Trainer {
 public:
  Trainer(TrainConfig config, const Dataset& dataset);
  ~Trainer();
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  const TrainConfig& config() const { return config_; }
  std::int64_t iteration() const { return iteration_; }
  std::int64_t target_iterations() const { return target_; }
  bool finished() const { return iteration_ >= target_; }

  StepMetrics step();
  // Steps until `stop_at` (default: the scaled target), evaluating every
  // eval_period and at the end.
  RunReport run(std::optional<std::int64_t> stop_at = std::nullopt,
                const std::function<void(const StepMetrics&)>& observer = {});

  EvalRecord evaluate() const;
  PredictionTrace predict_test() const;

  const ModelPair& models() const { return pair_; }
  const VaeNet* vae() const { return vae_.get(); }
  const CalibrationQueue& queue() const { return queue_; }
  const PredictionHistory& history() const { return history_; }
  const std::optional<CoreSet>& core_set() const { return core_set_; }
  const RunReport& report() const { return report_; }
  const TrainingView& view() const { return view_; }

  // Optional per-example consistency trace (CSV).
  void set_trace_stream(std::ostream* out);

  std::vector<NamedTensor> checkpoint_records() const;
  void save_checkpoint(const std::filesystem::path& path) const;
  // Restores all training state; the dataset and config must match.
  void restore(std::span<const NamedTensor> records);

 private:
  StepMetrics step_unchecked();
  void maybe_refresh_core_set();
  void record_eval();

  TrainConfig config_;
  TrainingView view_;
  LabeledSet test_;
  ModelPair pair_;
  std::unique_ptr<VaeNet> vae_;
  CalibrationQueue queue_;
  PredictionHistory history_;
  std::optional<CoreSet> core_set_;
  std::vector<std::size_t> pool_rows_;  // rows of view_.unlabeled in use
  std::int64_t iteration_ = 0;
  std::int64_t target_ = 0;
  double mask_sum_ = 0.0;
  std::int64_t mask_count_ = 0;
  RunReport report_;
  std::ostream* trace_ = nullptr;
};

// Reconstructs the classifier stored in a checkpoint.
Classifier load_classifier(std::span<const NamedTensor> records, const std::string& prefix = "clf");
PredictionTrace predict(const Classifier& model, const LabeledSet& set);
EvalRecord evaluate_predictions(const PredictionTrace& trace, std::size_t buckets);

}  // namespace sslcalib

#endif  // SSLCALIB_TRAINER_HPP_
