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

#include "sslcalib/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "sslcalib/vcc.hpp"

namespace sslcalib {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Tensor one_hot_tensor(std::span<const int> labels, std::size_t num_classes) {
  std::vector<double> v(labels.size() * num_classes, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    v[i * num_classes + static_cast<std::size_t>(labels[i])] = 1.0;
  }
  return Tensor::matrix(labels.size(), num_classes, std::move(v));
}

Tensor vector_tensor(const std::vector<double>& v) { return Tensor::vector(v); }

std::vector<double> to_vector(const std::vector<std::size_t>& v) {
  return {v.begin(), v.end()};
}

Tensor rows_tensor(std::size_t width, const std::vector<double>& flat) {
  return Tensor::matrix(flat.size() / width, width, flat);
}

}  // namespace

const char* coreset_method_name(CoreSetMethod m) {
  return m == CoreSetMethod::kInfuse ? "infuse" : "random";
}

CoreSetMethod parse_coreset_method(std::string_view name) {
  if (name == "infuse") return CoreSetMethod::kInfuse;
  if (name == "random") return CoreSetMethod::kRandom;
  throw std::invalid_argument("unknown core-set method '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("TrainConfig: " + msg); };
  if (total_iterations < 1) fail("total_iterations must be >= 1");
  if (epoch_iterations < 1) fail("epoch_iterations must be >= 1");
  if (eval_period < 1) fail("eval_period must be >= 1");
  if (labeled_batch < 1 || unlabeled_batch < 1) fail("batch sizes must be >= 1");
  if (!(eta0 > 0.0)) fail("eta0 must be positive");
  if (!(tau > 0.0 && tau < 1.0)) fail("tau must lie in (0, 1)");
  if (lambda_unlab < 0.0 || lambda_vcc < 0.0) fail("loss weights must be non-negative");
  if (!(ema_beta >= 0.0 && ema_beta <= 1.0)) fail("ema_beta must lie in [0, 1]");
  if (!(classifier_dropout >= 0.0 && classifier_dropout < 1.0)) fail("classifier_dropout must lie in [0, 1)");
  if (!(mc_dropout_rate >= 0.0 && mc_dropout_rate < 1.0)) fail("mc_dropout_rate must lie in [0, 1)");
  if (mc_passes < 1) fail("mc_passes must be >= 1");
  if (queue_capacity < 1) fail("queue_capacity must be >= 1");
  if (temporal_window < 1) fail("temporal_window must be >= 1");
  if (z_dim < 1 || vae_hidden.empty()) fail("z_dim and vae_hidden must be non-empty");
  if (!(keep_ratio > 0.0 && keep_ratio <= 1.0)) fail("keep_ratio must lie in (0, 1]");
  if (refresh_period < 1) fail("refresh_period must be >= 1");
  if (score_batch_size < 1) fail("score_batch_size must be >= 1");
  if (!(mixup_alpha > 0.0)) fail("mixup_alpha must be positive");
  if (calibration_buckets < 1) fail("calibration_buckets must be >= 1");
  augmentation.validate();
}

std::int64_t TrainConfig::scaled_iterations() const {
  if (keep_ratio >= 1.0) return total_iterations;
  return std::max<std::int64_t>(
      1, static_cast<std::int64_t>(core_set_size(static_cast<std::size_t>(total_iterations), keep_ratio)));
}

double cosine_lr(std::int64_t iteration, std::int64_t total_iterations, double eta0) {
  if (total_iterations < 1 || iteration < 0 || iteration > total_iterations) {
    throw std::invalid_argument("cosine_lr: need 0 <= iteration <= total_iterations");
  }
  return eta0 * std::cos(7.0 * std::numbers::pi * static_cast<double>(iteration) /
                         (16.0 * static_cast<double>(total_iterations)));
}

UnlabeledLoss fixmatch_unlabeled_loss(const Matrix& weak_conf, const Tensor& strong_logits,
                                      std::span<const double> selection_scores, double tau) {
  const std::size_t b = weak_conf.rows, m = weak_conf.cols;
  if (strong_logits.rows() != b || strong_logits.cols() != m || selection_scores.size() != b) {
    throw ShapeError("fixmatch_unlabeled_loss: weak " + shape_to_string({b, m}) + ", strong " +
                     shape_to_string(strong_logits.shape()) + ", scores " +
                     std::to_string(selection_scores.size()));
  }
  UnlabeledLoss out;
  out.mask = select_pseudo_labels(selection_scores, tau);
  Matrix targets(b, m);
  std::size_t selected = 0;
  for (std::size_t i = 0; i < b; ++i) {
    if (!out.mask[i]) continue;
    auto row = weak_conf.row(i);
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    targets.at(i, best) = 1.0;
    ++selected;
  }
  out.mask_rate = static_cast<double>(selected) / static_cast<double>(b);
  out.loss = soft_cross_entropy(strong_logits, targets.to_tensor());
  return out;
}

// ---- Trainer -----------------------------------------------------------------

Trainer::Trainer(TrainConfig config, const Dataset& dataset)
    : config_(std::move(config)),
      view_(training_view(dataset)),
      test_(evaluation_set(dataset, Split::kTest)),
      pair_([&] {
        config_.validate();
        Rng init(config_.seed, "init");
        return ModelPair::create(
            ClassifierSpec{dataset.features.cols, config_.hidden, dataset.num_classes},
            config_.ema_beta, init);
      }()),
      queue_(config_.queue_capacity),
      history_(config_.temporal_window) {
  if (view_.labeled.size() == 0 || view_.unlabeled.size() == 0) {
    throw std::invalid_argument("Trainer: dataset needs labeled and unlabeled examples");
  }
  if (config_.vcc_enabled) {
    Rng init(config_.seed, "vae-init");
    vae_ = std::make_unique<VaeNet>(
        VaeSpec{dataset.num_classes, dataset.features.cols, config_.z_dim, config_.vae_hidden}, init);
  }
  target_ = config_.scaled_iterations();
  pool_rows_.resize(view_.unlabeled.size());
  for (std::size_t i = 0; i < pool_rows_.size(); ++i) pool_rows_[i] = i;
}

Trainer::~Trainer() = default;

void Trainer::set_trace_stream(std::ostream* out) {
  trace_ = out;
  if (trace_ != nullptr) write_trace_header(*trace_);
}

void Trainer::maybe_refresh_core_set() {
  if (config_.keep_ratio >= 1.0) return;
  if (iteration_ % config_.epoch_iterations != 0) return;
  const std::int64_t epoch = iteration_ / config_.epoch_iterations;
  if (!refresh_schedule(epoch, config_.refresh_period)) return;
  const auto start = Clock::now();
  if (config_.coreset_method == CoreSetMethod::kInfuse) {
    InfuseOptions opts;
    opts.score_batch_size = config_.score_batch_size;
    opts.subset = config_.gradient_subset;
    opts.tau = config_.tau;
    opts.lambda_unlab = config_.lambda_unlab;
    opts.mixup_alpha = config_.mixup_alpha;
    opts.support_pairs = config_.support_size;
    opts.literal_highest_score = config_.literal_highest_score;
    core_set_ = build_core_set(pair_.live, view_.labeled, view_.unlabeled, config_.keep_ratio, opts,
                               config_.seed, epoch);
    ++report_.infuse_scoring_passes;
  } else {
    Rng rng(config_.seed, "random-coreset", static_cast<std::uint64_t>(epoch));
    core_set_ = random_core_set(view_.unlabeled.ids, config_.keep_ratio, rng, epoch);
  }
  pool_rows_.clear();
  const auto& ids = view_.unlabeled.ids;  // ascending
  for (auto id : core_set_->selected_ids) {
    pool_rows_.push_back(static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin()));
  }
  report_.coreset_refresh_log.push_back({iteration_, epoch, coreset_method_name(config_.coreset_method),
                                         view_.unlabeled.size(), pool_rows_.size(),
                                         seconds_since(start)});
}

StepMetrics Trainer::step() {
  if (finished()) throw std::logic_error("Trainer::step: training already finished");
  try {
    return step_unchecked();
  } catch (const NumericError& e) {
    throw TrainingError("iteration " + std::to_string(iteration_) + ": " + e.what());
  }
}

StepMetrics Trainer::step_unchecked() {
  maybe_refresh_core_set();
  const std::int64_t it = iteration_;
  const auto uit = static_cast<std::uint64_t>(it);
  const std::uint64_t seed = config_.seed;
  const std::size_t m = view_.num_classes;
  const std::size_t bl = config_.labeled_batch, bu = config_.unlabeled_batch;
  const std::int64_t epoch = it / config_.epoch_iterations;

  StepMetrics metrics;
  metrics.iteration = it;
  metrics.lr = cosine_lr(it, target_, config_.eta0);

  Rng batch_rng(seed, "batch", uit);
  std::vector<std::size_t> lrows(bl), urows(bu);
  for (auto& r : lrows) r = batch_rng.below(view_.labeled.size());
  for (auto& r : urows) r = pool_rows_[batch_rng.below(pool_rows_.size())];
  std::vector<int> labels;
  for (auto r : lrows) labels.push_back(view_.labeled.labels[r]);
  std::vector<std::size_t> ids;
  for (auto r : urows) ids.push_back(view_.unlabeled.ids[r]);

  Rng aug(seed, "augment", uit);
  const Matrix xl = augment_weak(view_.labeled.features.gather(lrows), config_.augmentation, aug);
  const Matrix xu = view_.unlabeled.features.gather(urows);
  const Matrix xw = augment_weak(xu, config_.augmentation, aug);
  const Matrix xs = augment_strong(xu, config_.augmentation, aug);

  Matrix weak_conf(bu, m);
  std::vector<double> conf(bu);
  std::vector<int> pseudo(bu);
  {
    NoGradGuard no_grad;
    const Tensor q = softmax(pair_.live.forward(xw.to_tensor()));
    std::copy(q.data().begin(), q.data().end(), weak_conf.values.begin());
    for (std::size_t i = 0; i < bu; ++i) {
      auto row = weak_conf.row(i);
      const auto best = std::max_element(row.begin(), row.end());
      conf[i] = *best;
      pseudo[i] = static_cast<int>(best - row.begin());
    }
  }

  std::vector<double> selection = conf;
  std::vector<double> r_tilde = conf;
  std::vector<std::uint8_t> fallback(bu, 1);
  if (config_.vcc_enabled || config_.record_consistency) {
    const auto ens = ensemble_score(pair_.live, xw, ids, config_.mc_passes,
                                    config_.mc_dropout_rate, derive_seed(seed, "mc-dropout", uit));
    std::vector<double> tem(bu);
    for (std::size_t i = 0; i < bu; ++i) tem[i] = temporal_score(weak_conf.row(i), history_, ids[i]);
    const auto view = view_score(pair_, xw);
    std::vector<ConsistencyRecord> records(bu);
    for (std::size_t i = 0; i < bu; ++i) {
      auto row = weak_conf.row(i);
      history_.update(ids[i], {row.begin(), row.end()}, it);
      records[i] = {ids[i], pseudo[i], ens.s_ens[i], tem[i], view[i], conf[i], epoch};
      queue_.push(records[i]);
    }
    const CalibrationSnapshot snapshot(queue_, {config_.invert_confidence_channel});
    for (std::size_t i = 0; i < bu; ++i) {
      const NormalizedScores n = snapshot.normalize(records[i]);
      const double s_u = fuse(n, {config_.invert_confidence_channel});
      const auto approx = snapshot.approx_calibrated(pseudo[i], s_u);
      if (approx) {
        r_tilde[i] = *approx;
        fallback[i] = 0;
      }
      if (trace_ != nullptr) write_trace_row(*trace_, {records[i], n, s_u, r_tilde[i]});
    }
  }

  Tensor l_lab = soft_cross_entropy(
      pair_.live.forward(xl.to_tensor(), config_.classifier_dropout, true,
                         derive_seed(seed, "dropout", uit)),
      one_hot_tensor(labels, m));

  VccLossTerms terms;
  terms.lambda_vcc = config_.lambda_vcc;
  terms.lambda_unlab = config_.lambda_unlab;
  std::size_t calibrated = 0;
  if (vae_) {
    const Tensor c = weak_conf.to_tensor();
    const Tensor x = xw.to_tensor();
    const Posterior post = vae_->encode(c, x);
    Rng noise(seed, "vae-noise", uit);
    std::vector<double> eps(bu * config_.z_dim);
    for (double& e : eps) e = noise.normal();
    const Tensor z = reparameterize(post.mu, post.sigma, Tensor::matrix(bu, config_.z_dim, eps));
    const Tensor r = vae_->decode(c, z, x);
    terms.recon = recon_loss(r, Tensor::matrix(bu, 1, r_tilde));
    terms.kl = kl_closed_form(post.mu, post.sigma);
    metrics.loss_recon = terms.recon.item();
    metrics.loss_kl = terms.kl.item();
    if (epoch >= config_.warmup_epochs) {
      for (std::size_t i = 0; i < bu; ++i) {
        if (fallback[i]) continue;
        selection[i] = r.data()[i];
        ++calibrated;
      }
    }
  }
  metrics.calibrated_fraction = static_cast<double>(calibrated) / static_cast<double>(bu);

  const Tensor strong_logits = pair_.live.forward(
      xs.to_tensor(), config_.classifier_dropout, true, derive_seed(seed, "dropout-strong", uit));
  UnlabeledLoss ul = fixmatch_unlabeled_loss(weak_conf, strong_logits, selection, config_.tau);
  Tensor total = total_loss(l_lab, ul.loss, terms, config_.negate_kl);

  metrics.loss = total.item();
  metrics.loss_lab = l_lab.item();
  metrics.loss_unlab = ul.loss.item();
  metrics.mask_rate = ul.mask_rate;

  backward(total);
  std::vector<Tensor> params = pair_.live.parameters();
  if (vae_ && config_.lambda_vcc > 0.0) {
    auto vp = vae_->parameters();
    params.insert(params.end(), vp.begin(), vp.end());
  }
  sgd_step(params, metrics.lr);
  ema_update(pair_);

  ++iteration_;
  mask_sum_ += metrics.mask_rate;
  ++mask_count_;
  report_.iterations = iteration_;
  report_.unlabeled_consumed += bu;
  return metrics;
}

PredictionTrace predict(const Classifier& model, const LabeledSet& set) {
  if (set.size() == 0) throw std::invalid_argument("predict: empty evaluation set");
  NoGradGuard no_grad;
  const Tensor p = softmax(model.forward(set.features.to_tensor()));
  const std::size_t m = p.cols();
  PredictionTrace trace(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto row = p.data().subspan(i * m, m);
    const auto best = std::max_element(row.begin(), row.end());
    trace[i] = {*best, static_cast<int>(best - row.begin()), set.labels[i]};
  }
  return trace;
}

EvalRecord evaluate_predictions(const PredictionTrace& trace, std::size_t buckets) {
  EvalRecord e;
  e.error_rate = error_rate(trace);
  e.ece = ece(trace, buckets);
  e.mce = mce(trace, buckets);
  e.ace = ace(trace, std::min(buckets, trace.size()));
  return e;
}

PredictionTrace Trainer::predict_test() const { return predict(pair_.live, test_); }

EvalRecord Trainer::evaluate() const {
  EvalRecord e = evaluate_predictions(predict_test(), config_.calibration_buckets);
  e.iteration = iteration_;
  e.lr = cosine_lr(std::min(iteration_, target_), target_, config_.eta0);
  return e;
}

void Trainer::record_eval() {
  EvalRecord e = evaluate();
  e.mask_rate = mask_count_ > 0 ? mask_sum_ / static_cast<double>(mask_count_) : 0.0;
  mask_sum_ = 0.0;
  mask_count_ = 0;
  report_.evals.push_back(e);
}

RunReport Trainer::run(std::optional<std::int64_t> stop_at,
                       const std::function<void(const StepMetrics&)>& observer) {
  const auto start = Clock::now();
  const std::int64_t stop = std::min(stop_at.value_or(target_), target_);
  while (iteration_ < stop) {
    const StepMetrics m = step();
    if (observer) observer(m);
    if (iteration_ % config_.eval_period == 0 || iteration_ == target_) record_eval();
  }
  report_.wall_seconds += seconds_since(start);
  if (finished() && !report_.evals.empty()) report_.final_metrics = report_.evals.back();
  return report_;
}

// ---- checkpointing ---------------------------------------------------------------

std::vector<NamedTensor> Trainer::checkpoint_records() const {
  std::vector<NamedTensor> out;
  const auto& spec = pair_.live.spec();
  std::vector<double> arch = {static_cast<double>(spec.input_dim),
                              static_cast<double>(spec.num_classes)};
  for (auto h : spec.hidden) arch.push_back(static_cast<double>(h));
  out.push_back({"meta/arch", vector_tensor(arch)});
  for (auto& r : pair_.live.named_parameters("clf")) out.push_back(r);
  for (auto& r : pair_.ema.named_parameters("ema")) out.push_back(r);
  if (vae_) {
    for (auto& r : vae_->named_parameters("vae")) out.push_back(r);
  }
  out.push_back({"state/iteration", Tensor::scalar(static_cast<double>(iteration_))});
  out.push_back({"state/counters",
                 vector_tensor({mask_sum_, static_cast<double>(mask_count_),
                                static_cast<double>(report_.unlabeled_consumed),
                                static_cast<double>(report_.infuse_scoring_passes)})});
  if (!queue_.empty()) {
    std::vector<double> flat;
    for (const auto& r : queue_.records()) {
      flat.insert(flat.end(), {static_cast<double>(r.example_id), static_cast<double>(r.pseudo_label),
                               r.s_ens, r.s_tem, r.s_view, r.s_conf,
                               static_cast<double>(r.epoch_stamp)});
    }
    out.push_back({"state/queue", rows_tensor(7, flat)});
  }
  if (history_.size() > 0) {
    const std::size_t k = history_.window(), m = view_.num_classes;
    const std::size_t width = 2 + k * (1 + m);
    std::vector<double> flat;
    for (const auto& [id, entries] : history_.entries()) {
      std::vector<double> row(width, 0.0);
      row[0] = static_cast<double>(id);
      row[1] = static_cast<double>(entries.size());
      for (std::size_t e = 0; e < entries.size(); ++e) {
        row[2 + e * (1 + m)] = static_cast<double>(entries[e].stamp);
        std::copy(entries[e].distribution.begin(), entries[e].distribution.end(),
                  row.begin() + static_cast<std::ptrdiff_t>(3 + e * (1 + m)));
      }
      flat.insert(flat.end(), row.begin(), row.end());
    }
    out.push_back({"state/history", rows_tensor(width, flat)});
  }
  if (core_set_) {
    out.push_back({"state/coreset_meta",
                   vector_tensor({core_set_->keep_ratio, static_cast<double>(core_set_->built_at_epoch)})});
    out.push_back({"state/coreset_selected", vector_tensor(to_vector(core_set_->selected_ids))});
    if (!core_set_->scores.empty()) {
      std::vector<double> flat;
      for (const auto& [id, s] : core_set_->scores) flat.insert(flat.end(), {static_cast<double>(id), s});
      out.push_back({"state/coreset_scores", rows_tensor(2, flat)});
    }
  }
  if (!report_.evals.empty()) {
    std::vector<double> flat;
    for (const auto& e : report_.evals) {
      flat.insert(flat.end(), {static_cast<double>(e.iteration), e.error_rate, e.ece, e.mce, e.ace,
                               e.mask_rate, e.lr});
    }
    out.push_back({"state/evals", rows_tensor(7, flat)});
  }
  if (!report_.coreset_refresh_log.empty()) {
    std::vector<double> flat;
    for (const auto& r : report_.coreset_refresh_log) {
      flat.insert(flat.end(), {static_cast<double>(r.iteration), static_cast<double>(r.epoch),
                               static_cast<double>(parse_coreset_method(r.method)),
                               static_cast<double>(r.pool_size), static_cast<double>(r.selected),
                               r.seconds});
    }
    out.push_back({"state/refresh_log", rows_tensor(6, flat)});
  }
  return out;
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  sslcalib::save_checkpoint(path, checkpoint_records());
}

void Trainer::restore(std::span<const NamedTensor> records) {
  auto has = [&](std::string_view name) {
    return std::any_of(records.begin(), records.end(), [&](const auto& r) { return r.name == name; });
  };
  pair_.live.load(records, "clf");
  pair_.ema.load(records, "ema");
  if (vae_) vae_->load(records, "vae");
  iteration_ = static_cast<std::int64_t>(find_record(records, "state/iteration").item());
  const auto counters = find_record(records, "state/counters").data();
  if (counters.size() != 4) throw CheckpointError("checkpoint: record 'state/counters' malformed");
  mask_sum_ = counters[0];
  mask_count_ = static_cast<std::int64_t>(counters[1]);
  report_ = RunReport{};
  report_.iterations = iteration_;
  report_.unlabeled_consumed = static_cast<std::uint64_t>(counters[2]);
  report_.infuse_scoring_passes = static_cast<std::uint64_t>(counters[3]);

  queue_ = CalibrationQueue(config_.queue_capacity);
  if (has("state/queue")) {
    const Tensor& q = find_record(records, "state/queue");
    if (q.cols() != 7) throw CheckpointError("checkpoint: record 'state/queue' malformed");
    for (std::size_t i = 0; i < q.rows(); ++i) {
      queue_.push({static_cast<std::size_t>(q.at(i, 0)), static_cast<int>(q.at(i, 1)), q.at(i, 2),
                   q.at(i, 3), q.at(i, 4), q.at(i, 5), static_cast<std::int64_t>(q.at(i, 6))});
    }
  }
  history_ = PredictionHistory(config_.temporal_window);
  if (has("state/history")) {
    const Tensor& h = find_record(records, "state/history");
    const std::size_t m = view_.num_classes;
    if (h.cols() != 2 + history_.window() * (1 + m)) {
      throw CheckpointError("checkpoint: record 'state/history' malformed");
    }
    for (std::size_t i = 0; i < h.rows(); ++i) {
      const auto id = static_cast<std::size_t>(h.at(i, 0));
      const auto count = static_cast<std::size_t>(h.at(i, 1));
      for (std::size_t e = 0; e < count; ++e) {
        std::vector<double> dist(m);
        for (std::size_t c = 0; c < m; ++c) dist[c] = h.at(i, 3 + e * (1 + m) + c);
        history_.update(id, std::move(dist), static_cast<std::int64_t>(h.at(i, 2 + e * (1 + m))));
      }
    }
  }
  core_set_.reset();
  pool_rows_.resize(view_.unlabeled.size());
  for (std::size_t i = 0; i < pool_rows_.size(); ++i) pool_rows_[i] = i;
  if (has("state/coreset_meta")) {
    const auto meta = find_record(records, "state/coreset_meta").data();
    CoreSet core;
    core.keep_ratio = meta[0];
    core.built_at_epoch = static_cast<std::int64_t>(meta[1]);
    for (double v : find_record(records, "state/coreset_selected").data()) {
      core.selected_ids.push_back(static_cast<std::size_t>(v));
    }
    if (has("state/coreset_scores")) {
      const Tensor& s = find_record(records, "state/coreset_scores");
      for (std::size_t i = 0; i < s.rows(); ++i) core.scores[static_cast<std::size_t>(s.at(i, 0))] = s.at(i, 1);
    }
    pool_rows_.clear();
    const auto& ids = view_.unlabeled.ids;
    for (auto id : core.selected_ids) {
      pool_rows_.push_back(static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin()));
    }
    core_set_ = std::move(core);
  }
  if (has("state/evals")) {
    const Tensor& ev = find_record(records, "state/evals");
    for (std::size_t i = 0; i < ev.rows(); ++i) {
      report_.evals.push_back({static_cast<std::int64_t>(ev.at(i, 0)), ev.at(i, 1), ev.at(i, 2),
                               ev.at(i, 3), ev.at(i, 4), ev.at(i, 5), ev.at(i, 6)});
    }
    if (finished() && !report_.evals.empty()) report_.final_metrics = report_.evals.back();
  }
  if (has("state/refresh_log")) {
    const Tensor& log = find_record(records, "state/refresh_log");
    if (log.cols() != 6) throw CheckpointError("checkpoint: record 'state/refresh_log' malformed");
    for (std::size_t i = 0; i < log.rows(); ++i) {
      report_.coreset_refresh_log.push_back(
          {static_cast<std::int64_t>(log.at(i, 0)), static_cast<std::int64_t>(log.at(i, 1)),
           coreset_method_name(static_cast<CoreSetMethod>(static_cast<int>(log.at(i, 2)))),
           static_cast<std::size_t>(log.at(i, 3)), static_cast<std::size_t>(log.at(i, 4)),
           log.at(i, 5)});
    }
  }
}

Classifier load_classifier(std::span<const NamedTensor> records, const std::string& prefix) {
  const auto arch = find_record(records, "meta/arch").data();
  if (arch.size() < 2) throw CheckpointError("checkpoint: record 'meta/arch' malformed");
  ClassifierSpec spec;
  spec.input_dim = static_cast<std::size_t>(arch[0]);
  spec.num_classes = static_cast<std::size_t>(arch[1]);
  spec.hidden.clear();
  for (std::size_t i = 2; i < arch.size(); ++i) spec.hidden.push_back(static_cast<std::size_t>(arch[i]));
  Rng rng(0);
  Classifier model(spec, rng);
  model.load(records, prefix);
  return model;
}

}  // namespace sslcalib
