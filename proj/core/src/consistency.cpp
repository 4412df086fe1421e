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

#include "sslcalib/consistency.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <stdexcept>

namespace sslcalib {
namespace {

double channel_value(const ConsistencyRecord& r, Channel c) {
  switch (c) {
    case Channel::kEns: return r.s_ens;
    case Channel::kTem: return r.s_tem;
    case Channel::kView: return r.s_view;
    case Channel::kConf: return r.s_conf;
  }
  return 0.0;
}

double min_max(double v, const ValueRange& r) {
  const double span = r.max - r.min;
  if (!(span > 0.0)) return 0.0;
  return std::clamp((v - r.min) / span, 0.0, 1.0);
}

}  // namespace

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(std::max(v, kProbabilityFloor));
  }
  return h;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: length mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    const double pi = std::max(p[i], kProbabilityFloor);
    const double qi = std::max(q[i], kProbabilityFloor);
    kl += p[i] * std::log(pi / qi);
  }
  return kl;
}

EnsembleResult ensemble_score(const Classifier& model, const Matrix& x,
                              std::span<const std::size_t> ids, std::size_t passes,
                              double dropout_rate, std::uint64_t seed) {
  if (passes == 0) throw std::invalid_argument("ensemble_score: need at least one pass");
  if (ids.size() != x.rows) throw std::invalid_argument("ensemble_score: one id per row required");
  NoGradGuard no_grad;
  const Tensor h = model.features(x.to_tensor());
  const std::size_t width = h.cols();
  const std::size_t m = model.spec().num_classes;
  EnsembleResult out;
  out.s_ens.resize(x.rows);
  out.mean_distribution = Matrix(x.rows, m);
  auto hd = h.data();
  for (std::size_t i = 0; i < x.rows; ++i) {
    std::vector<double> copies(passes * width);
    for (std::size_t k = 0; k < passes; ++k) {
      std::copy_n(hd.data() + i * width, width, copies.data() + k * width);
    }
    Tensor stacked = Tensor::matrix(passes, width, std::move(copies));
    Tensor probs = softmax(model.head(dropout(stacked, dropout_rate,
                                              derive_seed(seed, "mc-dropout", ids[i]))));
    auto pd = probs.data();
    for (std::size_t k = 0; k < passes; ++k) {
      for (std::size_t c = 0; c < m; ++c) out.mean_distribution.at(i, c) += pd[k * m + c];
    }
    for (std::size_t c = 0; c < m; ++c) out.mean_distribution.at(i, c) /= static_cast<double>(passes);
    out.s_ens[i] = entropy(out.mean_distribution.row(i));
  }
  return out;
}

// ---- history -------------------------------------------------------------------

PredictionHistory::PredictionHistory(std::size_t window) : window_(window) {
  if (window == 0) throw std::invalid_argument("PredictionHistory: window must be >= 1");
}

void PredictionHistory::update(std::size_t example_id, std::vector<double> distribution,
                               std::int64_t stamp) {
  auto& q = entries_[example_id];
  q.push_back({stamp, std::move(distribution)});
  while (q.size() > window_) q.pop_front();
}

const std::deque<HistoryEntry>* PredictionHistory::find(std::size_t example_id) const {
  auto it = entries_.find(example_id);
  return it == entries_.end() ? nullptr : &it->second;
}

std::optional<std::vector<double>> PredictionHistory::mean_past(std::size_t example_id) const {
  const auto* q = find(example_id);
  if (q == nullptr || q->empty()) return std::nullopt;
  std::vector<double> mean(q->front().distribution.size(), 0.0);
  for (const auto& e : *q) {
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += e.distribution[c];
  }
  for (double& v : mean) v /= static_cast<double>(q->size());
  return mean;
}

double temporal_score(std::span<const double> y_t, const PredictionHistory& history,
                      std::size_t example_id) {
  const auto past = history.mean_past(example_id);
  if (!past) return 0.0;
  return kl_divergence(y_t, *past);
}

std::vector<double> view_score(const ModelPair& pair, const Matrix& x) {
  NoGradGuard no_grad;
  const auto out = cross_feature_forward(pair, x.to_tensor());
  const std::size_t m = out.y.cols();
  std::vector<double> scores(x.rows);
  auto y = out.y.data();
  auto ye = out.y_ema.data();
  for (std::size_t i = 0; i < x.rows; ++i) {
    scores[i] = kl_divergence(y.subspan(i * m, m), ye.subspan(i * m, m));
  }
  return scores;
}

// ---- queue ---------------------------------------------------------------------

CalibrationQueue::CalibrationQueue(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("CalibrationQueue: capacity must be positive");
}

void CalibrationQueue::push(const ConsistencyRecord& record) {
  if (records_.size() == capacity_) records_.pop_front();
  records_.push_back(record);
}

ValueRange CalibrationQueue::range(Channel channel) const {
  if (records_.empty()) throw std::logic_error("CalibrationQueue::range: queue is empty");
  ValueRange r{channel_value(records_.front(), channel), channel_value(records_.front(), channel)};
  for (const auto& rec : records_) {
    const double v = channel_value(rec, channel);
    r.min = std::min(r.min, v);
    r.max = std::max(r.max, v);
  }
  return r;
}

std::optional<ValueRange> CalibrationQueue::class_range(int pseudo_label, Channel channel) const {
  std::optional<ValueRange> r;
  for (const auto& rec : records_) {
    if (rec.pseudo_label != pseudo_label) continue;
    const double v = channel_value(rec, channel);
    if (!r) {
      r = ValueRange{v, v};
    } else {
      r->min = std::min(r->min, v);
      r->max = std::max(r->max, v);
    }
  }
  return r;
}

std::size_t CalibrationQueue::class_count(int pseudo_label) const {
  return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(), [&](const auto& r) {
    return r.pseudo_label == pseudo_label;
  }));
}

double fuse(const NormalizedScores& s, const FusionOptions& options) {
  const double conf = options.invert_confidence_channel ? 1.0 - s.conf : s.conf;
  return s.ens * s.ens + s.tem * s.tem + s.view * s.view + conf * conf;
}

CalibrationSnapshot::CalibrationSnapshot(const CalibrationQueue& queue,
                                         const FusionOptions& options)
    : options_(options) {
  if (queue.empty()) throw std::invalid_argument("normalize: calibration queue is empty");
  ens_ = queue.range(Channel::kEns);
  tem_ = queue.range(Channel::kTem);
  view_ = queue.range(Channel::kView);
  for (const auto& rec : queue.records()) {
    const double s = fused(rec);
    auto [it, inserted] = anchors_.try_emplace(rec.pseudo_label);
    ClassAnchors& a = it->second;
    if (inserted) {
      a.min_score = a.max_score = s;
      a.min_conf = a.max_conf = rec.s_conf;
    } else {
      a.min_score = std::min(a.min_score, s);
      a.max_score = std::max(a.max_score, s);
      a.min_conf = std::min(a.min_conf, rec.s_conf);
      a.max_conf = std::max(a.max_conf, rec.s_conf);
    }
    ++a.count;
  }
}

NormalizedScores CalibrationSnapshot::normalize(const ConsistencyRecord& record) const {
  return {min_max(record.s_ens, ens_), min_max(record.s_tem, tem_),
          min_max(record.s_view, view_), record.s_conf};
}

double CalibrationSnapshot::fused(const ConsistencyRecord& record) const {
  return fuse(normalize(record), options_);
}

const ClassAnchors* CalibrationSnapshot::anchors(int pseudo_label) const {
  auto it = anchors_.find(pseudo_label);
  return it == anchors_.end() ? nullptr : &it->second;
}

std::optional<double> CalibrationSnapshot::approx_calibrated(int pseudo_label, double s_u) const {
  const ClassAnchors* a = anchors(pseudo_label);
  if (a == nullptr || a->count < 2) return std::nullopt;
  const double score_span = a->max_score - a->min_score;
  if (!(score_span > 0.0)) return s_u <= a->min_score ? a->max_conf : a->min_conf;
  // std::lerp is exact at both ends and monotone in between.
  const double t = std::clamp((s_u - a->min_score) / score_span, 0.0, 1.0);
  return std::clamp(std::lerp(a->max_conf, a->min_conf, t), a->min_conf, a->max_conf);
}

NormalizedScores normalize(const CalibrationQueue& queue, const ConsistencyRecord& record) {
  return CalibrationSnapshot(queue).normalize(record);
}

std::optional<double> approx_calibrated(const CalibrationQueue& queue,
                                        const ConsistencyRecord& record, double s_u,
                                        const FusionOptions& options) {
  if (queue.empty()) return std::nullopt;
  return CalibrationSnapshot(queue, options).approx_calibrated(record.pseudo_label, s_u);
}

void write_trace_header(std::ostream& out) {
  out << "example_id,epoch,pseudo_label,s_ens,s_tem,s_view,s_conf,"
         "n_ens,n_tem,n_view,n_conf,s_u,r_tilde\n";
}

void write_trace_row(std::ostream& out, const TraceRow& row) {
  const auto& r = row.record;
  const auto& n = row.normalized;
  out << std::setprecision(17) << r.example_id << ',' << r.epoch_stamp << ',' << r.pseudo_label
      << ',' << r.s_ens << ',' << r.s_tem << ',' << r.s_view << ',' << r.s_conf << ',' << n.ens
      << ',' << n.tem << ',' << n.view << ',' << n.conf << ',' << row.s_u << ',' << row.r_tilde
      << '\n';
}

}  // namespace sslcalib
