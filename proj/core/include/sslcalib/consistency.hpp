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

#ifndef SSLCALIB_CONSISTENCY_HPP_
#define SSLCALIB_CONSISTENCY_HPP_

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "sslcalib/data.hpp"
#include "sslcalib/nn.hpp"

namespace sslcalib {

// Probabilities are floored at this value inside logarithms.
inline constexpr double kProbabilityFloor = 1e-12;

double entropy(std::span<const double> p);
// KL(p || q) with both arguments floored at kProbabilityFloor.
double kl_divergence(std::span<const double> p, std::span<const double> q);

// ---- scores ----------------------------------------------------------------

struct EnsembleResult {
  std::vector<double> s_ens;  // entropy of the mean distribution, per row
  Matrix mean_distribution;   // rows x num_classes
};

// Monte-Carlo dropout ensemble over the classifier head. Backbone features
// are computed once and cloned `passes` times; each clone is passed through
// dropout and the head. Masks are seeded per example id, so the result for a
// row does not depend on its position in the batch.
EnsembleResult ensemble_score(const Classifier& model, const Matrix& x,
                              std::span<const std::size_t> ids, std::size_t passes,
                              double dropout_rate, std::uint64_t seed);

struct HistoryEntry {
  std::int64_t stamp = 0;
  std::vector<double> distribution;
};

// Last `window` confidence distributions seen for each example.
class PredictionHistory {
 public:
  explicit PredictionHistory(std::size_t window = 1);

  std::size_t window() const { return window_; }
  std::size_t size() const { return entries_.size(); }
  void update(std::size_t example_id, std::vector<double> distribution, std::int64_t stamp);
  const std::deque<HistoryEntry>* find(std::size_t example_id) const;
  // Mean of the stored distributions, or nullopt when the example is new.
  std::optional<std::vector<double>> mean_past(std::size_t example_id) const;
  const std::map<std::size_t, std::deque<HistoryEntry>>& entries() const { return entries_; }

 private:
  std::size_t window_;
  std::map<std::size_t, std::deque<HistoryEntry>> entries_;
};

// KL(y_t || mean of past distributions); 0 when there is no history yet.
double temporal_score(std::span<const double> y_t, const PredictionHistory& history,
                      std::size_t example_id);

// Per-row KL(y || y_ema) of the cross-feature outputs.
std::vector<double> view_score(const ModelPair& pair, const Matrix& x);

// ---- calibration queue -------------------------------------------------------

struct ConsistencyRecord {
  std::size_t example_id = 0;
  int pseudo_label = 0;
  double s_ens = 0.0;
  double s_tem = 0.0;
  double s_view = 0.0;
  double s_conf = 0.0;
  std::int64_t epoch_stamp = 0;
};

enum class Channel { kEns, kTem, kView, kConf };

struct ValueRange {
  double min = 0.0;
  double max = 0.0;
};

// Fixed-capacity FIFO of consistency records.
class CalibrationQueue {
 public:
  explicit CalibrationQueue(std::size_t capacity = 4096);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::deque<ConsistencyRecord>& records() const { return records_; }

  void push(const ConsistencyRecord& record);
  ValueRange range(Channel channel) const;
  // Range restricted to records with the given pseudo-label; nullopt if none.
  std::optional<ValueRange> class_range(int pseudo_label, Channel channel) const;
  std::size_t class_count(int pseudo_label) const;

 private:
  std::size_t capacity_;
  std::deque<ConsistencyRecord> records_;
};

struct NormalizedScores {
  double ens = 0.0;
  double tem = 0.0;
  double view = 0.0;
  double conf = 0.0;
};

struct FusionOptions {
  // Substitute (1 - conf) for the confidence channel before squaring.
  bool invert_confidence_channel = false;
};

// Sum of squares of the four normalized channels.
double fuse(const NormalizedScores& s, const FusionOptions& options = {});

struct ClassAnchors {
  std::size_t count = 0;
  double min_score = 0.0;
  double max_score = 0.0;
  double min_conf = 0.0;
  double max_conf = 0.0;
};

// Queue statistics frozen at one point in time: global min/max of the three
// consistency channels and, per pseudo-label, the interpolation anchors.
class CalibrationSnapshot {
 public:
  CalibrationSnapshot(const CalibrationQueue& queue, const FusionOptions& options = {});

  // Max-min normalization of ens/tem/view over the whole queue, clamped to
  // [0, 1]; a degenerate range maps to 0. conf passes through.
  NormalizedScores normalize(const ConsistencyRecord& record) const;
  double fused(const ConsistencyRecord& record) const;
  // Interpolated calibrated confidence, or nullopt when fewer than two queue
  // records share the pseudo-label (caller should fall back to raw s_conf).
  std::optional<double> approx_calibrated(int pseudo_label, double s_u) const;
  const ClassAnchors* anchors(int pseudo_label) const;

 private:
  FusionOptions options_;
  ValueRange ens_, tem_, view_;
  std::map<int, ClassAnchors> anchors_;
};

NormalizedScores normalize(const CalibrationQueue& queue, const ConsistencyRecord& record);
std::optional<double> approx_calibrated(const CalibrationQueue& queue,
                                        const ConsistencyRecord& record, double s_u,
                                        const FusionOptions& options = {});

// ---- trace dump ------------------------------------------------------------

struct TraceRow {
  ConsistencyRecord record;
  NormalizedScores normalized;
  double s_u = 0.0;
  double r_tilde = 0.0;
};

void write_trace_header(std::ostream& out);
void write_trace_row(std::ostream& out, const TraceRow& row);

}  // namespace sslcalib

#endif  // SSLCALIB_CONSISTENCY_HPP_
