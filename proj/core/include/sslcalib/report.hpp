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

#ifndef SSLCALIB_REPORT_HPP_
#define SSLCALIB_REPORT_HPP_

#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sslcalib/data.hpp"
#include "sslcalib/trainer.hpp"

namespace sslcalib {

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// JSON text for a run report; parse_run_report is its exact inverse.
std::string run_report_json(const RunReport& report);
RunReport parse_run_report(const std::string& json_text);
void write_run_report(const std::filesystem::path& path, const RunReport& report);
RunReport read_run_report(const std::filesystem::path& path);

// Reports equal in every field except wall-clock timings.
bool same_trajectory(const RunReport& a, const RunReport& b);

// Standalone evaluation result written by the evaluate command.
struct MetricsSummary {
  static constexpr int kSchemaVersion = 1;
  int schema_version = kSchemaVersion;
  std::size_t examples = 0;
  std::size_t buckets = kDefaultBuckets;
  EvalRecord metrics;
  std::vector<std::pair<std::string, std::string>> config_echo;
};
std::string metrics_json(const MetricsSummary& summary);
MetricsSummary parse_metrics_json(const std::string& json_text);

// Split counts written next to the features CSV.
std::string split_manifest_json(const Dataset& ds,
                                const std::vector<std::pair<std::string, std::string>>& echo);

// ---- aggregation -----------------------------------------------------------

struct MeanStd {
  double mean = 0.0;
  std::optional<double> std;  // sample std; empty for a single run
};
MeanStd mean_std(const std::vector<double>& values);

struct AggregateRow {
  std::string config_hash;
  std::vector<std::string> runs;
  MeanStd error_rate, ece, mce, ace, wall_seconds, mask_rate;
};

// Groups reports by config hash, preserving first-seen order. Refuses
// reports whose schema version differs from the first.
std::vector<AggregateRow> aggregate_reports(const std::vector<std::pair<std::string, RunReport>>& runs);
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);
void write_aggregate_text(std::ostream& out, const std::vector<AggregateRow>& rows);

}  // namespace sslcalib

#endif  // SSLCALIB_REPORT_HPP_
