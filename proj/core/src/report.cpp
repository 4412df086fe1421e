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

#include "sslcalib/report.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <vector>

#include "json.hpp"

namespace sslcalib {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json echo_json(const std::vector<std::pair<std::string, std::string>>& echo) {
  ordered_json out = ordered_json::object();
  for (const auto& [k, v] : echo) out[k] = v;
  return out;
}

std::vector<std::pair<std::string, std::string>> echo_from(const ordered_json& j) {
  std::vector<std::pair<std::string, std::string>> out;
  for (auto it = j.begin(); it != j.end(); ++it) out.emplace_back(it.key(), it.value().get<std::string>());
  return out;
}

ordered_json eval_json(const EvalRecord& e) {
  return ordered_json{{"iteration", e.iteration}, {"error_rate", e.error_rate}, {"ece", e.ece},
                      {"mce", e.mce},             {"ace", e.ace},               {"mask_rate", e.mask_rate},
                      {"lr", e.lr}};
}

EvalRecord eval_from(const ordered_json& j) {
  EvalRecord e;
  e.iteration = j.at("iteration").get<std::int64_t>();
  e.error_rate = j.at("error_rate").get<double>();
  e.ece = j.at("ece").get<double>();
  e.mce = j.at("mce").get<double>();
  e.ace = j.at("ace").get<double>();
  e.mask_rate = j.at("mask_rate").get<double>();
  e.lr = j.at("lr").get<double>();
  return e;
}

bool same_eval(const EvalRecord& a, const EvalRecord& b) {
  return a.iteration == b.iteration && a.error_rate == b.error_rate && a.ece == b.ece &&
         a.mce == b.mce && a.ace == b.ace && a.mask_rate == b.mask_rate && a.lr == b.lr;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ReportError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ReportError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw ReportError("failed writing '" + path.string() + "'");
}

}  // namespace

std::string run_report_json(const RunReport& r) {
  ordered_json j;
  j["schema_version"] = r.schema_version;
  j["config_hash"] = r.config_hash;
  j["config"] = echo_json(r.config_echo);
  j["evals"] = ordered_json::array();
  for (const auto& e : r.evals) j["evals"].push_back(eval_json(e));
  j["final"] = eval_json(r.final_metrics);
  j["wall_seconds"] = r.wall_seconds;
  j["iterations"] = r.iterations;
  j["unlabeled_consumed"] = r.unlabeled_consumed;
  j["infuse_scoring_passes"] = r.infuse_scoring_passes;
  j["coreset_refresh_log"] = ordered_json::array();
  for (const auto& c : r.coreset_refresh_log) {
    j["coreset_refresh_log"].push_back(ordered_json{{"iteration", c.iteration},
                                                    {"epoch", c.epoch},
                                                    {"method", c.method},
                                                    {"pool_size", c.pool_size},
                                                    {"selected", c.selected},
                                                    {"seconds", c.seconds}});
  }
  return j.dump(2) + "\n";
}

RunReport parse_run_report(const std::string& text) {
  try {
    const auto j = ordered_json::parse(text);
    RunReport r;
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != RunReport::kSchemaVersion) {
      throw ReportError("unsupported report schema version " + std::to_string(r.schema_version));
    }
    r.config_hash = j.at("config_hash").get<std::string>();
    r.config_echo = echo_from(j.at("config"));
    for (const auto& e : j.at("evals")) r.evals.push_back(eval_from(e));
    r.final_metrics = eval_from(j.at("final"));
    r.wall_seconds = j.at("wall_seconds").get<double>();
    r.iterations = j.at("iterations").get<std::int64_t>();
    r.unlabeled_consumed = j.at("unlabeled_consumed").get<std::uint64_t>();
    r.infuse_scoring_passes = j.at("infuse_scoring_passes").get<std::uint64_t>();
    for (const auto& c : j.at("coreset_refresh_log")) {
      r.coreset_refresh_log.push_back({c.at("iteration").get<std::int64_t>(), c.at("epoch").get<std::int64_t>(),
                                       c.at("method").get<std::string>(), c.at("pool_size").get<std::size_t>(),
                                       c.at("selected").get<std::size_t>(), c.at("seconds").get<double>()});
    }
    return r;
  } catch (const json::exception& e) {
    throw ReportError(std::string("malformed run report: ") + e.what());
  }
}

void write_run_report(const std::filesystem::path& path, const RunReport& report) {
  write_text(path, run_report_json(report));
}

RunReport read_run_report(const std::filesystem::path& path) {
  try {
    return parse_run_report(read_text(path));
  } catch (const ReportError& e) {
    throw ReportError(path.string() + ": " + e.what());
  }
}

namespace {

// Where a run writes its files does not change what it computes.
std::vector<std::pair<std::string, std::string>> without_output_dir(
    std::vector<std::pair<std::string, std::string>> echo) {
  std::erase_if(echo, [](const auto& kv) { return kv.first == "output_dir"; });
  return echo;
}

}  // namespace

bool same_trajectory(const RunReport& a, const RunReport& b) {
  if (a.schema_version != b.schema_version || a.config_hash != b.config_hash ||
      without_output_dir(a.config_echo) != without_output_dir(b.config_echo) || a.iterations != b.iterations ||
      a.unlabeled_consumed != b.unlabeled_consumed ||
      a.infuse_scoring_passes != b.infuse_scoring_passes || a.evals.size() != b.evals.size() ||
      a.coreset_refresh_log.size() != b.coreset_refresh_log.size() ||
      !same_eval(a.final_metrics, b.final_metrics)) {
    return false;
  }
  for (std::size_t i = 0; i < a.evals.size(); ++i) {
    if (!same_eval(a.evals[i], b.evals[i])) return false;
  }
  for (std::size_t i = 0; i < a.coreset_refresh_log.size(); ++i) {
    const auto& x = a.coreset_refresh_log[i];
    const auto& y = b.coreset_refresh_log[i];
    if (x.iteration != y.iteration || x.epoch != y.epoch || x.method != y.method ||
        x.pool_size != y.pool_size || x.selected != y.selected) {
      return false;
    }
  }
  return true;
}

std::string metrics_json(const MetricsSummary& s) {
  ordered_json j;
  j["schema_version"] = s.schema_version;
  j["examples"] = s.examples;
  j["buckets"] = s.buckets;
  j["error_rate"] = s.metrics.error_rate;
  j["ece"] = s.metrics.ece;
  j["mce"] = s.metrics.mce;
  j["ace"] = s.metrics.ace;
  j["config"] = echo_json(s.config_echo);
  return j.dump(2) + "\n";
}

MetricsSummary parse_metrics_json(const std::string& text) {
  try {
    const auto j = ordered_json::parse(text);
    MetricsSummary s;
    s.schema_version = j.at("schema_version").get<int>();
    s.examples = j.at("examples").get<std::size_t>();
    s.buckets = j.at("buckets").get<std::size_t>();
    s.metrics.error_rate = j.at("error_rate").get<double>();
    s.metrics.ece = j.at("ece").get<double>();
    s.metrics.mce = j.at("mce").get<double>();
    s.metrics.ace = j.at("ace").get<double>();
    s.config_echo = echo_from(j.at("config"));
    return s;
  } catch (const json::exception& e) {
    throw ReportError(std::string("malformed metrics file: ") + e.what());
  }
}

std::string split_manifest_json(const Dataset& ds,
                                const std::vector<std::pair<std::string, std::string>>& echo) {
  ordered_json j;
  j["schema_version"] = 1;
  j["examples"] = ds.size();
  j["features"] = ds.features.cols;
  j["num_classes"] = ds.num_classes;
  ordered_json counts = ordered_json::object();
  for (Split s : {Split::kLabeled, Split::kUnlabeled, Split::kValidation, Split::kTest}) {
    counts[split_name(s)] = ds.indices_of(s).size();
  }
  j["split_counts"] = counts;
  ordered_json tags = ordered_json::array();
  for (Split s : ds.splits) tags.push_back(split_name(s));
  j["splits"] = tags;
  j["config"] = echo_json(echo);
  return j.dump(2) + "\n";
}

MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("mean_std: no values");
  MeanStd out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

std::vector<AggregateRow> aggregate_reports(
    const std::vector<std::pair<std::string, RunReport>>& runs) {
  if (runs.empty()) throw ReportError("report: need at least one run");
  const int schema = runs.front().second.schema_version;
  struct Group {
    std::vector<std::string> names;
    std::vector<double> err, ece, mce, ace, wall, mask;
  };
  std::vector<std::string> order;
  std::map<std::string, Group> groups;
  for (const auto& [name, r] : runs) {
    if (r.schema_version != schema) {
      throw ReportError("report: schema version mismatch (" + name + " has " +
                        std::to_string(r.schema_version) + ", expected " + std::to_string(schema) + ")");
    }
    auto [it, inserted] = groups.try_emplace(r.config_hash);
    if (inserted) order.push_back(r.config_hash);
    Group& g = it->second;
    g.names.push_back(name);
    g.err.push_back(r.final_metrics.error_rate);
    g.ece.push_back(r.final_metrics.ece);
    g.mce.push_back(r.final_metrics.mce);
    g.ace.push_back(r.final_metrics.ace);
    g.wall.push_back(r.wall_seconds);
    g.mask.push_back(r.final_metrics.mask_rate);
  }
  std::vector<AggregateRow> rows;
  for (const auto& hash : order) {
    const Group& g = groups.at(hash);
    rows.push_back({hash, g.names, mean_std(g.err), mean_std(g.ece), mean_std(g.mce), mean_std(g.ace),
                    mean_std(g.wall), mean_std(g.mask)});
  }
  return rows;
}

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

std::string fmt_std(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

}  // namespace

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << "config_hash,runs,error_rate_mean,error_rate_std,ece_mean,ece_std,mce_mean,mce_std,"
         "ace_mean,ace_std,wall_seconds_mean,wall_seconds_std,mask_rate_mean,mask_rate_std\n";
  for (const auto& r : rows) {
    out << r.config_hash << ',' << r.runs.size();
    for (const MeanStd* m : {&r.error_rate, &r.ece, &r.mce, &r.ace, &r.wall_seconds, &r.mask_rate}) {
      out << ',' << fmt(m->mean) << ',' << fmt_std(m->std);
    }
    out << '\n';
  }
}

void write_aggregate_text(std::ostream& out, const std::vector<AggregateRow>& rows) {
  auto cell = [](const MeanStd& m, double scale, int precision) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << m.mean * scale;
    if (m.std) s << " ± " << *m.std * scale;
    return s.str();
  };
  out << std::left << std::setw(18) << "config" << std::setw(6) << "runs" << std::setw(20)
      << "error %" << std::setw(20) << "ECE %" << std::setw(20) << "MCE %" << std::setw(20)
      << "ACE %" << std::setw(20) << "wall s" << "mask rate\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(18) << r.config_hash << std::setw(6) << r.runs.size()
        << std::setw(20) << cell(r.error_rate, 1.0, 2) << std::setw(20) << cell(r.ece, 100.0, 2)
        << std::setw(20) << cell(r.mce, 100.0, 2) << std::setw(20) << cell(r.ace, 100.0, 2)
        << std::setw(20) << cell(r.wall_seconds, 1.0, 1) << cell(r.mask_rate, 1.0, 3) << '\n';
  }
}

}  // namespace sslcalib
