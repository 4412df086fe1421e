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

#include "sslcalib/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace sslcalib {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  throw ConfigError("key '" + std::string(key) + "': cannot parse '" + std::string(value) + "' as " +
                    std::string(want));
}

template <typename T>
T parse_integer(std::string_view key, std::string_view v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad_value(key, v, "integer");
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad_value(key, v, "number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true") return true;
  if (v == "false") return false;
  bad_value(key, v, "bool (true|false)");
}

std::vector<std::size_t> parse_sizes(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  if (v.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = v.find(',', start);
    const auto item = trim(v.substr(start, comma == std::string_view::npos ? v.npos : comma - start));
    out.push_back(parse_integer<std::size_t>(key, item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string format_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

struct Field {
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, std::string_view key, std::string_view)> set;
};

template <typename T>
Field size_field(const char* key, T ExperimentConfig::*outer, std::size_t T::*member) {
  return {key, [=](const ExperimentConfig& c) { return std::to_string(c.*outer.*member); },
          [=](ExperimentConfig& c, std::string_view k, std::string_view v) {
            c.*outer.*member = parse_integer<std::size_t>(k, v);
          }};
}

template <typename T>
Field int_field(const char* key, T ExperimentConfig::*outer, std::int64_t T::*member) {
  return {key, [=](const ExperimentConfig& c) { return std::to_string(c.*outer.*member); },
          [=](ExperimentConfig& c, std::string_view k, std::string_view v) {
            c.*outer.*member = parse_integer<std::int64_t>(k, v);
          }};
}

template <typename T>
Field double_field(const char* key, T ExperimentConfig::*outer, double T::*member) {
  return {key, [=](const ExperimentConfig& c) { return format_double(c.*outer.*member); },
          [=](ExperimentConfig& c, std::string_view k, std::string_view v) {
            c.*outer.*member = parse_double(k, v);
          }};
}

template <typename T>
Field bool_field(const char* key, T ExperimentConfig::*outer, bool T::*member) {
  return {key, [=](const ExperimentConfig& c) { return std::string(c.*outer.*member ? "true" : "false"); },
          [=](ExperimentConfig& c, std::string_view k, std::string_view v) {
            c.*outer.*member = parse_bool(k, v);
          }};
}

template <typename T>
Field sizes_field(const char* key, T ExperimentConfig::*outer, std::vector<std::size_t> T::*member) {
  return {key, [=](const ExperimentConfig& c) { return format_sizes(c.*outer.*member); },
          [=](ExperimentConfig& c, std::string_view k, std::string_view v) {
            c.*outer.*member = parse_sizes(k, v);
          }};
}

const std::vector<Field>& fields() {
  using E = ExperimentConfig;
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"seed", [](const E& c) { return std::to_string(c.train.seed); },
                 [](E& c, std::string_view k, std::string_view v) {
                   c.train.seed = parse_integer<std::uint64_t>(k, v);
                 }});
    f.push_back({"output_dir", [](const E& c) { return c.output_dir; },
                 [](E& c, std::string_view, std::string_view v) { c.output_dir = std::string(v); }});

    f.push_back({"dataset.kind", [](const E& c) { return std::string(dataset_kind_name(c.dataset.kind)); },
                 [](E& c, std::string_view k, std::string_view v) {
                   try {
                     c.dataset.kind = parse_dataset_kind(v);
                   } catch (const std::invalid_argument&) {
                     bad_value(k, v, "two_moons|blobs|csv");
                   }
                 }});
    f.push_back(size_field("dataset.n", &E::dataset, &DatasetSpec::n));
    f.push_back(double_field("dataset.noise", &E::dataset, &DatasetSpec::noise));
    f.push_back(size_field("dataset.centers", &E::dataset, &DatasetSpec::centers));
    f.push_back(double_field("dataset.spread", &E::dataset, &DatasetSpec::spread));
    f.push_back(size_field("dataset.dim", &E::dataset, &DatasetSpec::dim));
    f.push_back(double_field("dataset.center_distance", &E::dataset, &DatasetSpec::center_distance));
    f.push_back({"dataset.csv_path", [](const E& c) { return c.dataset.csv_path; },
                 [](E& c, std::string_view, std::string_view v) { c.dataset.csv_path = std::string(v); }});
    f.push_back(size_field("dataset.labeled_per_class", &E::dataset, &DatasetSpec::labeled_per_class));
    f.push_back(size_field("dataset.n_val", &E::dataset, &DatasetSpec::n_val));
    f.push_back(size_field("dataset.n_test", &E::dataset, &DatasetSpec::n_test));

    f.push_back(int_field("train.total_iterations", &E::train, &TrainConfig::total_iterations));
    f.push_back(int_field("train.epoch_iterations", &E::train, &TrainConfig::epoch_iterations));
    f.push_back(int_field("train.eval_period", &E::train, &TrainConfig::eval_period));
    f.push_back(size_field("train.labeled_batch", &E::train, &TrainConfig::labeled_batch));
    f.push_back(size_field("train.unlabeled_batch", &E::train, &TrainConfig::unlabeled_batch));
    f.push_back(double_field("train.eta0", &E::train, &TrainConfig::eta0));
    f.push_back(sizes_field("train.hidden", &E::train, &TrainConfig::hidden));
    f.push_back(double_field("train.classifier_dropout", &E::train, &TrainConfig::classifier_dropout));
    f.push_back(double_field("train.tau", &E::train, &TrainConfig::tau));
    f.push_back(double_field("train.lambda_unlab", &E::train, &TrainConfig::lambda_unlab));
    f.push_back(double_field("train.ema_beta", &E::train, &TrainConfig::ema_beta));
    f.push_back(size_field("train.calibration_buckets", &E::train, &TrainConfig::calibration_buckets));

    f.push_back({"augment.weak_noise_sigma",
                 [](const E& c) { return format_double(c.train.augmentation.weak_noise_sigma); },
                 [](E& c, std::string_view k, std::string_view v) {
                   c.train.augmentation.weak_noise_sigma = parse_double(k, v);
                 }});
    f.push_back({"augment.strong_noise_sigma",
                 [](const E& c) { return format_double(c.train.augmentation.strong_noise_sigma); },
                 [](E& c, std::string_view k, std::string_view v) {
                   c.train.augmentation.strong_noise_sigma = parse_double(k, v);
                 }});
    f.push_back({"augment.strong_mask_prob",
                 [](const E& c) { return format_double(c.train.augmentation.strong_mask_prob); },
                 [](E& c, std::string_view k, std::string_view v) {
                   c.train.augmentation.strong_mask_prob = parse_double(k, v);
                 }});

    f.push_back(size_field("consistency.queue_capacity", &E::train, &TrainConfig::queue_capacity));
    f.push_back(size_field("consistency.mc_passes", &E::train, &TrainConfig::mc_passes));
    f.push_back(double_field("consistency.mc_dropout_rate", &E::train, &TrainConfig::mc_dropout_rate));
    f.push_back(size_field("consistency.temporal_window", &E::train, &TrainConfig::temporal_window));
    f.push_back(bool_field("consistency.invert_confidence_channel", &E::train,
                           &TrainConfig::invert_confidence_channel));
    f.push_back(bool_field("consistency.record", &E::train, &TrainConfig::record_consistency));

    f.push_back(bool_field("vcc.enabled", &E::train, &TrainConfig::vcc_enabled));
    f.push_back(double_field("vcc.lambda", &E::train, &TrainConfig::lambda_vcc));
    f.push_back(size_field("vcc.z_dim", &E::train, &TrainConfig::z_dim));
    f.push_back(sizes_field("vcc.hidden", &E::train, &TrainConfig::vae_hidden));
    f.push_back(int_field("vcc.warmup_epochs", &E::train, &TrainConfig::warmup_epochs));
    f.push_back(bool_field("vcc.negate_kl", &E::train, &TrainConfig::negate_kl));

    f.push_back(double_field("infuse.keep_ratio", &E::train, &TrainConfig::keep_ratio));
    f.push_back({"infuse.method",
                 [](const E& c) { return std::string(coreset_method_name(c.train.coreset_method)); },
                 [](E& c, std::string_view k, std::string_view v) {
                   try {
                     c.train.coreset_method = parse_coreset_method(v);
                   } catch (const std::invalid_argument&) {
                     bad_value(k, v, "infuse|random");
                   }
                 }});
    f.push_back(int_field("infuse.refresh_period", &E::train, &TrainConfig::refresh_period));
    f.push_back(size_field("infuse.score_batch_size", &E::train, &TrainConfig::score_batch_size));
    f.push_back({"infuse.gradient_subset",
                 [](const E& c) { return std::string(subset_name(c.train.gradient_subset)); },
                 [](E& c, std::string_view k, std::string_view v) {
                   try {
                     c.train.gradient_subset = parse_subset(v);
                   } catch (const std::invalid_argument&) {
                     bad_value(k, v, "head|full");
                   }
                 }});
    f.push_back(bool_field("infuse.keep_highest_score", &E::train, &TrainConfig::literal_highest_score));
    f.push_back(double_field("infuse.mixup_alpha", &E::train, &TrainConfig::mixup_alpha));
    f.push_back(size_field("infuse.support_pairs", &E::train, &TrainConfig::support_size));
    return f;
  }();
  return table;
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

const char* dataset_kind_name(DatasetKind k) {
  switch (k) {
    case DatasetKind::kTwoMoons: return "two_moons";
    case DatasetKind::kBlobs: return "blobs";
    case DatasetKind::kCsv: return "csv";
  }
  return "?";
}

DatasetKind parse_dataset_kind(std::string_view name) {
  if (name == "two_moons") return DatasetKind::kTwoMoons;
  if (name == "blobs") return DatasetKind::kBlobs;
  if (name == "csv") return DatasetKind::kCsv;
  throw std::invalid_argument("unknown dataset kind '" + std::string(name) + "'");
}

void DatasetSpec::validate() const {
  if (kind == DatasetKind::kCsv && csv_path.empty()) {
    throw ConfigError("dataset.csv_path is required when dataset.kind = csv");
  }
  if (labeled_per_class == 0) throw ConfigError("dataset.labeled_per_class must be >= 1");
}

Dataset build_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  spec.validate();
  Dataset raw;
  switch (spec.kind) {
    case DatasetKind::kTwoMoons: raw = make_two_moons(spec.n, spec.noise, seed); break;
    case DatasetKind::kBlobs:
      raw = make_blobs(spec.n, spec.centers, spec.spread, seed, spec.dim, spec.center_distance);
      break;
    case DatasetKind::kCsv: raw = read_csv(spec.csv_path); break;
  }
  return split(raw, spec.labeled_per_class, spec.n_val, spec.n_test, seed);
}

void ExperimentConfig::validate() const {
  dataset.validate();
  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return {buf, ptr};
}

ConfigEcho config_echo(const ExperimentConfig& config) {
  ConfigEcho echo;
  for (const auto& f : fields()) echo.emplace_back(f.key, f.get(config));
  return echo;
}

std::string config_hash(const ConfigEcho& echo) {
  std::string canon;
  for (const auto& [k, v] : echo) {
    if (k == "seed" || k == "output_dir") continue;
    canon += k;
    canon += '=';
    canon += v;
    canon += '\n';
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(canon)));
  return buf;
}

void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(config, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig config;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (!seen.insert(std::string(key)).second) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + std::string(key) + "'");
    }
    try {
      set_config_value(config, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

std::string format_config(const ExperimentConfig& config) {
  std::ostringstream out;
  out << "# sslcalib experiment config\n";
  for (const auto& [k, v] : config_echo(config)) out << k << " = " << v << '\n';
  return out.str();
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write config file '" + path.string() + "'");
  out << format_config(config);
  if (!out) throw ConfigError("failed writing config file '" + path.string() + "'");
}

}  // namespace sslcalib
