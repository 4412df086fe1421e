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

#ifndef SSLCALIB_CONFIG_HPP_
#define SSLCALIB_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sslcalib/data.hpp"
#include "sslcalib/trainer.hpp"

namespace sslcalib {

enum class DatasetKind { kTwoMoons, kBlobs, kCsv };
const char* dataset_kind_name(DatasetKind k);
DatasetKind parse_dataset_kind(std::string_view name);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::kTwoMoons;
  std::size_t n = 2000;
  double noise = 0.1;
  std::size_t centers = 2;
  double spread = 1.0;
  std::size_t dim = 2;
  double center_distance = 6.0;
  std::string csv_path;
  std::size_t labeled_per_class = 4;
  std::size_t n_val = 200;
  std::size_t n_test = 500;

  void validate() const;
};

// Generates (or reads) and splits the dataset. All randomness derives from
// `seed`.
Dataset build_dataset(const DatasetSpec& spec, std::uint64_t seed);

struct ExperimentConfig {
  DatasetSpec dataset;
  TrainConfig train;
  std::string output_dir = "runs/default";

  void validate() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ConfigEcho = std::vector<std::pair<std::string, std::string>>;

// Every key with its canonical textual value, in a fixed order.
ConfigEcho config_echo(const ExperimentConfig& config);
// Hex digest of the echo excluding `seed` and `output_dir`, so runs that
// differ only by seed share a hash.
std::string config_hash(const ConfigEcho& echo);

// Grammar: one `key = value` per line; `#` starts a comment; blank lines are
// ignored. Keys not listed by config_echo are rejected, as are duplicates.
// Missing keys keep their defaults.
ExperimentConfig parse_config(std::string_view text);
std::string format_config(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ExperimentConfig& config);

// Sets one key from its textual value (same rules as the file format).
void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value);

// Shortest text that parses back to the identical double.
std::string format_double(double v);

}  // namespace sslcalib

#endif  // SSLCALIB_CONFIG_HPP_
