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

#ifndef SSLCALIB_CLI_HPP_
#define SSLCALIB_CLI_HPP_

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "sslcalib/data.hpp"

namespace sslcalib::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

inline constexpr const char* kFeaturesFile = "features.csv";
inline constexpr const char* kManifestFile = "splits.json";
inline constexpr const char* kConfigFile = "config.cfg";
inline constexpr const char* kReportFile = "report.json";
inline constexpr const char* kCheckpointFile = "checkpoint.sslc";
inline constexpr const char* kTraceFile = "consistency_trace.csv";

// Reads features.csv and splits.json from `dir`; throws naming the missing
// or malformed file.
Dataset load_dataset_dir(const std::filesystem::path& dir);

// Entry point shared by the executable and the tests. Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sslcalib::cli

#endif  // SSLCALIB_CLI_HPP_
