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

#ifndef SSLCALIB_CHECKPOINT_HPP_
#define SSLCALIB_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sslcalib/tensor.hpp"

namespace sslcalib {

// Binary layout, all integers and floats little-endian:
//   "SSLC" | u32 version | records...
//   record := u32 name_len | name bytes (UTF-8) | u32 rank | u64 dims[rank] | f64 data[numel]
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedTensor> records);
std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path,
                     std::span<const NamedTensor> records);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

// Looks up a record by name; throws CheckpointError naming the missing record.
const Tensor& find_record(std::span<const NamedTensor> records,
                          std::string_view name);

}  // namespace sslcalib

#endif  // SSLCALIB_CHECKPOINT_HPP_
