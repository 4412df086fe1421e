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

#include "sslcalib/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace sslcalib {
namespace {

constexpr char kMagic[4] = {'S', 'S', 'L', 'C'};
// Caps corrupt length fields before they turn into huge allocations.
constexpr std::uint64_t kMaxNameLength = 1u << 16;
constexpr std::uint32_t kMaxRank = 8;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  put_le(out, std::bit_cast<std::uint64_t>(v));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool done() const { return pos_ == bytes_.size(); }

  template <typename T>
  T get(const std::string& context) {
    if (bytes_.size() - pos_ < sizeof(T)) {
      throw CheckpointError("checkpoint truncated while reading " + context);
    }
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }

  std::string get_string(std::size_t n, const std::string& context) {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError("checkpoint truncated while reading " + context);
    }
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedTensor> records) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  for (const auto& rec : records) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(rec.name.size()));
    out.insert(out.end(), rec.name.begin(), rec.name.end());
    const Shape& shape = rec.tensor.shape();
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) put_le<std::uint64_t>(out, d);
    for (double v : rec.tensor.data()) put_f64(out, v);
  }
  return out;
}

std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError("checkpoint: bad magic bytes (expected \"SSLC\")");
  }
  Reader in(bytes.subspan(4));
  const auto version = in.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  }
  std::vector<NamedTensor> records;
  while (!in.done()) {
    const std::string where = "record " + std::to_string(records.size());
    const auto name_len = in.get<std::uint32_t>(where + " name length");
    if (name_len > kMaxNameLength) {
      throw CheckpointError("checkpoint: " + where + " has implausible name length");
    }
    std::string name = in.get_string(name_len, where + " name");
    const std::string ctx = where + " '" + name + "'";
    const auto rank = in.get<std::uint32_t>(ctx + " rank");
    if (rank == 0 || rank > kMaxRank) {
      throw CheckpointError("checkpoint: " + ctx + " has invalid rank " + std::to_string(rank));
    }
    Shape shape;
    std::uint64_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const auto d = in.get<std::uint64_t>(ctx + " dims");
      if (d == 0 || d > (std::uint64_t{1} << 40) / numel) {
        throw CheckpointError("checkpoint: " + ctx + " has invalid dimension");
      }
      numel *= d;
      shape.push_back(static_cast<std::size_t>(d));
    }
    std::vector<double> data(numel);
    for (auto& v : data) v = std::bit_cast<double>(in.get<std::uint64_t>(ctx + " data"));
    try {
      records.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
    } catch (const std::exception& e) {
      throw CheckpointError("checkpoint: " + ctx + ": " + e.what());
    }
  }
  return records;
}

void save_checkpoint(const std::filesystem::path& path,
                     std::span<const NamedTensor> records) {
  const auto bytes = encode_checkpoint(records);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint: " + path.string());
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

const Tensor& find_record(std::span<const NamedTensor> records,
                          std::string_view name) {
  for (const auto& r : records) {
    if (r.name == name) return r.tensor;
  }
  throw CheckpointError("checkpoint: missing record '" + std::string(name) + "'");
}

}  // namespace sslcalib
