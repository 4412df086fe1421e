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

#ifndef SSLCALIB_RNG_HPP_
#define SSLCALIB_RNG_HPP_

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace sslcalib {

// Derives an independent seed for a named sub-stream. Every source of
// randomness (data, dropout, vae-noise, mixup, ...) draws from its own
// stream so that enabling one feature never shifts another's draws.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream,
                          std::uint64_t counter = 0);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t root, std::string_view stream, std::uint64_t counter = 0)
      : engine_(derive_seed(root, stream, counter)) {}

  std::uint64_t next() { return engine_(); }
  // Uniform on [0, 1).
  double uniform();
  double normal(double mean = 0.0, double stddev = 1.0);
  bool bernoulli(double p) { return uniform() < p; }
  // Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  double beta(double a, double b);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sslcalib

#endif  // SSLCALIB_RNG_HPP_
