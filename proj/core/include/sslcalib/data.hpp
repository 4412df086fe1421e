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

#ifndef SSLCALIB_DATA_HPP_
#define SSLCALIB_DATA_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sslcalib/rng.hpp"
#include "sslcalib/tensor.hpp"

namespace sslcalib {

// Plain row-major feature matrix. Unlike Tensor this is a value type with no
// graph attached.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> v);

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * cols, cols};
  }

  Tensor to_tensor() const;
  Matrix gather(std::span<const std::size_t> row_indices) const;
  bool operator==(const Matrix&) const = default;
};

enum class Split : std::uint8_t { kLabeled, kUnlabeled, kValidation, kTest };
const char* split_name(Split s);

struct Dataset {
  Matrix features;
  std::vector<int> labels;
  std::size_t num_classes = 0;
  // One tag per example once split() has run; empty before.
  std::vector<Split> splits;

  std::size_t size() const { return labels.size(); }
  std::vector<std::size_t> indices_of(Split s) const;
};

Dataset make_two_moons(std::size_t n, double noise, std::uint64_t seed);
// `centers` classes placed on a regular polygon (in the first two feature
// dimensions) whose adjacent vertices are `center_distance` apart.
Dataset make_blobs(std::size_t n, std::size_t centers, double spread, std::uint64_t seed,
                   std::size_t dim = 2, double center_distance = 6.0);

// Stratified labeled split; validation and test are drawn from the rest and
// everything left over is unlabeled.
Dataset split(const Dataset& ds, std::size_t n_labeled_per_class, std::size_t n_val,
              std::size_t n_test, std::uint64_t seed);

// CSV with a header row and an integer "label" column; other columns are
// parsed as floats.
Dataset read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const Dataset& ds);

// ---- training-side views ---------------------------------------------------

struct LabeledSet {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::size_t> ids;
  std::size_t num_classes = 0;
  std::size_t size() const { return ids.size(); }
};

// Unlabeled examples as the training loop sees them. There is intentionally
// no label storage here.
struct UnlabeledSet {
  Matrix features;
  std::vector<std::size_t> ids;
  std::size_t size() const { return ids.size(); }
};

struct TrainingView {
  LabeledSet labeled;
  UnlabeledSet unlabeled;
  std::size_t num_classes = 0;
};

TrainingView training_view(const Dataset& ds);
// Validation or test examples with their labels, for evaluation only.
LabeledSet evaluation_set(const Dataset& ds, Split which);

// ---- augmentation ----------------------------------------------------------

struct AugmentationPolicy {
  double weak_noise_sigma = 0.05;
  double strong_noise_sigma = 0.15;
  double strong_mask_prob = 0.2;

  void validate() const;
};

// Adds N(0, weak_noise_sigma^2) noise to every feature.
Matrix augment_weak(const Matrix& x, const AugmentationPolicy& policy, Rng& rng);
// Adds N(0, strong_noise_sigma^2) noise, then zeroes each feature
// independently with probability strong_mask_prob.
Matrix augment_strong(const Matrix& x, const AugmentationPolicy& policy, Rng& rng);

}  // namespace sslcalib

#endif  // SSLCALIB_DATA_HPP_
