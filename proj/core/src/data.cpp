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

#include "sslcalib/data.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace sslcalib {
namespace {

void shuffle_dataset(Dataset& ds, Rng& rng) {
  std::vector<std::size_t> perm(ds.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(perm);
  Dataset out;
  out.features = ds.features.gather(perm);
  out.num_classes = ds.num_classes;
  out.labels.reserve(perm.size());
  for (auto p : perm) out.labels.push_back(ds.labels[p]);
  ds = std::move(out);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> v)
    : rows(r), cols(c), values(std::move(v)) {
  if (values.size() != r * c) throw std::invalid_argument("Matrix: size mismatch");
}

Tensor Matrix::to_tensor() const { return Tensor::matrix(rows, cols, values); }

Matrix Matrix::gather(std::span<const std::size_t> row_indices) const {
  Matrix out(row_indices.size(), cols);
  for (std::size_t i = 0; i < row_indices.size(); ++i) {
    if (row_indices[i] >= rows) throw std::out_of_range("Matrix::gather: row index out of range");
    std::copy_n(values.data() + row_indices[i] * cols, cols, out.values.data() + i * cols);
  }
  return out;
}

const char* split_name(Split s) {
  switch (s) {
    case Split::kLabeled: return "labeled";
    case Split::kUnlabeled: return "unlabeled";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "?";
}

std::vector<std::size_t> Dataset::indices_of(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == s) out.push_back(i);
  }
  return out;
}

Dataset make_two_moons(std::size_t n, double noise, std::uint64_t seed) {
  if (n < 8) throw std::invalid_argument("make_two_moons: need n >= 8 (4 per class)");
  if (!(noise >= 0.0)) throw std::invalid_argument("make_two_moons: noise must be >= 0");
  Rng rng(seed, "data");
  const std::size_t n_out = n / 2;
  const std::size_t n_in = n - n_out;
  Dataset ds;
  ds.num_classes = 2;
  ds.features = Matrix(n, 2);
  auto angle = [](std::size_t i, std::size_t count) {
    return count > 1 ? std::numbers::pi * static_cast<double>(i) / static_cast<double>(count - 1)
                     : 0.0;
  };
  for (std::size_t i = 0; i < n_out; ++i) {
    const double t = angle(i, n_out);
    ds.features.at(i, 0) = std::cos(t);
    ds.features.at(i, 1) = std::sin(t);
    ds.labels.push_back(0);
  }
  for (std::size_t i = 0; i < n_in; ++i) {
    const double t = angle(i, n_in);
    ds.features.at(n_out + i, 0) = 1.0 - std::cos(t);
    ds.features.at(n_out + i, 1) = 1.0 - std::sin(t) - 0.5;
    ds.labels.push_back(1);
  }
  if (noise > 0.0) {
    for (double& v : ds.features.values) v += rng.normal(0.0, noise);
  }
  shuffle_dataset(ds, rng);
  return ds;
}

Dataset make_blobs(std::size_t n, std::size_t centers, double spread, std::uint64_t seed,
                   std::size_t dim, double center_distance) {
  if (centers < 2) throw std::invalid_argument("make_blobs: need at least 2 centers");
  if (dim < 2) throw std::invalid_argument("make_blobs: need dim >= 2");
  if (n < 4 * centers) {
    throw std::invalid_argument("make_blobs: need n >= 4 * centers, got n=" + std::to_string(n));
  }
  if (!(spread >= 0.0)) throw std::invalid_argument("make_blobs: spread must be >= 0");
  Rng rng(seed, "data");
  const double radius =
      center_distance / (2.0 * std::sin(std::numbers::pi / static_cast<double>(centers)));
  Dataset ds;
  ds.num_classes = centers;
  ds.features = Matrix(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % centers;
    const double phi = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(centers);
    for (std::size_t j = 0; j < dim; ++j) {
      double center = 0.0;
      if (j == 0) center = radius * std::cos(phi);
      if (j == 1) center = radius * std::sin(phi);
      ds.features.at(i, j) = spread > 0.0 ? center + rng.normal(0.0, spread) : center;
    }
    ds.labels.push_back(static_cast<int>(c));
  }
  shuffle_dataset(ds, rng);
  return ds;
}

Dataset split(const Dataset& ds, std::size_t n_labeled_per_class, std::size_t n_val,
              std::size_t n_test, std::uint64_t seed) {
  if (n_labeled_per_class == 0) throw std::invalid_argument("split: need at least one label per class");
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    by_class.at(static_cast<std::size_t>(ds.labels[i])).push_back(i);
  }
  for (std::size_t c = 0; c < ds.num_classes; ++c) {
    if (by_class[c].size() < n_labeled_per_class) {
      throw std::invalid_argument("split: class " + std::to_string(c) + " has only " +
                                  std::to_string(by_class[c].size()) + " examples, " +
                                  std::to_string(n_labeled_per_class) + " labels requested");
    }
  }
  const std::size_t n_lab = n_labeled_per_class * ds.num_classes;
  if (n_lab + n_val + n_test >= ds.size()) {
    throw std::invalid_argument("split: labeled+validation+test (" +
                                std::to_string(n_lab + n_val + n_test) +
                                ") leaves no unlabeled examples out of " + std::to_string(ds.size()));
  }
  Rng rng(seed, "split");
  Dataset out = ds;
  out.splits.assign(ds.size(), Split::kUnlabeled);
  for (auto& members : by_class) {
    rng.shuffle(members);
    for (std::size_t k = 0; k < n_labeled_per_class; ++k) out.splits[members[k]] = Split::kLabeled;
  }
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (out.splits[i] != Split::kLabeled) rest.push_back(i);
  }
  rng.shuffle(rest);
  for (std::size_t k = 0; k < n_val; ++k) out.splits[rest[k]] = Split::kValidation;
  for (std::size_t k = 0; k < n_test; ++k) out.splits[rest[n_val + k]] = Split::kTest;
  return out;
}

Dataset read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("CSV is empty: " + path.string());
  const auto header = split_csv_line(line);
  const auto label_it = std::find(header.begin(), header.end(), "label");
  if (label_it == header.end()) {
    throw std::runtime_error("CSV has no 'label' column: " + path.string());
  }
  const std::size_t label_col = static_cast<std::size_t>(label_it - header.begin());
  const std::size_t dim = header.size() - 1;
  if (dim == 0) throw std::runtime_error("CSV has no feature columns: " + path.string());

  Dataset ds;
  std::vector<double> values;
  std::size_t line_no = 1;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(header.size()) + " columns, got " +
                               std::to_string(cells.size()));
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const std::string& cell = cells[j];
      if (j == label_col) {
        int label = 0;
        auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), label);
        if (ec != std::errc() || p != cell.data() + cell.size() || label < 0) {
          throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                   ": bad label '" + cell + "'");
        }
        ds.labels.push_back(label);
        max_label = std::max(max_label, label);
      } else {
        double v = 0.0;
        auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec != std::errc() || p != cell.data() + cell.size() || !std::isfinite(v)) {
          throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                   ": bad number '" + cell + "' in column '" + header[j] + "'");
        }
        values.push_back(v);
      }
    }
  }
  ds.features = Matrix(ds.labels.size(), dim, std::move(values));
  ds.num_classes = static_cast<std::size_t>(max_label + 1);
  return ds;
}

void write_csv(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write CSV: " + path.string());
  for (std::size_t j = 0; j < ds.features.cols; ++j) out << 'x' << j << ',';
  out << "label\n";
  char buf[32];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.features.cols; ++j) {
      auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), ds.features.at(i, j));
      out.write(buf, p - buf);
      out << ',';
    }
    out << ds.labels[i] << '\n';
  }
  if (!out) throw std::runtime_error("failed writing CSV: " + path.string());
}

TrainingView training_view(const Dataset& ds) {
  if (ds.splits.size() != ds.size()) {
    throw std::invalid_argument("training_view: dataset has not been split");
  }
  TrainingView view;
  view.num_classes = ds.num_classes;
  view.labeled.num_classes = ds.num_classes;
  view.labeled.ids = ds.indices_of(Split::kLabeled);
  view.labeled.features = ds.features.gather(view.labeled.ids);
  for (auto i : view.labeled.ids) view.labeled.labels.push_back(ds.labels[i]);
  view.unlabeled.ids = ds.indices_of(Split::kUnlabeled);
  view.unlabeled.features = ds.features.gather(view.unlabeled.ids);
  return view;
}

LabeledSet evaluation_set(const Dataset& ds, Split which) {
  if (which != Split::kValidation && which != Split::kTest) {
    throw std::invalid_argument("evaluation_set: only validation or test splits");
  }
  LabeledSet out;
  out.num_classes = ds.num_classes;
  out.ids = ds.indices_of(which);
  out.features = ds.features.gather(out.ids);
  for (auto i : out.ids) out.labels.push_back(ds.labels[i]);
  return out;
}

void AugmentationPolicy::validate() const {
  if (!(weak_noise_sigma >= 0.0) || !(strong_noise_sigma >= weak_noise_sigma)) {
    throw std::invalid_argument("AugmentationPolicy: need strong_noise_sigma >= weak_noise_sigma >= 0");
  }
  if (!(strong_mask_prob >= 0.0 && strong_mask_prob < 1.0)) {
    throw std::invalid_argument("AugmentationPolicy: strong_mask_prob must lie in [0, 1)");
  }
}

Matrix augment_weak(const Matrix& x, const AugmentationPolicy& policy, Rng& rng) {
  policy.validate();
  Matrix out = x;
  if (policy.weak_noise_sigma > 0.0) {
    for (double& v : out.values) v += rng.normal(0.0, policy.weak_noise_sigma);
  }
  return out;
}

Matrix augment_strong(const Matrix& x, const AugmentationPolicy& policy, Rng& rng) {
  policy.validate();
  Matrix out = x;
  if (policy.strong_noise_sigma > 0.0) {
    for (double& v : out.values) v += rng.normal(0.0, policy.strong_noise_sigma);
  }
  if (policy.strong_mask_prob > 0.0) {
    for (double& v : out.values) {
      if (rng.bernoulli(policy.strong_mask_prob)) v = 0.0;
    }
  }
  return out;
}

}  // namespace sslcalib
