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

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "sslcalib/data.hpp"
#include "sslcalib/nn.hpp"

namespace sslcalib {
namespace {

namespace fs = std::filesystem;

// The training-side view of unlabeled data must not expose labels.
template <typename T>
concept HasLabels = requires(T t) { t.labels; };
static_assert(!HasLabels<UnlabeledSet>, "unlabeled examples must not carry labels");
static_assert(HasLabels<LabeledSet>);

TEST(DataTest, TwoMoonsIsDeterministic) {
  const Dataset a = make_two_moons(1000, 0.1, 7);
  const Dataset b = make_two_moons(1000, 0.1, 7);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.labels, b.labels);
  const Dataset c = make_two_moons(1000, 0.1, 8);
  EXPECT_NE(a.features, c.features);
}

TEST(DataTest, ClassesBalancedWithinOne) {
  for (std::size_t n : {9u, 100u, 1001u}) {
    const Dataset ds = make_two_moons(n, 0.1, 1);
    const auto ones = static_cast<std::size_t>(std::count(ds.labels.begin(), ds.labels.end(), 1));
    EXPECT_LE(std::max(ones, n - ones) - std::min(ones, n - ones), 1u);
  }
  const Dataset blobs = make_blobs(103, 4, 1.0, 2);
  for (int c = 0; c < 4; ++c) {
    const auto k = std::count(blobs.labels.begin(), blobs.labels.end(), c);
    EXPECT_GE(k, 25);
    EXPECT_LE(k, 26);
  }
}

TEST(DataTest, BlobsWithZeroSpreadSitOnCenters) {
  const Dataset ds = make_blobs(40, 4, 0.0, 3);
  std::vector<std::vector<double>> first(4);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto row = ds.features.row(i);
    auto& f = first[static_cast<std::size_t>(ds.labels[i])];
    if (f.empty()) {
      f.assign(row.begin(), row.end());
    } else {
      EXPECT_TRUE(std::equal(f.begin(), f.end(), row.begin()));
    }
  }
}

TEST(DataTest, TooFewExamplesRejected) {
  EXPECT_THROW(make_two_moons(7, 0.1, 1), std::invalid_argument);
  EXPECT_THROW(make_blobs(11, 3, 1.0, 1), std::invalid_argument);
}

TEST(DataTest, NoiselessMoonsAreSeparableBySupervisedMlp) {
  const Dataset ds = make_two_moons(400, 0.0, 5);
  Rng rng(6);
  Classifier model({2, {32, 32}, 2}, rng);
  const Tensor x = ds.features.to_tensor();
  std::vector<double> onehot(ds.size() * 2, 0.0);
  for (std::size_t i = 0; i < ds.size(); ++i) onehot[i * 2 + static_cast<std::size_t>(ds.labels[i])] = 1.0;
  const Tensor y = Tensor::matrix(ds.size(), 2, onehot);
  auto params = model.parameters();
  for (int step = 0; step < 3000; ++step) {
    backward(soft_cross_entropy(model.forward(x), y));
    sgd_step(params, 0.3);
  }
  const Tensor logits = model.forward(x);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int pred = logits.at(i, 1) > logits.at(i, 0) ? 1 : 0;
    wrong += pred != ds.labels[i];
  }
  EXPECT_LE(static_cast<double>(wrong) / static_cast<double>(ds.size()), 0.02);
}

TEST(SplitTest, CountsAndDisjointness) {
  const Dataset ds = split(make_two_moons(200, 0.1, 1), 2, 30, 40, 9);
  ASSERT_EQ(ds.splits.size(), ds.size());
  const auto lab = ds.indices_of(Split::kLabeled);
  const auto unl = ds.indices_of(Split::kUnlabeled);
  const auto val = ds.indices_of(Split::kValidation);
  const auto test = ds.indices_of(Split::kTest);
  EXPECT_EQ(lab.size(), 4u);
  EXPECT_EQ(val.size(), 30u);
  EXPECT_EQ(test.size(), 40u);
  EXPECT_EQ(unl.size(), 200u - 74u);
  std::set<std::size_t> all;
  for (const auto* v : {&lab, &unl, &val, &test}) all.insert(v->begin(), v->end());
  EXPECT_EQ(all.size(), ds.size());
  int per_class[2] = {0, 0};
  for (auto i : lab) ++per_class[ds.labels[i]];
  EXPECT_EQ(per_class[0], 2);
  EXPECT_EQ(per_class[1], 2);
}

TEST(SplitTest, InfeasibleCountsRejected) {
  const Dataset raw = make_two_moons(20, 0.1, 1);
  EXPECT_THROW(split(raw, 11, 0, 0, 1), std::invalid_argument);
  EXPECT_THROW(split(raw, 2, 10, 10, 1), std::invalid_argument);
  EXPECT_THROW(split(raw, 0, 1, 1, 1), std::invalid_argument);
}

TEST(SplitTest, TrainingViewHidesUnlabeledLabels) {
  const Dataset ds = split(make_two_moons(100, 0.1, 1), 3, 10, 10, 2);
  const TrainingView view = training_view(ds);
  EXPECT_EQ(view.labeled.size(), 6u);
  EXPECT_EQ(view.unlabeled.size(), 74u);
  EXPECT_EQ(view.unlabeled.features.rows, 74u);
  EXPECT_THROW(evaluation_set(ds, Split::kUnlabeled), std::invalid_argument);
  EXPECT_EQ(evaluation_set(ds, Split::kTest).size(), 10u);
}

TEST(CsvTest, RoundTripIsExact) {
  const Dataset ds = make_blobs(50, 3, 1.3, 4, 3);
  const fs::path p = fs::temp_directory_path() / "sslcalib_csv_roundtrip.csv";
  write_csv(p, ds);
  const Dataset back = read_csv(p);
  EXPECT_EQ(back.features, ds.features);
  EXPECT_EQ(back.labels, ds.labels);
  EXPECT_EQ(back.num_classes, 3u);
  fs::remove(p);
}

TEST(CsvTest, LabelColumnMayAppearAnywhere) {
  const fs::path p = fs::temp_directory_path() / "sslcalib_csv_label_first.csv";
  {
    std::ofstream out(p);
    out << "label,a,b\n1,0.5,2\n0,-1,3.25\n";
  }
  const Dataset ds = read_csv(p);
  EXPECT_EQ(ds.labels, (std::vector<int>{1, 0}));
  EXPECT_EQ(ds.features.at(1, 1), 3.25);
  fs::remove(p);
}

TEST(CsvTest, ErrorsNameTheProblem) {
  const fs::path p = fs::temp_directory_path() / "sslcalib_csv_bad.csv";
  {
    std::ofstream out(p);
    out << "a,b\n1,2\n";
  }
  EXPECT_THROW(read_csv(p), std::runtime_error);
  {
    std::ofstream out(p);
    out << "a,label\n1,0\nx,1\n";
  }
  try {
    read_csv(p);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_THAT(e.what(), ::testing::HasSubstr(":3"));
  }
  fs::remove(p);
}

TEST(AugmentTest, ZeroPolicyIsIdentity) {
  const Dataset ds = make_two_moons(20, 0.1, 1);
  Rng rng(1);
  const AugmentationPolicy none{0.0, 0.0, 0.0};
  EXPECT_EQ(augment_weak(ds.features, none, rng), ds.features);
  EXPECT_EQ(augment_strong(ds.features, none, rng), ds.features);
}

TEST(AugmentTest, MaskRate) {
  Matrix ones(1, 10000);
  for (double& v : ones.values) v = 1.0;
  Rng rng(2);
  const Matrix out = augment_strong(ones, {0.0, 0.0, 0.99}, rng);
  const auto zeros = std::count(out.values.begin(), out.values.end(), 0.0);
  EXPECT_NEAR(static_cast<double>(zeros) / 10000.0, 0.99, 0.01);
}

TEST(AugmentTest, DeterministicUnderSeed) {
  const Dataset ds = make_two_moons(50, 0.1, 1);
  Rng a(3), b(3);
  const AugmentationPolicy policy;
  EXPECT_EQ(augment_strong(ds.features, policy, a), augment_strong(ds.features, policy, b));
}

TEST(AugmentTest, InvalidPoliciesRejected) {
  EXPECT_THROW((AugmentationPolicy{0.2, 0.1, 0.2}.validate()), std::invalid_argument);
  EXPECT_THROW((AugmentationPolicy{-0.1, 0.1, 0.2}.validate()), std::invalid_argument);
  EXPECT_THROW((AugmentationPolicy{0.05, 0.1, 1.0}.validate()), std::invalid_argument);
  EXPECT_NO_THROW(AugmentationPolicy{}.validate());
}

TEST(AugmentTest, WeakViewPreservesDecisionOnSeparatedBlobs) {
  const Dataset ds = make_blobs(400, 2, 1.0, 11, 2, 6.0);
  Rng rng(12);
  Classifier model({2, {16}, 2}, rng);
  const Tensor x = ds.features.to_tensor();
  std::vector<double> onehot(ds.size() * 2, 0.0);
  for (std::size_t i = 0; i < ds.size(); ++i) onehot[i * 2 + static_cast<std::size_t>(ds.labels[i])] = 1.0;
  const Tensor y = Tensor::matrix(ds.size(), 2, onehot);
  auto params = model.parameters();
  for (int step = 0; step < 500; ++step) {
    backward(soft_cross_entropy(model.forward(x), y));
    sgd_step(params, 0.1);
  }
  Rng aug(13);
  const Matrix weak = augment_weak(ds.features, {0.05, 0.15, 0.2}, aug);
  const Tensor before = model.forward(x);
  const Tensor after = model.forward(weak.to_tensor());
  std::size_t same = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    same += (before.at(i, 1) > before.at(i, 0)) == (after.at(i, 1) > after.at(i, 0));
  }
  EXPECT_GE(static_cast<double>(same) / static_cast<double>(ds.size()), 0.95);
}

}  // namespace
}  // namespace sslcalib
