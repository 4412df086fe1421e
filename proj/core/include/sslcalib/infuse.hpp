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

#ifndef SSLCALIB_INFUSE_HPP_
#define SSLCALIB_INFUSE_HPP_

#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sslcalib/data.hpp"
#include "sslcalib/nn.hpp"
#include "sslcalib/rng.hpp"

namespace sslcalib {

enum class GradientSubset { kHead, kFull };
const char* subset_name(GradientSubset s);
GradientSubset parse_subset(std::string_view name);

// Flattened gradient over a named parameter subset. Only vectors with the
// same subset_id can be compared.
struct GradientVector {
  std::vector<double> values;
  std::string subset_id;
};

std::vector<Tensor> subset_parameters(const Classifier& model, GradientSubset subset);

// Gradient of lambda * mean_i 1(max q_i >= tau) * CE(argmax q_i, p(y|u_i)),
// with q the (constant) eval-mode prediction on the same inputs.
GradientVector unlabeled_loss_grad(const Classifier& model, const Matrix& u_batch, double tau,
                                   double lambda, GradientSubset subset = GradientSubset::kHead);

// Gradient of the mean cross-entropy on labeled inputs.
GradientVector labeled_loss_grad(const Classifier& model, const Matrix& x,
                                 std::span<const int> labels, GradientSubset subset);

// Feature-level mixup of labeled examples: pairs of backbone features and
// one-hot labels blended with a Beta(alpha, alpha) weight.
struct SupportSet {
  Matrix features;  // K x feature_dim
  Matrix targets;   // K x num_classes, rows on the simplex
  std::size_t size() const { return features.rows; }
};

// Blends row 2i with row 2i+1 using weights[i]: w*a + (1-w)*b.
SupportSet mix_pairs(const Matrix& features, std::span<const int> labels, std::size_t num_classes,
                     std::span<const double> weights);

SupportSet build_support_set(const LabeledSet& labeled, std::size_t pairs,
                             const Classifier& model, double alpha, Rng& rng);

// Gradient of mean soft cross-entropy between head(mixed features) and the
// mixed labels. Under the full subset the backbone block is zero, since the
// support set lives in feature space.
GradientVector validation_grad_approx(const SupportSet& support, const Classifier& model,
                                      GradientSubset subset = GradientSubset::kHead);

// -<g_val, g_u> (influence with the inverse Hessian replaced by identity).
double infuse_score(const GradientVector& g_val, const GradientVector& g_u);

struct CoreSet {
  std::vector<std::size_t> selected_ids;  // ascending
  std::map<std::size_t, double> scores;
  double keep_ratio = 1.0;
  std::int64_t built_at_epoch = 0;

  bool contains(std::size_t id) const;
};

// ceil(k * n), guarded against floating-point noise in the product.
std::size_t core_set_size(std::size_t n, double keep_ratio);

// Keeps the ceil(k*|U|) examples with the largest importance (= -score), ties
// to the lowest id. With `literal_highest_score` ranks by the raw score.
CoreSet select_core_set(const std::map<std::size_t, double>& scores, double keep_ratio,
                        bool literal_highest_score = false, std::int64_t epoch = 0);

// Uniformly random subset of the same size, for baseline comparisons.
CoreSet random_core_set(std::span<const std::size_t> ids, double keep_ratio, Rng& rng,
                        std::int64_t epoch = 0);

bool refresh_schedule(std::int64_t epoch, std::int64_t period);

struct InfuseOptions {
  std::size_t score_batch_size = 16;
  GradientSubset subset = GradientSubset::kHead;
  double tau = 0.95;
  double lambda_unlab = 1.0;
  double mixup_alpha = 1.0;
  std::size_t support_pairs = 0;  // 0 selects |S| / 2
  bool literal_highest_score = false;
};

// Scores unlabeled examples in shuffled mini-batches; every member of a batch
// receives the batch's score.
std::map<std::size_t, double> score_unlabeled(const Classifier& model, const UnlabeledSet& pool,
                                              const GradientVector& g_val,
                                              const InfuseOptions& options, Rng& rng);

// Support set, validation-gradient surrogate, scoring and selection in one go.
CoreSet build_core_set(const Classifier& model, const LabeledSet& labeled,
                       const UnlabeledSet& pool, double keep_ratio, const InfuseOptions& options,
                       std::uint64_t seed, std::int64_t epoch);

// CSV: example_id,score,importance,selected,epoch
void write_core_set_csv(std::ostream& out, const CoreSet& core);

}  // namespace sslcalib

#endif  // SSLCALIB_INFUSE_HPP_
