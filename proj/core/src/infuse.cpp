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

#include "sslcalib/infuse.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <stdexcept>

namespace sslcalib {
namespace {

GradientVector collect_gradient(const Tensor& loss, std::vector<Tensor> params,
                                GradientSubset subset) {
  for (auto& p : params) p.clear_grad();
  backward(loss);
  GradientVector g;
  g.subset_id = subset_name(subset);
  for (auto& p : params) {
    if (p.has_grad()) {
      auto gr = p.grad();
      g.values.insert(g.values.end(), gr.begin(), gr.end());
    } else {
      g.values.insert(g.values.end(), p.numel(), 0.0);
    }
    p.clear_grad();
  }
  return g;
}

// Logits with gradients flowing only into the requested subset.
Tensor subset_logits(const Classifier& model, const Tensor& x, GradientSubset subset) {
  if (subset == GradientSubset::kFull) return model.forward(x);
  Tensor h;
  {
    NoGradGuard no_grad;
    h = model.features(x);
  }
  return model.head(h);
}

Matrix one_hot(std::span<const int> labels, std::size_t num_classes) {
  Matrix m(labels.size(), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    m.at(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return m;
}

}  // namespace

const char* subset_name(GradientSubset s) {
  return s == GradientSubset::kHead ? "head" : "full";
}

GradientSubset parse_subset(std::string_view name) {
  if (name == "head") return GradientSubset::kHead;
  if (name == "full") return GradientSubset::kFull;
  throw std::invalid_argument("unknown gradient subset '" + std::string(name) + "'");
}

std::vector<Tensor> subset_parameters(const Classifier& model, GradientSubset subset) {
  return subset == GradientSubset::kHead ? model.head_parameters() : model.parameters();
}

GradientVector unlabeled_loss_grad(const Classifier& model, const Matrix& u_batch, double tau,
                                   double lambda, GradientSubset subset) {
  const Tensor x = u_batch.to_tensor();
  const std::size_t m = model.spec().num_classes;
  Matrix targets(u_batch.rows, m);
  {
    NoGradGuard no_grad;
    const Tensor q = softmax(model.forward(x));
    for (std::size_t i = 0; i < u_batch.rows; ++i) {
      auto row = q.data().subspan(i * m, m);
      const auto best = std::max_element(row.begin(), row.end());
      if (*best >= tau) targets.at(i, static_cast<std::size_t>(best - row.begin())) = lambda;
    }
  }
  Tensor loss = soft_cross_entropy(subset_logits(model, x, subset), targets.to_tensor());
  return collect_gradient(loss, subset_parameters(model, subset), subset);
}

GradientVector labeled_loss_grad(const Classifier& model, const Matrix& x,
                                 std::span<const int> labels, GradientSubset subset) {
  Tensor loss = soft_cross_entropy(subset_logits(model, x.to_tensor(), subset),
                                   one_hot(labels, model.spec().num_classes).to_tensor());
  return collect_gradient(loss, subset_parameters(model, subset), subset);
}

SupportSet mix_pairs(const Matrix& features, std::span<const int> labels, std::size_t num_classes,
                     std::span<const double> weights) {
  if (features.rows != labels.size() || features.rows != 2 * weights.size()) {
    throw std::invalid_argument("mix_pairs: need 2 rows and 2 labels per weight");
  }
  const Matrix y = one_hot(labels, num_classes);
  SupportSet s{Matrix(weights.size(), features.cols), Matrix(weights.size(), num_classes)};
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double w = weights[i];
    for (std::size_t j = 0; j < features.cols; ++j) {
      s.features.at(i, j) = w * features.at(2 * i, j) + (1.0 - w) * features.at(2 * i + 1, j);
    }
    for (std::size_t c = 0; c < num_classes; ++c) {
      s.targets.at(i, c) = w * y.at(2 * i, c) + (1.0 - w) * y.at(2 * i + 1, c);
    }
  }
  return s;
}

SupportSet build_support_set(const LabeledSet& labeled, std::size_t pairs,
                             const Classifier& model, double alpha, Rng& rng) {
  if (pairs == 0) throw std::invalid_argument("build_support_set: need at least one pair");
  if (labeled.size() < 2 * pairs) {
    throw std::invalid_argument("build_support_set: " + std::to_string(labeled.size()) +
                                " labeled examples cannot supply " + std::to_string(pairs) +
                                " pairs");
  }
  std::vector<std::size_t> order(labeled.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  order.resize(2 * pairs);
  std::vector<int> labels;
  for (auto i : order) labels.push_back(labeled.labels[i]);
  Matrix h;
  {
    NoGradGuard no_grad;
    const Tensor f = model.features(labeled.features.gather(order).to_tensor());
    h = Matrix(f.rows(), f.cols(), std::vector<double>(f.data().begin(), f.data().end()));
  }
  std::vector<double> weights(pairs);
  for (double& w : weights) w = rng.beta(alpha, alpha);
  return mix_pairs(h, labels, labeled.num_classes, weights);
}

GradientVector validation_grad_approx(const SupportSet& support, const Classifier& model,
                                      GradientSubset subset) {
  if (support.size() == 0) throw std::invalid_argument("validation_grad_approx: empty support set");
  Tensor loss = soft_cross_entropy(model.head(support.features.to_tensor()),
                                   support.targets.to_tensor());
  return collect_gradient(loss, subset_parameters(model, subset), subset);
}

double infuse_score(const GradientVector& g_val, const GradientVector& g_u) {
  if (g_val.subset_id != g_u.subset_id || g_val.values.size() != g_u.values.size()) {
    throw std::invalid_argument("infuse_score: gradient subsets differ ('" + g_val.subset_id +
                                "' vs '" + g_u.subset_id + "')");
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < g_val.values.size(); ++i) dot += g_val.values[i] * g_u.values[i];
  return -dot;
}

bool CoreSet::contains(std::size_t id) const {
  return std::binary_search(selected_ids.begin(), selected_ids.end(), id);
}

std::size_t core_set_size(std::size_t n, double keep_ratio) {
  if (!(keep_ratio > 0.0 && keep_ratio <= 1.0)) {
    throw std::invalid_argument("keep ratio must lie in (0, 1]");
  }
  const double exact = keep_ratio * static_cast<double>(n);
  auto k = static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
  return std::clamp<std::size_t>(k, n == 0 ? 0 : 1, n);
}

CoreSet select_core_set(const std::map<std::size_t, double>& scores, double keep_ratio,
                        bool literal_highest_score, std::int64_t epoch) {
  if (scores.empty()) throw std::invalid_argument("select_core_set: no scores");
  const std::size_t keep = core_set_size(scores.size(), keep_ratio);
  std::vector<std::pair<std::size_t, double>> ranked;
  for (const auto& [id, score] : scores) {
    ranked.emplace_back(id, literal_highest_score ? score : -score);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  CoreSet core;
  core.keep_ratio = keep_ratio;
  core.built_at_epoch = epoch;
  core.scores = scores;
  for (std::size_t i = 0; i < keep; ++i) core.selected_ids.push_back(ranked[i].first);
  std::sort(core.selected_ids.begin(), core.selected_ids.end());
  return core;
}

CoreSet random_core_set(std::span<const std::size_t> ids, double keep_ratio, Rng& rng,
                        std::int64_t epoch) {
  if (ids.empty()) throw std::invalid_argument("random_core_set: no ids");
  std::vector<std::size_t> pool(ids.begin(), ids.end());
  rng.shuffle(pool);
  pool.resize(core_set_size(ids.size(), keep_ratio));
  std::sort(pool.begin(), pool.end());
  CoreSet core;
  core.keep_ratio = keep_ratio;
  core.built_at_epoch = epoch;
  core.selected_ids = std::move(pool);
  return core;
}

bool refresh_schedule(std::int64_t epoch, std::int64_t period) {
  if (period < 1) throw std::invalid_argument("refresh_schedule: period must be >= 1");
  return epoch % period == 0;
}

std::map<std::size_t, double> score_unlabeled(const Classifier& model, const UnlabeledSet& pool,
                                              const GradientVector& g_val,
                                              const InfuseOptions& options, Rng& rng) {
  if (options.score_batch_size == 0) throw std::invalid_argument("score_unlabeled: batch size 0");
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (options.score_batch_size > 1) rng.shuffle(order);
  std::map<std::size_t, double> scores;
  for (std::size_t start = 0; start < order.size(); start += options.score_batch_size) {
    const std::size_t end = std::min(order.size(), start + options.score_batch_size);
    std::span<const std::size_t> rows(order.data() + start, end - start);
    const GradientVector g_u = unlabeled_loss_grad(model, pool.features.gather(rows), options.tau,
                                                   options.lambda_unlab, options.subset);
    const double s = infuse_score(g_val, g_u);
    for (auto r : rows) scores[pool.ids[r]] = s;
  }
  return scores;
}

CoreSet build_core_set(const Classifier& model, const LabeledSet& labeled,
                       const UnlabeledSet& pool, double keep_ratio, const InfuseOptions& options,
                       std::uint64_t seed, std::int64_t epoch) {
  Rng mixup_rng(seed, "mixup", static_cast<std::uint64_t>(epoch));
  Rng score_rng(seed, "infuse", static_cast<std::uint64_t>(epoch));
  const std::size_t pairs =
      options.support_pairs > 0 ? options.support_pairs : std::max<std::size_t>(1, labeled.size() / 2);
  const SupportSet support = build_support_set(labeled, pairs, model, options.mixup_alpha, mixup_rng);
  const GradientVector g_val = validation_grad_approx(support, model, options.subset);
  const auto scores = score_unlabeled(model, pool, g_val, options, score_rng);
  return select_core_set(scores, keep_ratio, options.literal_highest_score, epoch);
}

void write_core_set_csv(std::ostream& out, const CoreSet& core) {
  out << "example_id,score,importance,selected,epoch\n" << std::setprecision(17);
  for (const auto& [id, score] : core.scores) {
    out << id << ',' << score << ',' << -score << ',' << (core.contains(id) ? 1 : 0) << ','
        << core.built_at_epoch << '\n';
  }
}

}  // namespace sslcalib
