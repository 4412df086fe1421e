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

#include <cmath>
#include <filesystem>
#include <numbers>

#include "fixtures.hpp"
#include "sslcalib/report.hpp"
#include "sslcalib/trainer.hpp"

namespace sslcalib {
namespace {

using testing::same_parameters;
using testing::small_blobs;
using testing::small_config;

TEST(CosineLrTest, Examples) {
  EXPECT_EQ(cosine_lr(0, 1000, 0.03), 0.03);
  EXPECT_NEAR(cosine_lr(1000, 1000, 0.03), 0.03 * std::cos(7.0 * std::numbers::pi / 16.0), 1e-15);
  EXPECT_NEAR(cosine_lr(1000, 1000, 0.03), 0.005853, 1e-6);
  for (int k = 1; k <= 1000; ++k) EXPECT_LT(cosine_lr(k, 1000, 0.03), cosine_lr(k - 1, 1000, 0.03));
  EXPECT_THROW(cosine_lr(1001, 1000, 0.03), std::invalid_argument);
  EXPECT_THROW(cosine_lr(-1, 1000, 0.03), std::invalid_argument);
}

TEST(FixMatchLossTest, Examples) {
  const Matrix weak(1, 2, {0.98, 0.02});
  const Tensor strong = Tensor::matrix(1, 2, {std::log(0.7), std::log(0.3)});
  const std::vector<double> sel = {0.98};
  const auto out = fixmatch_unlabeled_loss(weak, strong, sel, 0.95);
  EXPECT_NEAR(out.loss.item(), -std::log(0.7), 1e-12);
  EXPECT_NEAR(out.loss.item(), 0.3567, 1e-4);
  EXPECT_EQ(out.mask_rate, 1.0);

  const std::vector<double> low = {0.5};
  const auto none = fixmatch_unlabeled_loss(weak, strong, low, 0.95);
  EXPECT_EQ(none.loss.item(), 0.0);
  EXPECT_EQ(none.mask_rate, 0.0);

  const Tensor confident = Tensor::matrix(1, 2, {40.0, -40.0});
  EXPECT_NEAR(fixmatch_unlabeled_loss(weak, confident, sel, 0.95).loss.item(), 0.0, 1e-12);
}

TEST(FixMatchLossTest, AveragesOverFullBatch) {
  const Matrix weak(2, 2, {0.98, 0.02, 0.6, 0.4});
  const Tensor strong = Tensor::matrix(2, 2, {std::log(0.7), std::log(0.3), 0.0, 0.0});
  const std::vector<double> sel = {0.98, 0.6};
  const auto out = fixmatch_unlabeled_loss(weak, strong, sel, 0.95);
  EXPECT_NEAR(out.loss.item(), -std::log(0.7) / 2.0, 1e-12);
  EXPECT_EQ(out.mask_rate, 0.5);
}

TEST(FixMatchLossTest, RaisingThresholdNeverSelectsMore) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix weak(20, 3);
    std::vector<double> sel(20);
    for (std::size_t i = 0; i < 20; ++i) {
      double a = rng.uniform(), b = rng.uniform(), c = rng.uniform();
      const double s = a + b + c;
      weak.at(i, 0) = a / s;
      weak.at(i, 1) = b / s;
      weak.at(i, 2) = c / s;
      sel[i] = std::max({a, b, c}) / s;
    }
    const Tensor strong = Tensor::zeros({20, 3});
    double prev = 1.0;
    for (double tau = 0.0; tau <= 1.0; tau += 0.05) {
      const double rate = fixmatch_unlabeled_loss(weak, strong, sel, tau).mask_rate;
      EXPECT_LE(rate, prev);
      prev = rate;
    }
  }
}

TEST(TrainConfigTest, ValidationAndScaling) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.scaled_iterations(), 20000);
  c.keep_ratio = 0.1;
  EXPECT_EQ(c.scaled_iterations(), 2000);
  for (auto mutate : std::vector<std::function<void(TrainConfig&)>>{
           [](TrainConfig& t) { t.labeled_batch = 0; },
           [](TrainConfig& t) { t.eta0 = 0.0; },
           [](TrainConfig& t) { t.tau = 1.0; },
           [](TrainConfig& t) { t.tau = 0.0; },
           [](TrainConfig& t) { t.keep_ratio = 0.0; },
           [](TrainConfig& t) { t.lambda_vcc = -1.0; },
           [](TrainConfig& t) { t.mc_passes = 0; }}) {
    TrainConfig bad;
    mutate(bad);
    EXPECT_THROW(bad.validate(), std::invalid_argument);
  }
}

TEST(TrainerTest, SupervisedLossDecreasesOnBlobs) {
  const Dataset ds = small_blobs();
  Trainer trainer(small_config(), ds);
  auto labeled_ce = [&] {
    const auto& lab = trainer.view().labeled;
    std::vector<double> onehot(lab.size() * 2, 0.0);
    for (std::size_t i = 0; i < lab.size(); ++i) onehot[i * 2 + static_cast<std::size_t>(lab.labels[i])] = 1.0;
    NoGradGuard no_grad;
    return soft_cross_entropy(trainer.models().live.forward(lab.features.to_tensor()),
                              Tensor::matrix(lab.size(), 2, onehot))
        .item();
  };
  const double before = labeled_ce();
  for (int i = 0; i < 200; ++i) {
    const StepMetrics m = trainer.step();
    EXPECT_GE(m.mask_rate, 0.0);
    EXPECT_LE(m.mask_rate, 1.0);
  }
  EXPECT_LT(labeled_ce(), before);
}

TEST(TrainerTest, EmaMovesOnlyByBlending) {
  TrainConfig cfg = small_config();
  cfg.vcc_enabled = true;
  Trainer trainer(cfg, small_blobs());
  for (int i = 0; i < 45; ++i) {
    std::vector<std::vector<double>> old;
    for (const auto& p : trainer.models().ema.parameters()) old.emplace_back(p.data().begin(), p.data().end());
    trainer.step();
    const auto live = trainer.models().live.parameters();
    const auto ema = trainer.models().ema.parameters();
    const double beta = trainer.models().beta;
    for (std::size_t k = 0; k < ema.size(); ++k) {
      EXPECT_FALSE(ema[k].has_grad());
      for (std::size_t j = 0; j < ema[k].numel(); ++j) {
        ASSERT_EQ(ema[k].data()[j], live[k].data()[j] * beta + old[k][j] * (1.0 - beta));
      }
    }
  }
}

TEST(TrainerTest, PerturbingEmaDoesNotChangeBaselineUpdates) {
  // Without VCC the EMA shadow only feeds diagnostics, so the live weights
  // must follow the same path regardless of its contents.
  const Dataset ds = small_blobs();
  Trainer a(small_config(), ds);
  Trainer b(small_config(), ds);
  for (auto& p : b.models().ema.parameters()) {
    for (double& v : p.mutable_data()) v += 0.5;
  }
  for (int i = 0; i < 30; ++i) {
    a.step();
    b.step();
  }
  EXPECT_TRUE(same_parameters(a.models().live, b.models().live));
}

TEST(TrainerTest, IdenticalRunsGiveIdenticalReports) {
  const Dataset ds = small_blobs();
  TrainConfig cfg = small_config();
  cfg.vcc_enabled = true;
  cfg.keep_ratio = 0.5;
  Trainer a(cfg, ds);
  Trainer b(cfg, ds);
  const RunReport ra = a.run();
  const RunReport rb = b.run();
  EXPECT_TRUE(same_trajectory(ra, rb));
  EXPECT_TRUE(same_parameters(a.models().live, b.models().live));
  EXPECT_EQ(ra.iterations, 100);
  EXPECT_GT(ra.infuse_scoring_passes, 0u);
  EXPECT_FALSE(ra.coreset_refresh_log.empty());
}

TEST(TrainerTest, ReportCarriesFinalMetrics) {
  Trainer trainer(small_config(), small_blobs());
  const RunReport r = trainer.run();
  ASSERT_FALSE(r.evals.empty());
  EXPECT_EQ(r.evals.back().iteration, 200);
  EXPECT_EQ(r.final_metrics.error_rate, r.evals.back().error_rate);
  EXPECT_GE(r.wall_seconds, 0.0);
  EXPECT_EQ(r.evals.size(), 4u);
  for (const auto& e : r.evals) {
    EXPECT_GE(e.ece, 0.0);
    EXPECT_LE(e.ece, e.mce + 1e-15);
  }
}

TEST(TrainerTest, KeepRatioOneSkipsScoring) {
  Trainer trainer(small_config(), small_blobs());
  trainer.run();
  EXPECT_EQ(trainer.report().infuse_scoring_passes, 0u);
  EXPECT_FALSE(trainer.core_set().has_value());
}

TEST(TrainerTest, UnlabeledConsumptionScalesWithKeepRatio) {
  const Dataset ds = small_blobs();
  Trainer full(small_config(), ds);
  full.run();
  for (double k : {0.5, 0.3}) {
    TrainConfig cfg = small_config();
    cfg.keep_ratio = k;
    Trainer part(cfg, ds);
    part.run();
    const double expected = k * static_cast<double>(full.report().unlabeled_consumed);
    EXPECT_LE(std::abs(static_cast<double>(part.report().unlabeled_consumed) - expected),
              static_cast<double>(cfg.unlabeled_batch));
  }
}

TEST(TrainerTest, CoreSetRestrictsUnlabeledPool) {
  TrainConfig cfg = small_config();
  cfg.keep_ratio = 0.2;
  cfg.coreset_method = CoreSetMethod::kRandom;
  Trainer trainer(cfg, small_blobs());
  trainer.step();
  ASSERT_TRUE(trainer.core_set().has_value());
  EXPECT_EQ(trainer.core_set()->selected_ids.size(),
            core_set_size(trainer.view().unlabeled.size(), 0.2));
  EXPECT_EQ(trainer.report().infuse_scoring_passes, 0u);
}

TEST(TrainerTest, LambdaZeroMatchesBaselineBitExactly) {
  const Dataset ds = small_blobs();
  TrainConfig base = small_config();
  TrainConfig probe = base;
  probe.vcc_enabled = false;
  probe.lambda_vcc = 0.0;
  probe.record_consistency = true;
  Trainer a(base, ds);
  Trainer b(probe, ds);
  for (int i = 0; i < 120; ++i) {
    ASSERT_TRUE(testing::same_step(a.step(), b.step())) << "iteration " << i;
  }
  EXPECT_TRUE(same_parameters(a.models().live, b.models().live));
  EXPECT_TRUE(same_parameters(a.models().ema, b.models().ema));
  EXPECT_GT(b.queue().size(), 0u);
}

TEST(TrainerTest, ResumeReproducesUninterruptedRun) {
  const Dataset ds = small_blobs();
  TrainConfig cfg = small_config();
  cfg.vcc_enabled = true;
  cfg.keep_ratio = 0.5;
  Trainer straight(cfg, ds);
  const RunReport full = straight.run();

  const auto path = std::filesystem::temp_directory_path() / "sslcalib_resume_test.sslc";
  {
    Trainer first(cfg, ds);
    first.run(57);
    first.save_checkpoint(path);
  }
  Trainer second(cfg, ds);
  second.restore(load_checkpoint(path));
  EXPECT_EQ(second.iteration(), 57);
  const RunReport resumed = second.run();
  std::filesystem::remove(path);
  EXPECT_TRUE(same_trajectory(full, resumed));
  EXPECT_TRUE(same_parameters(straight.models().live, second.models().live));
  EXPECT_TRUE(same_parameters(straight.models().ema, second.models().ema));
}

TEST(TrainerTest, RestoreRejectsMismatchedArchitecture) {
  const Dataset ds = small_blobs();
  Trainer a(small_config(), ds);
  TrainConfig other = small_config();
  other.hidden = {8};
  Trainer b(other, ds);
  EXPECT_THROW(b.restore(a.checkpoint_records()), std::exception);
}

TEST(TrainerTest, DivergenceReportsIteration) {
  TrainConfig cfg = small_config();
  cfg.eta0 = 1e12;
  Trainer trainer(cfg, small_blobs());
  try {
    for (int i = 0; i < 50; ++i) trainer.step();
    FAIL() << "expected divergence";
  } catch (const TrainingError& e) {
    EXPECT_THAT(e.what(), ::testing::HasSubstr("iteration"));
  }
}

TEST(TrainerTest, LoadClassifierMatchesLiveModel) {
  Trainer trainer(small_config(), small_blobs());
  for (int i = 0; i < 10; ++i) trainer.step();
  const Classifier loaded = load_classifier(trainer.checkpoint_records());
  EXPECT_TRUE(same_parameters(loaded, trainer.models().live));
  const auto a = predict(loaded, evaluation_set(small_blobs(), Split::kTest));
  const auto b = trainer.predict_test();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].confidence, b[i].confidence);
}

}  // namespace
}  // namespace sslcalib
