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

#ifndef SSLCALIB_TESTS_FIXTURES_HPP_
#define SSLCALIB_TESTS_FIXTURES_HPP_

#include <bit>
#include <cstdint>
#include <vector>

#include "sslcalib/data.hpp"
#include "sslcalib/trainer.hpp"

namespace sslcalib::testing {

// Small, fast problem: well-separated blobs with a handful of labels.
inline Dataset small_blobs(std::uint64_t seed = 3, std::size_t n = 300) {
  return split(make_blobs(n, 2, 1.0, seed), 4, 30, 60, seed + 1);
}

// A config that exercises every moving part at toy scale.
inline TrainConfig small_config(std::uint64_t seed = 1) {
  TrainConfig c;
  c.seed = seed;
  c.total_iterations = 200;
  c.epoch_iterations = 40;
  c.eval_period = 50;
  c.labeled_batch = 8;
  c.unlabeled_batch = 16;
  c.hidden = {16};
  c.queue_capacity = 256;
  c.mc_passes = 2;
  c.z_dim = 4;
  c.vae_hidden = {16};
  c.warmup_epochs = 1;
  c.refresh_period = 2;
  c.score_batch_size = 4;
  return c;
}

// Bitwise equality of every parameter of two classifiers.
inline bool same_parameters(const Classifier& a, const Classifier& b) {
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].shape() != pb[i].shape()) return false;
    for (std::size_t j = 0; j < pa[i].numel(); ++j) {
      if (std::bit_cast<std::uint64_t>(pa[i].data()[j]) !=
          std::bit_cast<std::uint64_t>(pb[i].data()[j])) {
        return false;
      }
    }
  }
  return true;
}

inline bool same_step(const StepMetrics& a, const StepMetrics& b) {
  return a.iteration == b.iteration && a.lr == b.lr && a.loss == b.loss &&
         a.loss_lab == b.loss_lab && a.loss_unlab == b.loss_unlab && a.mask_rate == b.mask_rate;
}

}  // namespace sslcalib::testing

#endif  // SSLCALIB_TESTS_FIXTURES_HPP_
