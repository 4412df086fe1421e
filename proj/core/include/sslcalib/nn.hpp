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

#ifndef SSLCALIB_NN_HPP_
#define SSLCALIB_NN_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sslcalib/checkpoint.hpp"
#include "sslcalib/rng.hpp"
#include "sslcalib/tensor.hpp"

namespace sslcalib {

enum class InitScheme { kHe, kXavier, kZero };

// y = x W + b with W of shape [in, out] and b of shape [out].
struct Linear {
  Tensor weight;
  Tensor bias;

  static Linear create(std::size_t in, std::size_t out, InitScheme init, Rng& rng);
  Tensor forward(const Tensor& x) const { return add(matmul(x, weight), bias); }
  std::size_t in_dim() const { return weight.shape()[0]; }
  std::size_t out_dim() const { return weight.shape()[1]; }
  Linear clone() const { return {weight.clone(), bias.clone()}; }
};

struct ClassifierSpec {
  std::size_t input_dim = 2;
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t num_classes = 2;
};

// MLP classifier split into a ReLU backbone and a single linear head. An
// empty `hidden` list makes the backbone the identity (plain softmax
// regression), which the influence oracle relies on.
class Classifier {
 public:
  Classifier(const ClassifierSpec& spec, Rng& rng);

  const ClassifierSpec& spec() const { return spec_; }
  std::size_t feature_dim() const;

  Tensor features(const Tensor& x) const;
  Tensor head(const Tensor& h) const { return head_.forward(h); }
  const Linear& head_layer() const { return head_; }

  // Logits for a batch. In train mode dropout with `dropout_rate` is applied
  // to the head input; eval mode is deterministic.
  Tensor forward(const Tensor& x, double dropout_rate = 0.0, bool train_mode = false,
                 std::uint64_t seed = 0) const;

  std::vector<Tensor> parameters() const;
  std::vector<Tensor> backbone_parameters() const;
  std::vector<Tensor> head_parameters() const;
  std::vector<NamedTensor> named_parameters(const std::string& prefix) const;
  // Copies values from `records` (matched by name) into this model.
  void load(std::span<const NamedTensor> records, const std::string& prefix);

  // Deep copy; `requires_grad` applies to every parameter of the copy.
  Classifier clone(bool requires_grad) const;

 private:
  Classifier() = default;
  ClassifierSpec spec_;
  std::vector<Linear> backbone_;
  Linear head_;
};

// Live parameters theta plus the EMA shadow theta_ema.
struct ModelPair {
  Classifier live;
  Classifier ema;
  double beta = 0.001;

  static ModelPair create(const ClassifierSpec& spec, double beta, Rng& rng);
};

// theta_ema <- theta * beta + theta_ema * (1 - beta), elementwise.
void ema_update(ModelPair& pair);

// y from the live backbone through the EMA head, y_ema from the EMA backbone
// through the live head. Both are softmax distributions.
struct CrossFeatureOutput {
  Tensor y;
  Tensor y_ema;
};
CrossFeatureOutput cross_feature_forward(const ModelPair& pair, const Tensor& x);

struct VaeSpec {
  std::size_t num_classes = 2;
  std::size_t feature_dim = 2;
  std::size_t z_dim = 16;
  std::vector<std::size_t> hidden = {256, 64};
};

struct Posterior {
  Tensor mu;
  Tensor log_sigma;
  Tensor sigma;
};

// Conditional VAE that reconstructs a calibrated confidence r in (0, 1) from
// the classifier's confidence distribution c and the input features x.
// Encoder: concat(c, x) -> MLP -> (mu, log sigma). Decoder: concat(c, z, x)
// -> MLP -> logistic unit. Output layers start at zero, so an untrained
// network yields the prior (mu=0, sigma=1) and r=0.5.
class VaeNet {
 public:
  VaeNet(const VaeSpec& spec, Rng& rng);

  const VaeSpec& spec() const { return spec_; }

  Posterior encode(const Tensor& c, const Tensor& x) const;
  // Returns r with shape [batch, 1].
  Tensor decode(const Tensor& c, const Tensor& z, const Tensor& x) const;

  std::vector<Tensor> parameters() const;
  std::vector<NamedTensor> named_parameters(const std::string& prefix) const;
  void load(std::span<const NamedTensor> records, const std::string& prefix);

 private:
  VaeSpec spec_;
  std::vector<Linear> encoder_;
  Linear mu_out_;
  Linear log_sigma_out_;
  std::vector<Linear> decoder_;
  Linear r_out_;
};

// z = mu + epsilon * sigma, differentiable in mu and sigma.
Tensor reparameterize(const Tensor& mu, const Tensor& sigma, const Tensor& epsilon);

// Checks that every row of `c` is a probability distribution.
void require_distribution(const Tensor& c, const char* context);

}  // namespace sslcalib

#endif  // SSLCALIB_NN_HPP_
