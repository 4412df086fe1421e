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

#include "sslcalib/nn.hpp"

#include <cmath>

namespace sslcalib {
namespace {

Tensor relu_stack(const std::vector<Linear>& layers, Tensor h) {
  for (const auto& layer : layers) h = relu(layer.forward(h));
  return h;
}

std::vector<Linear> make_stack(std::size_t in, const std::vector<std::size_t>& widths,
                               Rng& rng) {
  std::vector<Linear> layers;
  for (std::size_t w : widths) {
    layers.push_back(Linear::create(in, w, InitScheme::kHe, rng));
    in = w;
  }
  return layers;
}

void append_named(std::vector<NamedTensor>& out, const std::string& name, const Linear& l) {
  out.push_back({name + "/weight", l.weight});
  out.push_back({name + "/bias", l.bias});
}

void copy_into(Tensor& dst, const Tensor& src, const std::string& name) {
  if (dst.shape() != src.shape()) {
    throw CheckpointError("checkpoint: record '" + name + "' has shape " +
                          shape_to_string(src.shape()) + ", model expects " +
                          shape_to_string(dst.shape()));
  }
  auto d = dst.mutable_data();
  auto s = src.data();
  std::copy(s.begin(), s.end(), d.begin());
}

void load_linear(Linear& l, std::span<const NamedTensor> records, const std::string& name) {
  copy_into(l.weight, find_record(records, name + "/weight"), name + "/weight");
  copy_into(l.bias, find_record(records, name + "/bias"), name + "/bias");
}

void push_params(std::vector<Tensor>& out, const Linear& l) {
  out.push_back(l.weight);
  out.push_back(l.bias);
}

}  // namespace

Linear Linear::create(std::size_t in, std::size_t out, InitScheme init, Rng& rng) {
  std::vector<double> w(in * out, 0.0);
  if (init != InitScheme::kZero) {
    const double stddev = init == InitScheme::kHe ? std::sqrt(2.0 / static_cast<double>(in))
                                                  : std::sqrt(1.0 / static_cast<double>(in));
    for (double& v : w) v = rng.normal(0.0, stddev);
  }
  return {Tensor::matrix(in, out, std::move(w), true), Tensor::zeros({out}, true)};
}

// ---- Classifier ----------------------------------------------------------------

Classifier::Classifier(const ClassifierSpec& spec, Rng& rng) : spec_(spec) {
  if (spec.input_dim == 0 || spec.num_classes < 2) {
    throw std::invalid_argument("Classifier: need input_dim >= 1 and num_classes >= 2");
  }
  backbone_ = make_stack(spec.input_dim, spec.hidden, rng);
  head_ = Linear::create(feature_dim(), spec.num_classes, InitScheme::kXavier, rng);
}

std::size_t Classifier::feature_dim() const {
  return spec_.hidden.empty() ? spec_.input_dim : spec_.hidden.back();
}

Tensor Classifier::features(const Tensor& x) const {
  if (x.rank() != 2 || x.cols() != spec_.input_dim) {
    throw ShapeError("Classifier: input " + shape_to_string(x.shape()) + " does not match input_dim " +
                     std::to_string(spec_.input_dim));
  }
  return relu_stack(backbone_, x);
}

Tensor Classifier::forward(const Tensor& x, double dropout_rate, bool train_mode,
                           std::uint64_t seed) const {
  Tensor h = features(x);
  if (train_mode && dropout_rate > 0.0) h = dropout(h, dropout_rate, seed);
  return head_.forward(h);
}

std::vector<Tensor> Classifier::parameters() const {
  auto out = backbone_parameters();
  push_params(out, head_);
  return out;
}

std::vector<Tensor> Classifier::backbone_parameters() const {
  std::vector<Tensor> out;
  for (const auto& l : backbone_) push_params(out, l);
  return out;
}

std::vector<Tensor> Classifier::head_parameters() const {
  std::vector<Tensor> out;
  push_params(out, head_);
  return out;
}

std::vector<NamedTensor> Classifier::named_parameters(const std::string& prefix) const {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < backbone_.size(); ++i) {
    append_named(out, prefix + "/backbone/" + std::to_string(i), backbone_[i]);
  }
  append_named(out, prefix + "/head", head_);
  return out;
}

void Classifier::load(std::span<const NamedTensor> records, const std::string& prefix) {
  for (std::size_t i = 0; i < backbone_.size(); ++i) {
    load_linear(backbone_[i], records, prefix + "/backbone/" + std::to_string(i));
  }
  load_linear(head_, records, prefix + "/head");
}

Classifier Classifier::clone(bool requires_grad) const {
  Classifier c;
  c.spec_ = spec_;
  for (const auto& l : backbone_) c.backbone_.push_back(l.clone());
  c.head_ = head_.clone();
  for (auto& p : c.parameters()) p.set_requires_grad(requires_grad);
  return c;
}

// ---- ModelPair -----------------------------------------------------------------

ModelPair ModelPair::create(const ClassifierSpec& spec, double beta, Rng& rng) {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("ModelPair: beta must lie in [0, 1]");
  }
  Classifier live(spec, rng);
  Classifier ema = live.clone(false);
  return {std::move(live), std::move(ema), beta};
}

void ema_update(ModelPair& pair) {
  const auto live = pair.live.parameters();
  auto shadow = pair.ema.parameters();
  const double beta = pair.beta;
  for (std::size_t p = 0; p < live.size(); ++p) {
    auto src = live[p].data();
    auto dst = shadow[p].mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i] = src[i] * beta + dst[i] * (1.0 - beta);
    }
  }
}

CrossFeatureOutput cross_feature_forward(const ModelPair& pair, const Tensor& x) {
  Tensor y = softmax(pair.ema.head(pair.live.features(x)));
  Tensor y_ema = softmax(pair.live.head(pair.ema.features(x)));
  return {std::move(y), std::move(y_ema)};
}

// ---- VAE -----------------------------------------------------------------------

void require_distribution(const Tensor& c, const char* context) {
  const std::size_t rows = c.rows(), cols = c.cols();
  auto d = c.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double v = d[r * cols + j];
      if (v < 0.0) {
        throw std::invalid_argument(std::string(context) + ": negative probability in row " +
                                    std::to_string(r));
      }
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-6) {
      throw std::invalid_argument(std::string(context) + ": row " + std::to_string(r) +
                                  " sums to " + std::to_string(s) + ", not 1");
    }
  }
}

VaeNet::VaeNet(const VaeSpec& spec, Rng& rng) : spec_(spec) {
  if (spec.z_dim == 0 || spec.hidden.empty()) {
    throw std::invalid_argument("VaeNet: z_dim and hidden widths must be non-empty");
  }
  const std::size_t enc_in = spec.num_classes + spec.feature_dim;
  const std::size_t dec_in = spec.num_classes + spec.z_dim + spec.feature_dim;
  encoder_ = make_stack(enc_in, spec.hidden, rng);
  mu_out_ = Linear::create(spec.hidden.back(), spec.z_dim, InitScheme::kZero, rng);
  log_sigma_out_ = Linear::create(spec.hidden.back(), spec.z_dim, InitScheme::kZero, rng);
  decoder_ = make_stack(dec_in, spec.hidden, rng);
  r_out_ = Linear::create(spec.hidden.back(), 1, InitScheme::kZero, rng);
}

Posterior VaeNet::encode(const Tensor& c, const Tensor& x) const {
  require_distribution(c, "vae_encode");
  if (c.cols() != spec_.num_classes || x.cols() != spec_.feature_dim || c.rows() != x.rows()) {
    throw ShapeError("vae_encode: got c " + shape_to_string(c.shape()) + " and x " +
                     shape_to_string(x.shape()));
  }
  Tensor h = relu_stack(encoder_, concat({c, x}));
  Tensor mu = mu_out_.forward(h);
  Tensor log_sigma = log_sigma_out_.forward(h);
  Tensor sigma = exp(log_sigma);
  return {std::move(mu), std::move(log_sigma), std::move(sigma)};
}

Tensor VaeNet::decode(const Tensor& c, const Tensor& z, const Tensor& x) const {
  if (z.cols() != spec_.z_dim) {
    throw ShapeError("vae_decode: z " + shape_to_string(z.shape()) + " does not match z_dim " +
                     std::to_string(spec_.z_dim));
  }
  Tensor h = relu_stack(decoder_, concat({c, z, x}));
  return sigmoid(r_out_.forward(h));
}

std::vector<Tensor> VaeNet::parameters() const {
  std::vector<Tensor> out;
  for (const auto& l : encoder_) push_params(out, l);
  push_params(out, mu_out_);
  push_params(out, log_sigma_out_);
  for (const auto& l : decoder_) push_params(out, l);
  push_params(out, r_out_);
  return out;
}

std::vector<NamedTensor> VaeNet::named_parameters(const std::string& prefix) const {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    append_named(out, prefix + "/encoder/" + std::to_string(i), encoder_[i]);
  }
  append_named(out, prefix + "/encoder/mu", mu_out_);
  append_named(out, prefix + "/encoder/log_sigma", log_sigma_out_);
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    append_named(out, prefix + "/decoder/" + std::to_string(i), decoder_[i]);
  }
  append_named(out, prefix + "/decoder/r", r_out_);
  return out;
}

void VaeNet::load(std::span<const NamedTensor> records, const std::string& prefix) {
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    load_linear(encoder_[i], records, prefix + "/encoder/" + std::to_string(i));
  }
  load_linear(mu_out_, records, prefix + "/encoder/mu");
  load_linear(log_sigma_out_, records, prefix + "/encoder/log_sigma");
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    load_linear(decoder_[i], records, prefix + "/decoder/" + std::to_string(i));
  }
  load_linear(r_out_, records, prefix + "/decoder/r");
}

Tensor reparameterize(const Tensor& mu, const Tensor& sigma, const Tensor& epsilon) {
  if (mu.shape() != sigma.shape() || mu.shape() != epsilon.shape()) {
    throw ShapeError("reparameterize: shapes " + shape_to_string(mu.shape()) + ", " +
                     shape_to_string(sigma.shape()) + ", " + shape_to_string(epsilon.shape()) +
                     " differ");
  }
  return add(mu, mul(epsilon, sigma));
}

}  // namespace sslcalib
