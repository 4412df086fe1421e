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

#include "sslcalib/vcc.hpp"

#include <stdexcept>

namespace sslcalib {

Tensor kl_closed_form(const Tensor& mu, const Tensor& sigma) {
  if (mu.shape() != sigma.shape()) {
    throw ShapeError("kl_closed_form: mu " + shape_to_string(mu.shape()) + " vs sigma " +
                     shape_to_string(sigma.shape()));
  }
  for (double s : sigma.data()) {
    if (!(s > 0.0)) throw std::invalid_argument("kl_closed_form: sigma must be positive");
  }
  Tensor per_dim = add_scalar(
      add(scale(log(sigma), -1.0), scale(add(mul(mu, mu), mul(sigma, sigma)), 0.5)), -0.5);
  return scale(sum(per_dim), 1.0 / static_cast<double>(mu.rows()));
}

Tensor recon_loss(const Tensor& r, const Tensor& r_tilde) {
  if (r.shape() != r_tilde.shape()) {
    throw ShapeError("recon_loss: r " + shape_to_string(r.shape()) + " vs target " +
                     shape_to_string(r_tilde.shape()));
  }
  Tensor diff = sub(r, r_tilde.detach());
  return mean(mul(diff, diff));
}

Tensor total_loss(const Tensor& l_lab, const Tensor& l_unlab, const VccLossTerms& terms,
                  bool literal_sign) {
  if (terms.lambda_vcc < 0.0 || terms.lambda_unlab < 0.0) {
    throw std::invalid_argument("total_loss: loss weights must be non-negative");
  }
  Tensor loss = add(l_lab, scale(l_unlab, terms.lambda_unlab));
  if (terms.lambda_vcc == 0.0 || !terms.recon.defined()) return loss;
  Tensor vae = literal_sign ? sub(terms.recon, terms.kl) : add(terms.recon, terms.kl);
  return add(loss, scale(vae, terms.lambda_vcc));
}

std::vector<std::uint8_t> select_pseudo_labels(std::span<const double> r, double tau) {
  std::vector<std::uint8_t> mask(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) mask[i] = r[i] >= tau ? 1 : 0;
  return mask;
}

}  // namespace sslcalib
