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

#ifndef SSLCALIB_VCC_HPP_
#define SSLCALIB_VCC_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "sslcalib/tensor.hpp"

namespace sslcalib {

// KL(N(mu, sigma^2) || N(0, 1)): per dimension -ln sigma + (mu^2 + sigma^2)/2 - 1/2,
// summed over the latent dimension and averaged over the batch.
Tensor kl_closed_form(const Tensor& mu, const Tensor& sigma);

// Mean squared error between the decoder output and the (constant) target.
Tensor recon_loss(const Tensor& r, const Tensor& r_tilde);

struct VccLossTerms {
  Tensor recon;
  Tensor kl;
  double lambda_vcc = 2.0;
  double lambda_unlab = 1.0;
};

// L_lab + lambda_unlab * L_unlab + lambda_vcc * (recon + kl).
// With `literal_sign` the KL term is subtracted instead, as the objective is
// printed in the original formulation.
Tensor total_loss(const Tensor& l_lab, const Tensor& l_unlab, const VccLossTerms& terms,
                  bool literal_sign = false);

// mask[i] = r[i] >= tau. The pseudo-label class itself is unchanged.
std::vector<std::uint8_t> select_pseudo_labels(std::span<const double> r, double tau);

}  // namespace sslcalib

#endif  // SSLCALIB_VCC_HPP_
