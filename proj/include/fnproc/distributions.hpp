// Copyright 2026 The fnproc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "fnproc/matrix.hpp"
#include "fnproc/tensor.hpp"

/// Reparametrized samplers and log-densities. Gaussian parameters are
/// matrices with one row per point and one column per latent dimension.
namespace fnproc::dist {

inline constexpr double kLogvarMin = -20.0;
inline constexpr double kLogvarMax = 20.0;

/// Diagonal Gaussian; logvar is clamped to [kLogvarMin, kLogvarMax] on
/// construction.
struct DiagGaussianParams {
  ad::Tensor mean;
  ad::Tensor logvar;

  static DiagGaussianParams make(const ad::Tensor& mean, const ad::Tensor& logvar);
  std::size_t points() const { return mean.rows(); }
  std::size_t dims() const { return mean.cols(); }
};

struct ConcreteConfig {
  double temperature = 0.3;

  explicit ConcreteConfig(double t = 0.3);
};

/// mean + exp(logvar / 2) * noise.
ad::Tensor gaussian_rsample(const DiagGaussianParams& p, const Matrix& noise);

/// Per-row log N(x; mean, exp(logvar)), summed over columns -> m x 1.
ad::Tensor gaussian_log_prob_rows(const ad::Tensor& x, const DiagGaussianParams& p);
/// Sum of gaussian_log_prob_rows, 1x1.
ad::Tensor gaussian_log_prob(const ad::Tensor& x, const DiagGaussianParams& p);

/// Per-row KL(q || p) in closed form -> m x 1.
ad::Tensor gaussian_kl_rows(const DiagGaussianParams& q, const DiagGaussianParams& p);
ad::Tensor gaussian_kl(const DiagGaussianParams& q, const DiagGaussianParams& p);

/// sigmoid((logit + log u - log(1 - u)) / temperature), elementwise. Throws
/// std::domain_error unless every u lies in (0, 1).
ad::Tensor binary_concrete_rsample(const ad::Tensor& logit, const ConcreteConfig& cfg, const Matrix& u);

/// 1 iff u < prob.
int bernoulli_sample(double prob, double u);

/// ln Phi(x). Uses erfc down to x = -8 and the asymptotic Mills-ratio
/// series below that, so the result stays finite for very negative x.
double std_normal_log_cdf(double x);

/// Logistic noise log u - log(1 - u).
double logistic_noise(double u);

}  // namespace fnproc::dist
