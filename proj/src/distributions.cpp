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

#include "fnproc/distributions.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace fnproc::dist {
namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

void check_same(const ad::Tensor& a, const ad::Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

}  // namespace

DiagGaussianParams DiagGaussianParams::make(const ad::Tensor& mean, const ad::Tensor& logvar) {
  check_same(mean, logvar, "DiagGaussianParams");
  return {mean, ad::clamp(logvar, kLogvarMin, kLogvarMax)};
}

ConcreteConfig::ConcreteConfig(double t) : temperature(t) {
  if (!(t > 0.0)) throw std::invalid_argument("concrete temperature must be positive");
}

ad::Tensor gaussian_rsample(const DiagGaussianParams& p, const Matrix& noise) {
  if (noise.shape() != p.mean.shape()) {
    throw ShapeError("gaussian_rsample: noise shape " + noise.shape().str() + " does not match mean " +
                     p.mean.shape().str());
  }
  ad::Tape& tape = *p.mean.tape();
  const ad::Tensor eps = tape.constant(noise);
  return ad::add(p.mean, ad::mul(ad::exp(ad::scale(p.logvar, 0.5)), eps));
}

ad::Tensor gaussian_log_prob_rows(const ad::Tensor& x, const DiagGaussianParams& p) {
  check_same(x, p.mean, "gaussian_log_prob");
  const ad::Tensor diff = ad::sub(x, p.mean);
  const ad::Tensor quad = ad::mul(ad::mul(diff, diff), ad::exp(ad::neg(p.logvar)));
  const ad::Tensor per_row = ad::row_sum(ad::add(p.logvar, quad));
  const double dims = static_cast<double>(p.dims());
  return ad::add_scalar(ad::scale(per_row, -0.5), -0.5 * kLog2Pi * dims);
}

ad::Tensor gaussian_log_prob(const ad::Tensor& x, const DiagGaussianParams& p) {
  return ad::sum(gaussian_log_prob_rows(x, p));
}

ad::Tensor gaussian_kl_rows(const DiagGaussianParams& q, const DiagGaussianParams& p) {
  check_same(q.mean, p.mean, "gaussian_kl");
  const ad::Tensor dm = ad::sub(q.mean, p.mean);
  const ad::Tensor num = ad::add(ad::exp(q.logvar), ad::mul(dm, dm));
  const ad::Tensor ratio = ad::mul(num, ad::exp(ad::neg(p.logvar)));
  const ad::Tensor inner = ad::add_scalar(ad::add(ad::sub(p.logvar, q.logvar), ratio), -1.0);
  return ad::scale(ad::row_sum(inner), 0.5);
}

ad::Tensor gaussian_kl(const DiagGaussianParams& q, const DiagGaussianParams& p) {
  return ad::sum(gaussian_kl_rows(q, p));
}

double logistic_noise(double u) {
  if (!(u > 0.0 && u < 1.0)) {
    throw std::domain_error("concrete noise must lie in (0, 1), got " + std::to_string(u));
  }
  return std::log(u) - std::log1p(-u);
}

ad::Tensor binary_concrete_rsample(const ad::Tensor& logit, const ConcreteConfig& cfg, const Matrix& u) {
  if (u.shape() != logit.shape()) {
    throw ShapeError("binary_concrete_rsample: noise shape " + u.shape().str() + " does not match logits " +
                     logit.shape().str());
  }
  Matrix noise(u.rows(), u.cols());
  for (std::size_t i = 0; i < u.size(); ++i) noise[i] = logistic_noise(u[i]);
  ad::Tape& tape = *logit.tape();
  const ad::Tensor shifted = ad::add(logit, tape.constant(std::move(noise)));
  return ad::sigmoid(ad::scale(shifted, 1.0 / cfg.temperature));
}

int bernoulli_sample(double prob, double u) { return u < prob ? 1 : 0; }

double std_normal_log_cdf(double x) {
  if (x >= -8.0) {
    if (x > 0.0) return std::log1p(-0.5 * std::erfc(x / std::numbers::sqrt2));
    return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
  }
  // Phi(x) = phi(x) / |x| * sum_n (-1)^n (2n-1)!! / x^(2n); the terms shrink
  // while 2n - 1 < x^2, which for x < -8 leaves 30+ usable terms.
  const double x2 = x * x;
  double term = 1.0;
  double series = 1.0;
  for (int n = 1; n <= 30; ++n) {
    const double next = -term * (2.0 * n - 1.0) / x2;
    if (std::fabs(next) >= std::fabs(term)) break;
    term = next;
    series += term;
  }
  return -0.5 * x2 - 0.5 * kLog2Pi - std::log(-x) + std::log(series);
}

}  // namespace fnproc::dist
