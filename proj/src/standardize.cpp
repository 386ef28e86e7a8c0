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

#include "standardize.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fnproc::detail {
namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

void mean_std(std::span<const double> v, double& mean, double& sd) {
  const double n = static_cast<double>(v.size());
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = std::sqrt(ss / n);
  if (!(sd > 0.0)) sd = 1.0;
}

}  // namespace

void add_standardization(ParameterStore& store, std::size_t input_dim) {
  store.add("norm.x_mean", Matrix(1, input_dim, 0.0), false);
  store.add("norm.x_std", Matrix(1, input_dim, 1.0), false);
  store.add("norm.y", Matrix::row({0.0, 1.0}), false);
}

void fit_standardization(ParameterStore& store, const data::LabeledDataset& ds, std::span<const std::size_t> rows) {
  if (rows.empty()) throw std::invalid_argument("fit_standardization: no rows");
  Matrix& xm = store.get("norm.x_mean");
  Matrix& xs = store.get("norm.x_std");
  std::vector<double> col(rows.size());
  for (std::size_t c = 0; c < xm.cols(); ++c) {
    for (std::size_t i = 0; i < rows.size(); ++i) col[i] = ds.inputs(rows[i], c);
    mean_std(col, xm(0, c), xs(0, c));
  }
  for (std::size_t i = 0; i < rows.size(); ++i) col[i] = ds.values.at(rows[i]);
  Matrix& ny = store.get("norm.y");
  mean_std(col, ny(0, 0), ny(0, 1));
}

ad::Tensor standardize_inputs(const BoundParams& p, const ad::Tensor& x) {
  const Matrix& xm = p.store().get("norm.x_mean");
  const Matrix& xs = p.store().get("norm.x_std");
  const std::size_t d = xm.cols();
  Matrix inv(d, d);
  Matrix shift(1, d);
  for (std::size_t c = 0; c < d; ++c) {
    inv(c, c) = 1.0 / xs(0, c);
    shift(0, c) = -xm(0, c) / xs(0, c);
  }
  ad::Tape& tape = *x.tape();
  return ad::add_row(ad::matmul(x, tape.constant(std::move(inv))), tape.constant(std::move(shift)));
}

Matrix standardize_targets(const ParameterStore& store, const Matrix& targets) {
  if (targets.cols() != 1) throw ShapeError("regression targets must be a column, got " + targets.shape().str());
  const Matrix& ny = store.get("norm.y");
  Matrix out(targets.rows(), 1);
  for (std::size_t r = 0; r < targets.rows(); ++r) out(r, 0) = (targets(r, 0) - ny(0, 0)) / ny(0, 1);
  return out;
}

ad::Tensor heteroscedastic_sigma(const ad::Tensor& d) { return ad::add_scalar(ad::scale(ad::softplus(d), 0.9), 0.1); }

ad::Tensor gaussian_loglik_rows(const BoundParams& p, const ad::Tensor& mean, const ad::Tensor& sigma,
                                const Matrix& targets) {
  const ad::Tensor y = p.tape().constant(standardize_targets(p.store(), targets));
  const double log_y_std = std::log(p.store().get("norm.y")(0, 1));
  const ad::Tensor q = ad::div(ad::sub(y, mean), sigma);
  const ad::Tensor ll = ad::sub(ad::neg(ad::log(sigma)), ad::scale(ad::mul(q, q), 0.5));
  return ad::add_scalar(ll, -kHalfLog2Pi - log_y_std);
}

ad::Tensor categorical_loglik_rows(const ad::Tensor& log_probs, const Matrix& onehot) {
  return ad::row_sum(ad::mul(log_probs.tape()->constant(onehot), log_probs));
}

void destandardize(const ParameterStore& store, const ad::Tensor& mean, const ad::Tensor& sigma,
                   std::vector<double>& out_mean, std::vector<double>& out_sigma) {
  const Matrix& ny = store.get("norm.y");
  const Matrix& m = mean.value();
  const Matrix& s = sigma.value();
  out_mean.resize(m.rows());
  out_sigma.resize(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out_mean[r] = m(r, 0) * ny(0, 1) + ny(0, 0);
    out_sigma[r] = s(r, 0) * ny(0, 1);
  }
}

}  // namespace fnproc::detail
