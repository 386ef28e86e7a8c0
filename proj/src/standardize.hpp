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

// Regression standardization buffers and the heteroscedastic Gaussian head,
// shared by the FNP and the baselines.

#include <span>
#include <vector>

#include "fnproc/datasets.hpp"
#include "fnproc/params.hpp"

namespace fnproc::detail {

/// Adds norm.x_mean, norm.x_std (1 x input_dim) and norm.y (mean, std).
void add_standardization(ParameterStore& store, std::size_t input_dim);
void fit_standardization(ParameterStore& store, const data::LabeledDataset& ds, std::span<const std::size_t> rows);

/// (x - mean) / std as a tape op on x.
ad::Tensor standardize_inputs(const BoundParams& p, const ad::Tensor& x);
/// (y - mean) / std for a column of raw targets.
Matrix standardize_targets(const ParameterStore& store, const Matrix& targets);

/// sigma = 0.1 + 0.9 softplus(d).
ad::Tensor heteroscedastic_sigma(const ad::Tensor& d);

/// log N(y; mean, sigma^2) per row for raw targets, including the Jacobian
/// of the target standardization.
ad::Tensor gaussian_loglik_rows(const BoundParams& p, const ad::Tensor& mean, const ad::Tensor& sigma,
                                const Matrix& targets);

/// log p(y) per row for one-hot targets under log-probabilities.
ad::Tensor categorical_loglik_rows(const ad::Tensor& log_probs, const Matrix& onehot);

void destandardize(const ParameterStore& store, const ad::Tensor& mean, const ad::Tensor& sigma,
                   std::vector<double>& out_mean, std::vector<double>& out_sigma);

}  // namespace fnproc::detail
