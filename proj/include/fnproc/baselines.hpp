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

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fnproc/datasets.hpp"
#include "fnproc/inference.hpp"
#include "fnproc/params.hpp"
#include "fnproc/training.hpp"

namespace fnproc {

/// Shared by the NP and the plain/MC-dropout networks. Regression variants
/// standardize inputs and targets with non-trainable buffers, like FnpModel.
struct BaselineConfig {
  data::TaskKind task = data::TaskKind::kRegression;
  std::size_t num_classes = 0;
  std::size_t input_dim = 1;
  std::vector<std::size_t> torso_hidden{100};
  std::size_t latent_dim = 50;    // NP global latent
  std::size_t context_dim = 256;  // NP aggregate r
  double dropout = 0.5;           // MLP hidden-unit dropout rate

  void validate() const;
  std::size_t target_dim() const;
};

// ---------------------------------------------------------------- NP

class NpModel {
 public:
  NpModel(BaselineConfig cfg, std::uint64_t seed);

  const BaselineConfig& config() const { return cfg_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  void fit_standardization(const data::LabeledDataset& ds, std::span<const std::size_t> rows);

  ad::Tensor torso(const BoundParams& p, const Matrix& x) const;
  /// Diagonal Gaussian over the global latent from a context set.
  dist::DiagGaussianParams latent(const BoundParams& p, const Matrix& x, const Matrix& targets) const;
  /// Likelihood parameters for each target row given one latent sample.
  HeadOutput predict(const BoundParams& p, const ad::Tensor& h_targets, const ad::Tensor& theta) const;
  ad::Tensor log_likelihood_rows(const BoundParams& p, const HeadOutput& head, const Matrix& targets) const;
  void destandardize(const HeadOutput& head, std::vector<double>& mean, std::vector<double>& sigma) const;

 private:
  Matrix encode_targets(const Matrix& targets) const;

  BaselineConfig cfg_;
  ParameterStore params_;
};

/// One stochastic forward pass: latent from the context, one sample (noise
/// 1 x latent_dim), predictions at the targets. Throws on an empty context.
HeadOutput np_forward(const NpModel& np, const BoundParams& p, const Matrix& context_x, const Matrix& context_y,
                      const Matrix& target_x, const Matrix& noise);

/// Reconstruction of the targets minus KL(q(theta | context + targets) || q(theta | context)).
/// `context` indexes into `targets`.
ad::Tensor np_objective(const NpModel& np, const BoundParams& p, const data::LabeledDataset& ds,
                        std::span<const std::size_t> targets, std::span<const std::size_t> context,
                        const Matrix& noise);

struct NpTrainConfig {
  TrainConfig base;
  /// Upper end of the random context size (num(R)).
  std::size_t max_context = 100;
};

/// Minibatches of the training split; per step a context of uniform size in
/// [3, min(max_context, batch)] is drawn from the batch. Validation (if any)
/// uses `eval_context` as the context.
TrainResult np_train(NpModel& np, const data::LabeledDataset& ds, std::span<const std::size_t> eval_context,
                     const NpTrainConfig& cfg);

PredictiveSummary np_predict(const NpModel& np, const Matrix& context_x, const Matrix& context_y, const Matrix& queries,
                             std::size_t samples, std::uint64_t seed);

// ---------------------------------------------------------------- NN / MC dropout

class MlpNet {
 public:
  MlpNet(BaselineConfig cfg, std::uint64_t seed);

  const BaselineConfig& config() const { return cfg_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  void fit_standardization(const data::LabeledDataset& ds, std::span<const std::size_t> rows);

  /// masks[k] multiplies hidden layer k (already scaled by 1 / keep);
  /// empty means the deterministic pass.
  HeadOutput forward(const BoundParams& p, const Matrix& x, std::span<const Matrix> masks) const;
  ad::Tensor log_likelihood_rows(const BoundParams& p, const HeadOutput& head, const Matrix& targets) const;
  void destandardize(const HeadOutput& head, std::vector<double>& mean, std::vector<double>& sigma) const;

  /// Inverted-dropout masks for `rows` inputs keyed by (seed, round).
  std::vector<Matrix> dropout_masks(std::size_t rows, std::uint64_t seed, std::uint64_t round) const;

 private:
  BaselineConfig cfg_;
  ParameterStore params_;
};

/// Maximum likelihood with dropout active during training (rate from the config).
TrainResult mlp_train(MlpNet& net, const data::LabeledDataset& ds, const TrainConfig& cfg);

/// S masked passes aggregated like the FNP predictive.
PredictiveSummary mc_dropout_predict(const MlpNet& net, const Matrix& x, std::size_t samples, std::uint64_t seed);
/// The deterministic network as a one-sample summary.
PredictiveSummary nn_predict(const MlpNet& net, const Matrix& x);

// ---------------------------------------------------------------- GP

struct GpModel {
  double log_lengthscale = 0.0;
  double log_noise_var = std::log(0.1);
};

struct GpPosterior {
  std::vector<double> mean;
  std::vector<double> var;  // latent function variance (no noise)
};

class CholeskyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Log marginal likelihood; fills d/d(log lengthscale), d/d(log noise var)
/// when `grad` is given.
double gp_log_marginal(std::span<const double> x, std::span<const double> y, const GpModel& gp, double* grad = nullptr);

/// Exact posterior under k(x, x') = exp(-(x - x')^2 / (2 l^2)) plus noise.
GpPosterior gp_regress(std::span<const double> x, std::span<const double> y, std::span<const double> queries,
                       const GpModel& gp);

struct GpFitConfig {
  std::vector<double> start_log_lengthscales{-3.0, -2.0, -1.0, 0.0, 1.0};
  std::vector<double> start_log_noise_vars{-6.0, -3.0};
  std::size_t iterations = 600;
  double step = 0.05;
  double min_log_noise_var = -30.0;
};

/// Multi-start gradient ascent on the log marginal likelihood.
GpModel gp_fit(std::span<const double> x, std::span<const double> y, const GpFitConfig& cfg = {});

}  // namespace fnproc
