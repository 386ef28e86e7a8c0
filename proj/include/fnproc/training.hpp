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

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fnproc/datasets.hpp"
#include "fnproc/model.hpp"

namespace fnproc {

/// Bound of one minibatch. l_m_given_r is already rescaled by |M| / |M-hat|.
struct BoundEstimate {
  double l_r = 0.0;
  double l_m_given_r = 0.0;
  double total = 0.0;
};

/// The pieces of the bound as tensors on one tape. `scale` is |M| / |M-hat|.
struct BoundTerms {
  ad::Tensor ll_r;
  ad::Tensor kl_r;
  ad::Tensor ll_m;  // invalid when M-hat is empty
  ad::Tensor kl_m;
  double scale = 0.0;
  std::size_t n_r = 0;
  std::size_t n_m = 0;

  BoundEstimate estimate() const;
};

/// Builds the bound for reference rows R and batch rows M-hat of `ds`. Both
/// index lists are put in ascending identity order first, and every noise
/// draw is keyed by identity, so the result does not depend on storage order.
BoundTerms build_bound(const FnpModel& model, const BoundParams& p, const data::LabeledDataset& ds,
                       std::span<const std::size_t> reference, std::span<const std::size_t> batch, std::size_t m_total,
                       const NoiseBundle& noise, GraphMode mode);

/// Value of the bound (no free bits) on a throwaway inference tape.
BoundEstimate elbo_batch(const FnpModel& model, const data::LabeledDataset& ds, std::span<const std::size_t> reference,
                         std::span<const std::size_t> batch, std::size_t m_total, const NoiseBundle& noise,
                         GraphMode mode = GraphMode::kRelaxed);

/// max(kl, lambda * units); the gradient to kl vanishes while clamped.
ad::Tensor soft_free_bits(const ad::Tensor& kl, std::size_t units, double lambda);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::size_t step = 0;
};

/// One bias-corrected Adam descent step on the trainable entries of `params`.
/// grads[i] is the loss gradient of entry i or nullptr; shapes must match.
void adam_step(ParameterStore& params, std::span<const Matrix* const> grads, AdamState& state, const AdamConfig& cfg);

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 100;
  AdamConfig adam;
  double free_bits = 1.0;
  /// 0 disables early stopping.
  std::size_t patience = 20;
  /// Predictive samples used for the per-epoch validation metric.
  std::size_t val_samples = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

struct MetricsRow {
  std::size_t epoch = 0;
  double bound_total = 0.0;
  double bound_r = 0.0;
  double bound_m = 0.0;
  double val_metric = 0.0;  // accuracy or RMSE; NaN without a validation split
};

struct TrainResult {
  ParameterStore best;
  std::vector<MetricsRow> metrics;
  std::size_t best_epoch = 0;
  std::size_t steps = 0;
};

/// Tracks the best validation metric and the epochs since it improved.
class EarlyStopping {
 public:
  EarlyStopping(bool higher_is_better, std::size_t patience) : higher_(higher_is_better), patience_(patience) {}

  /// Returns true when `metric` is a new best.
  bool update(double metric);
  /// Only ever true with patience > 0.
  bool should_stop() const { return patience_ > 0 && since_best_ >= patience_; }
  double best() const { return best_; }

 private:
  bool higher_;
  std::size_t patience_;
  bool seen_ = false;
  double best_ = 0.0;
  std::size_t since_best_ = 0;
};

/// Thrown when a bound term stops being finite.
class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adam on the free-bits bound over minibatches of M with the full R attached
/// to each. Validation points come from the split tags of the base dataset;
/// with none, the final parameters are returned. The model's parameters are
/// left at the returned checkpoint.
TrainResult train(FnpModel& model, const data::ReferenceSplit& split, const TrainConfig& cfg);

/// `epoch,bound_total,bound_R,bound_M,val_metric`.
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRow> rows);

}  // namespace fnproc
