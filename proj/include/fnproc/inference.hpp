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
#include <vector>

#include "fnproc/datasets.hpp"
#include "fnproc/model.hpp"

namespace fnproc {

/// The reference set as the predictive sees it: inputs, raw targets and the
/// dataset identities that key its noise.
struct ReferenceData {
  Matrix inputs;
  Matrix targets;
  std::vector<std::uint64_t> ids;

  static ReferenceData from_split(const data::ReferenceSplit& split);
  std::size_t size() const { return inputs.rows(); }
};

/// Query points are keyed above every dataset identity.
inline constexpr std::uint64_t kQueryIdBase = std::uint64_t{1} << 40;

struct PredictiveSummary {
  data::TaskKind task = data::TaskKind::kClassification;
  std::size_t samples = 0;
  Matrix probs;                 // classification: averaged class probabilities
  std::vector<double> entropy;  // classification: entropy of `probs` rows
  std::vector<double> mean;     // regression: mixture mean (raw units)
  std::vector<double> stddev;   // regression: mixture std (raw units)
  /// Per-draw likelihood parameters when requested: class probabilities, or
  /// columns (mean, sigma) for regression.
  std::vector<Matrix> draws;
};

/// Sums per-draw likelihood parameters into a PredictiveSummary.
class PredictiveAccumulator {
 public:
  PredictiveAccumulator(data::TaskKind task, std::size_t points, std::size_t classes, bool keep_draws);

  /// One draw of per-point log-probabilities.
  void add_probs(Matrix log_probs);
  void add_gaussian(std::span<const double> mean, std::span<const double> sigma);
  PredictiveSummary finish();

 private:
  PredictiveSummary out_;
  std::size_t points_;
  bool keep_;
  std::vector<double> sum_mean_, sum_second_;
};

/// Monte-Carlo posterior predictive. Reads only the reference set and the
/// queries; each draw resamples u_R, u*, a hard parent vector a*, and z*.
PredictiveSummary posterior_predictive(const FnpModel& model, const ReferenceData& ref, const Matrix& queries,
                                       std::size_t samples, std::uint64_t seed, bool keep_draws = false);

/// -sum p ln p with 0 ln 0 = 0. Throws std::invalid_argument on a malformed simplex.
double predictive_entropy(std::span<const double> probs);

/// Fraction of (in, out) pairs with out > in, ties counted 1/2.
double aucr(std::span<const double> in_entropy, std::span<const double> out_entropy);

struct OodReport {
  double mean_in_entropy = 0.0;
  double mean_out_entropy = 0.0;
  double aucr = 0.0;
};

OodReport ood_report(std::span<const double> in_entropy, std::span<const double> out_entropy);

struct BandRow {
  double x = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
  double lo() const { return mean - 3.0 * stddev; }
  double hi() const { return mean + 3.0 * stddev; }
};

/// Mixture mean/std per grid point; `grid` is a column of 1-d inputs.
std::vector<BandRow> regression_bands(const FnpModel& model, const ReferenceData& ref, const Matrix& grid,
                                      std::size_t samples, std::uint64_t seed);

/// Mixture of per-draw Gaussians: mean of means, and
/// sqrt(mean(sigma^2 + mean^2) - mean^2).
void mixture_moments(std::span<const double> means, std::span<const double> sigmas, double& mean, double& sd);

/// n evenly spaced points on [lo, hi] as a column.
Matrix uniform_grid(double lo, double hi, std::size_t n);

void write_bands_csv(const std::filesystem::path& path, std::span<const BandRow> rows);
/// `point_id,entropy,max_prob,pred_class`.
void write_class_summary_csv(const std::filesystem::path& path, const PredictiveSummary& summary);

/// argmax of each row.
std::vector<int> predicted_classes(const Matrix& probs);

/// Accuracy (classification) or RMSE (regression) of a summary against the
/// given dataset rows, in the summary's row order.
double prediction_metric(const PredictiveSummary& summary, const data::LabeledDataset& ds,
                         std::span<const std::size_t> rows);

}  // namespace fnproc
