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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fnproc/datasets.hpp"
#include "fnproc/distributions.hpp"
#include "fnproc/params.hpp"
#include "fnproc/rng.hpp"
#include "fnproc/tensor.hpp"

namespace fnproc {

enum class Variant { kFnp, kFnpPlus };
enum class GraphMode { kRelaxed, kHard };

const char* variant_name(Variant v);

struct ModelConfig {
  data::TaskKind task = data::TaskKind::kRegression;
  std::size_t num_classes = 0;
  std::size_t input_dim = 1;
  std::vector<std::size_t> torso_hidden{100};
  std::size_t head_hidden = 100;  // regression head only
  std::size_t d_u = 3;
  std::size_t d_z = 50;
  Variant variant = Variant::kFnp;
  double epsilon = 1e-8;
  double temperature = 0.3;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  /// Width of the likelihood-head input: d_z, or d_z + d_u for FNP+.
  std::size_t head_input_dim() const;
  /// Width of a target row: num_classes (one-hot) or 1.
  std::size_t target_dim() const;
};

struct Embedding {
  dist::DiagGaussianParams u;
  dist::DiagGaussianParams z;
};

/// Classification fills log_probs; regression fills mean and sigma, both in
/// standardized target units.
struct HeadOutput {
  ad::Tensor log_probs;
  ad::Tensor mean;
  ad::Tensor sigma;
};

/// Parameters and forward maps of an FNP / FNP+ model. Regression models
/// carry input and target standardization statistics as non-trainable
/// buffers; every public map takes raw inputs and raw targets.
class FnpModel {
 public:
  FnpModel(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  /// Sets the regression buffers from the given rows of a dataset.
  void fit_standardization(const data::LabeledDataset& ds, std::span<const std::size_t> rows);

  Embedding embed(const BoundParams& p, const ad::Tensor& x) const;
  ad::Tensor log_tau(const BoundParams& p) const { return p["log_tau"]; }

  /// Label-conditioned prior contributions mu_theta, nu_theta of the given
  /// reference points: z-head outputs plus the label embedding.
  dist::DiagGaussianParams reference_params(const BoundParams& p, const Embedding& ref, const Matrix& targets) const;

  /// `u` must be given iff the variant is FNP+; std::invalid_argument otherwise.
  HeadOutput predict_head(const BoundParams& p, const ad::Tensor& z, const std::optional<ad::Tensor>& u) const;

  /// Per-row log p(y | head) for raw targets (one-hot rows or a column).
  ad::Tensor log_likelihood_rows(const BoundParams& p, const HeadOutput& head, const Matrix& targets) const;

  /// Regression only: raw-unit mean and std of a head output.
  void destandardize(const HeadOutput& head, std::vector<double>& mean, std::vector<double>& sigma) const;

 private:
  Matrix encode_targets(const Matrix& targets) const;

  ModelConfig cfg_;
  ParameterStore params_;
};

/// g(a, b) = exp(-tau/2 |a - b|^2) with tau = exp(log_tau).
double kernel_g(std::span<const double> a, std::span<const double> b, double log_tau);

/// t(u) = sum_k log Phi(u_k).
double scalar_ordering_t(std::span<const double> u);

/// Matrix of g(u_i, v_j).
ad::Tensor edge_probs(const ad::Tensor& u, const ad::Tensor& v, const ad::Tensor& log_tau);
/// log g - log(1 - g), computed without forming g.
ad::Tensor edge_logits(const ad::Tensor& u, const ad::Tensor& v, const ad::Tensor& log_tau);

/// mask(i, j) = 1 iff t(u_i) > t(u_j). Ties and the diagonal give 0.
Matrix dag_mask(const Matrix& u_ref);

/// |M| x |R| parent matrix. Relaxed mode draws binary concrete samples of
/// Bern(g); hard mode thresholds the uniforms (1 iff u < g).
ad::Tensor sample_bipartite_A(const ad::Tensor& u_m, const ad::Tensor& u_r, const ad::Tensor& log_tau, GraphMode mode,
                              const Matrix& noise, const dist::ConcreteConfig& cfg);

/// |R| x |R| parent matrix over R: Bern(mask * g), mask kept hard in both modes.
ad::Tensor sample_dag_G(const ad::Tensor& u_r, const ad::Tensor& log_tau, GraphMode mode, const Matrix& noise,
                        const dist::ConcreteConfig& cfg);

/// Edge probabilities mask * g of the DAG (no sampling).
Matrix dag_edge_probs(const Matrix& u_r, double log_tau);

/// Parent-averaged prior: C_i sum_j parents_ij (mu_j, nu_j), C_i = 1 / (sum_j parents_ij + eps).
dist::DiagGaussianParams prior_z_params(const ad::Tensor& parents, const dist::DiagGaussianParams& ref, double epsilon);

/// sum over R of log N(z_i; prior from G row i) + log p(y_i | head).
ad::Tensor log_joint_R(const FnpModel& model, const BoundParams& p, const ad::Tensor& u_r, const ad::Tensor& z_r,
                       const Matrix& targets_r, const ad::Tensor& G, const dist::DiagGaussianParams& ref);

/// Uniforms for every (row id, column id) pair of a graph.
Matrix pair_noise(const NoiseBundle& noise, NoiseRole role, std::span<const std::uint64_t> row_ids,
                  std::span<const std::uint64_t> col_ids);

/// Kahn's algorithm over nonzero entries (edge i <- j when G(i, j) != 0).
bool is_acyclic(const Matrix& G);

}  // namespace fnproc
