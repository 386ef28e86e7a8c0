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

#include "fnproc/model.hpp"

#include "standardize.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fnproc {
namespace {

ad::Tensor mlp_relu(const BoundParams& p, const std::string& prefix, std::size_t layers, ad::Tensor h) {
  for (std::size_t k = 0; k < layers; ++k) h = ad::relu(linear(p, prefix + "." + std::to_string(k), h));
  return h;
}

// Column vector c (n x 1) spread across `cols` columns.
ad::Tensor spread_column(const ad::Tensor& c, std::size_t cols) {
  return ad::matmul(c, c.tape()->constant(Matrix(1, cols, 1.0)));
}

}  // namespace

const char* variant_name(Variant v) { return v == Variant::kFnp ? "fnp" : "fnp-plus"; }

void ModelConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("model." + field + ": " + why);
  };
  if (d_u < 1) fail("d_u", "must be >= 1");
  if (d_z < 1) fail("d_z", "must be >= 1");
  if (input_dim < 1) fail("input_dim", "must be >= 1");
  if (!(epsilon > 0.0)) fail("epsilon", "must be > 0");
  if (!(temperature > 0.0)) fail("temperature", "must be > 0");
  if (task == data::TaskKind::kClassification && num_classes < 2) fail("num_classes", "must be >= 2");
  if (task == data::TaskKind::kRegression && head_hidden < 1) fail("head_hidden", "must be >= 1");
  for (std::size_t w : torso_hidden)
    if (w < 1) fail("torso_hidden", "layer widths must be >= 1");
}

std::size_t ModelConfig::head_input_dim() const { return variant == Variant::kFnpPlus ? d_z + d_u : d_z; }

std::size_t ModelConfig::target_dim() const { return task == data::TaskKind::kClassification ? num_classes : 1; }

FnpModel::FnpModel(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::size_t width = cfg_.input_dim;
  for (std::size_t k = 0; k < cfg_.torso_hidden.size(); ++k) {
    add_linear(params_, "torso." + std::to_string(k), width, cfg_.torso_hidden[k], seed);
    width = cfg_.torso_hidden[k];
  }
  add_linear(params_, "u_mean", width, cfg_.d_u, seed);
  add_linear(params_, "u_logvar", width, cfg_.d_u, seed);
  add_linear(params_, "z_mean", width, cfg_.d_z, seed);
  add_linear(params_, "z_logvar", width, cfg_.d_z, seed);
  // Label embeddings start at zero so the initial prior of a point is the
  // plain average of its parents' posteriors.
  for (const char* name : {"label_mean", "label_logvar"}) {
    params_.add(std::string(name) + ".weight", Matrix(cfg_.target_dim(), cfg_.d_z, 0.0));
    params_.add(std::string(name) + ".bias", Matrix(1, cfg_.d_z, 0.0));
  }
  params_.add("log_tau", Matrix::scalar(-0.5 * std::log(static_cast<double>(cfg_.d_u))));

  if (cfg_.task == data::TaskKind::kClassification) {
    add_linear(params_, "head.out", cfg_.head_input_dim(), cfg_.num_classes, seed);
  } else {
    add_linear(params_, "head.hidden", cfg_.head_input_dim(), cfg_.head_hidden, seed);
    add_linear(params_, "head.mean", cfg_.head_hidden, 1, seed);
    add_linear(params_, "head.scale", cfg_.head_hidden, 1, seed);
    detail::add_standardization(params_, cfg_.input_dim);
  }
}

void FnpModel::fit_standardization(const data::LabeledDataset& ds, std::span<const std::size_t> rows) {
  if (cfg_.task == data::TaskKind::kRegression) detail::fit_standardization(params_, ds, rows);
}

Embedding FnpModel::embed(const BoundParams& p, const ad::Tensor& x) const {
  if (x.rows() == 0) throw std::invalid_argument("embed: empty batch");
  if (x.cols() != cfg_.input_dim) {
    throw ShapeError("embed: input shape " + x.shape().str() + " vs input_dim " + std::to_string(cfg_.input_dim));
  }
  ad::Tensor h = cfg_.task == data::TaskKind::kRegression ? detail::standardize_inputs(p, x) : x;
  h = mlp_relu(p, "torso", cfg_.torso_hidden.size(), h);
  return {dist::DiagGaussianParams::make(linear(p, "u_mean", h), linear(p, "u_logvar", h)),
          dist::DiagGaussianParams::make(linear(p, "z_mean", h), linear(p, "z_logvar", h))};
}

Matrix FnpModel::encode_targets(const Matrix& targets) const {
  if (targets.cols() != cfg_.target_dim()) {
    throw ShapeError("targets shape " + targets.shape().str() + " vs target width " +
                     std::to_string(cfg_.target_dim()));
  }
  if (cfg_.task == data::TaskKind::kClassification) return targets;
  return detail::standardize_targets(params_, targets);
}

dist::DiagGaussianParams FnpModel::reference_params(const BoundParams& p, const Embedding& ref,
                                                    const Matrix& targets) const {
  if (targets.rows() != ref.z.points()) {
    throw ShapeError("reference_params: " + std::to_string(targets.rows()) + " targets for " +
                     std::to_string(ref.z.points()) + " points");
  }
  const ad::Tensor y = p.tape().constant(encode_targets(targets));
  return dist::DiagGaussianParams::make(ad::add(ref.z.mean, linear(p, "label_mean", y)),
                                        ad::add(ref.z.logvar, linear(p, "label_logvar", y)));
}

HeadOutput FnpModel::predict_head(const BoundParams& p, const ad::Tensor& z, const std::optional<ad::Tensor>& u) const {
  const bool plus = cfg_.variant == Variant::kFnpPlus;
  if (plus != u.has_value()) {
    throw std::invalid_argument(plus ? "predict_head: FNP+ needs u" : "predict_head: plain FNP takes no u");
  }
  const ad::Tensor in = ad::relu(plus ? ad::concat_cols(z, *u) : z);
  HeadOutput out;
  if (cfg_.task == data::TaskKind::kClassification) {
    out.log_probs = ad::log_softmax(linear(p, "head.out", in));
    return out;
  }
  const ad::Tensor h = ad::relu(linear(p, "head.hidden", in));
  out.mean = linear(p, "head.mean", h);
  out.sigma = detail::heteroscedastic_sigma(linear(p, "head.scale", h));
  return out;
}

ad::Tensor FnpModel::log_likelihood_rows(const BoundParams& p, const HeadOutput& head, const Matrix& targets) const {
  if (targets.cols() != cfg_.target_dim()) {
    throw ShapeError("targets shape " + targets.shape().str() + " vs target width " +
                     std::to_string(cfg_.target_dim()));
  }
  if (cfg_.task == data::TaskKind::kClassification) return detail::categorical_loglik_rows(head.log_probs, targets);
  return detail::gaussian_loglik_rows(p, head.mean, head.sigma, targets);
}

void FnpModel::destandardize(const HeadOutput& head, std::vector<double>& mean, std::vector<double>& sigma) const {
  if (cfg_.task != data::TaskKind::kRegression) throw std::logic_error("destandardize: not a regression model");
  detail::destandardize(params_, head.mean, head.sigma, mean, sigma);
}

double kernel_g(std::span<const double> a, std::span<const double> b, double log_tau) {
  if (a.size() != b.size()) throw ShapeError("kernel_g: embedding dims differ");
  double d2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    d2 += diff * diff;
  }
  return std::exp(-((d2 * std::exp(log_tau)) * 0.5));
}

double scalar_ordering_t(std::span<const double> u) {
  double t = 0.0;
  for (double v : u) t += dist::std_normal_log_cdf(v);
  return t;
}

namespace {

// a = tau/2 |u_i - v_j|^2
ad::Tensor half_scaled_sqdist(const ad::Tensor& u, const ad::Tensor& v, const ad::Tensor& log_tau) {
  return ad::scale(ad::mul_scalar(ad::pairwise_sqdist(u, v), ad::exp(log_tau)), 0.5);
}

Matrix threshold(const Matrix& probs, const Matrix& noise) {
  Matrix out(probs.rows(), probs.cols());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = dist::bernoulli_sample(probs[i], noise[i]);
  return out;
}

void check_noise(const Matrix& noise, std::size_t rows, std::size_t cols, const char* what) {
  if (noise.rows() != rows || noise.cols() != cols) {
    throw ShapeError(std::string(what) + ": noise shape " + noise.shape().str() + " vs graph " +
                     Shape{rows, cols}.str());
  }
}

}  // namespace

ad::Tensor edge_probs(const ad::Tensor& u, const ad::Tensor& v, const ad::Tensor& log_tau) {
  return ad::exp(ad::neg(half_scaled_sqdist(u, v, log_tau)));
}

ad::Tensor edge_logits(const ad::Tensor& u, const ad::Tensor& v, const ad::Tensor& log_tau) {
  const ad::Tensor a = half_scaled_sqdist(u, v, log_tau);
  return ad::neg(ad::add(a, ad::log1mexp(a)));
}

Matrix dag_mask(const Matrix& u_ref) {
  const std::size_t n = u_ref.rows();
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = scalar_ordering_t(u_ref.row_span(i));
  Matrix mask(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) mask(i, j) = t[i] > t[j] ? 1.0 : 0.0;
  return mask;
}

ad::Tensor sample_bipartite_A(const ad::Tensor& u_m, const ad::Tensor& u_r, const ad::Tensor& log_tau, GraphMode mode,
                              const Matrix& noise, const dist::ConcreteConfig& cfg) {
  if (u_r.rows() == 0) throw std::invalid_argument("sample_bipartite_A: R is empty");
  check_noise(noise, u_m.rows(), u_r.rows(), "sample_bipartite_A");
  if (mode == GraphMode::kRelaxed) {
    return dist::binary_concrete_rsample(edge_logits(u_m, u_r, log_tau), cfg, noise);
  }
  const Matrix g = edge_probs(u_m, u_r, log_tau).value();
  return u_m.tape()->constant(threshold(g, noise));
}

ad::Tensor sample_dag_G(const ad::Tensor& u_r, const ad::Tensor& log_tau, GraphMode mode, const Matrix& noise,
                        const dist::ConcreteConfig& cfg) {
  if (u_r.rows() == 0) throw std::invalid_argument("sample_dag_G: R is empty");
  check_noise(noise, u_r.rows(), u_r.rows(), "sample_dag_G");
  ad::Tape& tape = *u_r.tape();
  Matrix mask = dag_mask(u_r.value());
  if (mode == GraphMode::kRelaxed) {
    const ad::Tensor soft = dist::binary_concrete_rsample(edge_logits(u_r, u_r, log_tau), cfg, noise);
    return ad::mul(soft, tape.constant(std::move(mask)));
  }
  const Matrix g = edge_probs(u_r, u_r, log_tau).value();
  Matrix hard = threshold(g, noise);
  for (std::size_t i = 0; i < hard.size(); ++i) hard[i] *= mask[i];
  return tape.constant(std::move(hard));
}

Matrix dag_edge_probs(const Matrix& u_r, double log_tau) {
  Matrix p = dag_mask(u_r);
  for (std::size_t i = 0; i < p.rows(); ++i)
    for (std::size_t j = 0; j < p.cols(); ++j)
      if (p(i, j) != 0.0) p(i, j) = kernel_g(u_r.row_span(i), u_r.row_span(j), log_tau);
  return p;
}

dist::DiagGaussianParams prior_z_params(const ad::Tensor& parents, const dist::DiagGaussianParams& ref,
                                        double epsilon) {
  if (parents.cols() != ref.points()) {
    throw ShapeError("prior_z_params: parent matrix " + parents.shape().str() + " vs " + std::to_string(ref.points()) +
                     " reference points");
  }
  ad::Tape& tape = *parents.tape();
  const ad::Tensor count = ad::add_scalar(ad::row_sum(parents), epsilon);
  const ad::Tensor c = ad::div(tape.constant(Matrix(parents.rows(), 1, 1.0)), count);
  const ad::Tensor cs = spread_column(c, ref.dims());
  return dist::DiagGaussianParams::make(ad::mul(ad::matmul(parents, ref.mean), cs),
                                        ad::mul(ad::matmul(parents, ref.logvar), cs));
}

ad::Tensor log_joint_R(const FnpModel& model, const BoundParams& p, const ad::Tensor& u_r, const ad::Tensor& z_r,
                       const Matrix& targets_r, const ad::Tensor& G, const dist::DiagGaussianParams& ref) {
  const auto prior = prior_z_params(G, ref, model.config().epsilon);
  std::optional<ad::Tensor> u;
  if (model.config().variant == Variant::kFnpPlus) u = u_r;
  const HeadOutput head = model.predict_head(p, z_r, u);
  return ad::add(dist::gaussian_log_prob(z_r, prior), ad::sum(model.log_likelihood_rows(p, head, targets_r)));
}

Matrix pair_noise(const NoiseBundle& noise, NoiseRole role, std::span<const std::uint64_t> row_ids,
                  std::span<const std::uint64_t> col_ids) {
  Matrix out(row_ids.size(), col_ids.size());
  for (std::size_t i = 0; i < row_ids.size(); ++i)
    for (std::size_t j = 0; j < col_ids.size(); ++j) out(i, j) = noise.pair_uniform(role, row_ids[i], col_ids[j]);
  return out;
}

bool is_acyclic(const Matrix& G) {
  if (G.rows() != G.cols()) throw ShapeError("is_acyclic: matrix " + G.shape().str() + " is not square");
  const std::size_t n = G.rows();
  // Edge j -> i for every parent j of i.
  std::vector<std::size_t> indegree(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (G(i, j) != 0.0) ++indegree[i];
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push_back(i);
  std::size_t seen = 0;
  while (!ready.empty()) {
    const std::size_t j = ready.back();
    ready.pop_back();
    ++seen;
    for (std::size_t i = 0; i < n; ++i)
      if (G(i, j) != 0.0 && --indegree[i] == 0) ready.push_back(i);
  }
  return seen == n;
}

}  // namespace fnproc
