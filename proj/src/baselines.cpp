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

#include "fnproc/baselines.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "standardize.hpp"

namespace fnproc {
namespace {

bool is_regression(const BaselineConfig& c) { return c.task == data::TaskKind::kRegression; }

std::size_t add_torso(ParameterStore& store, const BaselineConfig& cfg, std::uint64_t seed) {
  std::size_t width = cfg.input_dim;
  for (std::size_t k = 0; k < cfg.torso_hidden.size(); ++k) {
    add_linear(store, "torso." + std::to_string(k), width, cfg.torso_hidden[k], seed);
    width = cfg.torso_hidden[k];
  }
  return width;
}

void add_output(ParameterStore& store, const BaselineConfig& cfg, std::size_t in, std::uint64_t seed) {
  if (is_regression(cfg)) {
    add_linear(store, "head.mean", in, 1, seed);
    add_linear(store, "head.scale", in, 1, seed);
    detail::add_standardization(store, cfg.input_dim);
  } else {
    add_linear(store, "head.out", in, cfg.num_classes, seed);
  }
}

HeadOutput output_head(const BoundParams& p, const BaselineConfig& cfg, const ad::Tensor& in) {
  HeadOutput out;
  if (is_regression(cfg)) {
    out.mean = linear(p, "head.mean", in);
    out.sigma = detail::heteroscedastic_sigma(linear(p, "head.scale", in));
  } else {
    out.log_probs = ad::log_softmax(linear(p, "head.out", in));
  }
  return out;
}

ad::Tensor loglik_rows(const BoundParams& p, const BaselineConfig& cfg, const HeadOutput& head, const Matrix& targets) {
  if (targets.cols() != cfg.target_dim()) {
    throw ShapeError("targets shape " + targets.shape().str() + " vs target width " + std::to_string(cfg.target_dim()));
  }
  if (is_regression(cfg)) return detail::gaussian_loglik_rows(p, head.mean, head.sigma, targets);
  return detail::categorical_loglik_rows(head.log_probs, targets);
}

void add_draw(PredictiveAccumulator& acc, const BaselineConfig& cfg, const ParameterStore& store,
              const HeadOutput& head) {
  if (is_regression(cfg)) {
    std::vector<double> mean, sigma;
    detail::destandardize(store, head.mean, head.sigma, mean, sigma);
    acc.add_gaussian(mean, sigma);
  } else {
    acc.add_probs(head.log_probs.value());
  }
}

std::vector<const Matrix*> trainable_grads(const ParameterStore& store, const BoundParams& p,
                                           const ad::Gradients& grads) {
  std::vector<const Matrix*> g(store.size(), nullptr);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (store.entries()[i].trainable) g[i] = grads.find(p.at(i));
  return g;
}

void require_finite(double v, const char* what, std::size_t epoch, std::size_t step) {
  if (!std::isfinite(v)) {
    throw TrainingAborted("non-finite " + std::string(what) + " = " + std::to_string(v) + " at epoch " +
                          std::to_string(epoch) + ", step " + std::to_string(step));
  }
}

std::vector<std::size_t> take(std::span<const std::size_t> order, std::size_t lo, std::size_t hi) {
  return {order.begin() + static_cast<std::ptrdiff_t>(lo), order.begin() + static_cast<std::ptrdiff_t>(hi)};
}

}  // namespace

void BaselineConfig::validate() const {
  if (input_dim < 1) throw std::invalid_argument("model.input_dim: must be >= 1");
  if (task == data::TaskKind::kClassification && num_classes < 2) {
    throw std::invalid_argument("model.num_classes: must be >= 2");
  }
  if (latent_dim < 1) throw std::invalid_argument("model.latent_dim: must be >= 1");
  if (context_dim < 1) throw std::invalid_argument("model.context_dim: must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("model.dropout: must lie in [0, 1)");
}

std::size_t BaselineConfig::target_dim() const { return is_regression(*this) ? 1 : num_classes; }

// ---------------------------------------------------------------- NP

NpModel::NpModel(BaselineConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const std::size_t width = add_torso(params_, cfg_, seed);
  add_linear(params_, "r_proj", width + cfg_.target_dim(), cfg_.context_dim, seed);
  add_linear(params_, "latent_mean", cfg_.context_dim, cfg_.latent_dim, seed);
  add_linear(params_, "latent_logvar", cfg_.context_dim, cfg_.latent_dim, seed);
  add_output(params_, cfg_, width + cfg_.latent_dim, seed);
}

void NpModel::fit_standardization(const data::LabeledDataset& ds, std::span<const std::size_t> rows) {
  if (is_regression(cfg_)) detail::fit_standardization(params_, ds, rows);
}

Matrix NpModel::encode_targets(const Matrix& targets) const {
  if (targets.cols() != cfg_.target_dim()) {
    throw ShapeError("targets shape " + targets.shape().str() + " vs target width " +
                     std::to_string(cfg_.target_dim()));
  }
  return is_regression(cfg_) ? detail::standardize_targets(params_, targets) : targets;
}

ad::Tensor NpModel::torso(const BoundParams& p, const Matrix& x) const {
  ad::Tensor h = p.tape().constant(x);
  if (is_regression(cfg_)) h = detail::standardize_inputs(p, h);
  for (std::size_t k = 0; k < cfg_.torso_hidden.size(); ++k) h = ad::relu(linear(p, "torso." + std::to_string(k), h));
  return h;
}

dist::DiagGaussianParams NpModel::latent(const BoundParams& p, const Matrix& x, const Matrix& targets) const {
  if (x.rows() == 0) throw std::invalid_argument("np: context is empty");
  const ad::Tensor y = p.tape().constant(encode_targets(targets));
  const ad::Tensor r = ad::column_mean(linear(p, "r_proj", ad::concat_cols(torso(p, x), y)));
  const ad::Tensor hr = ad::relu(r);
  return dist::DiagGaussianParams::make(linear(p, "latent_mean", hr), linear(p, "latent_logvar", hr));
}

HeadOutput NpModel::predict(const BoundParams& p, const ad::Tensor& h_targets, const ad::Tensor& theta) const {
  const ad::Tensor ones = p.tape().constant(Matrix(h_targets.rows(), 1, 1.0));
  const ad::Tensor in = ad::concat_cols(h_targets, ad::matmul(ones, ad::relu(theta)));
  return output_head(p, cfg_, in);
}

ad::Tensor NpModel::log_likelihood_rows(const BoundParams& p, const HeadOutput& head, const Matrix& targets) const {
  return loglik_rows(p, cfg_, head, targets);
}

void NpModel::destandardize(const HeadOutput& head, std::vector<double>& mean, std::vector<double>& sigma) const {
  detail::destandardize(params_, head.mean, head.sigma, mean, sigma);
}

HeadOutput np_forward(const NpModel& np, const BoundParams& p, const Matrix& context_x, const Matrix& context_y,
                      const Matrix& target_x, const Matrix& noise) {
  const dist::DiagGaussianParams q = np.latent(p, context_x, context_y);
  const ad::Tensor theta = dist::gaussian_rsample(q, noise);
  return np.predict(p, np.torso(p, target_x), theta);
}

ad::Tensor np_objective(const NpModel& np, const BoundParams& p, const data::LabeledDataset& ds,
                        std::span<const std::size_t> targets, std::span<const std::size_t> context,
                        const Matrix& noise) {
  const Matrix xt = ds.inputs_at(targets);
  const Matrix yt = ds.targets_at(targets);
  const dist::DiagGaussianParams q_all = np.latent(p, xt, yt);
  const dist::DiagGaussianParams q_ctx = np.latent(p, ds.inputs_at(context), ds.targets_at(context));
  const ad::Tensor theta = dist::gaussian_rsample(q_all, noise);
  const HeadOutput head = np.predict(p, np.torso(p, xt), theta);
  return ad::sub(ad::sum(np.log_likelihood_rows(p, head, yt)), dist::gaussian_kl(q_all, q_ctx));
}

PredictiveSummary np_predict(const NpModel& np, const Matrix& context_x, const Matrix& context_y, const Matrix& queries,
                             std::size_t samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("np_predict: need at least one sample");
  const BaselineConfig& cfg = np.config();
  PredictiveAccumulator acc(cfg.task, queries.rows(), cfg.num_classes, false);
  ad::Tape base(ad::Tape::Mode::kInference);
  const BoundParams bp(base, np.params());
  const dist::DiagGaussianParams q = np.latent(bp, context_x, context_y);
  const Matrix h = np.torso(bp, queries).value();
  for (std::size_t s = 0; s < samples; ++s) {
    ad::Tape tape(ad::Tape::Mode::kInference);
    const BoundParams p(tape, np.params());
    const auto qs = dist::DiagGaussianParams::make(tape.constant(q.mean.value()), tape.constant(q.logvar.value()));
    NoiseStream rng(seed, s, NoiseRole::kGlobalLatent, 0);
    const ad::Tensor theta = dist::gaussian_rsample(qs, rng.normals(1, cfg.latent_dim));
    add_draw(acc, cfg, np.params(), np.predict(p, tape.constant(h), theta));
  }
  return acc.finish();
}

TrainResult np_train(NpModel& np, const data::LabeledDataset& ds, std::span<const std::size_t> eval_context,
                     const NpTrainConfig& cfg) {
  cfg.base.validate();
  if (cfg.base.batch_size <= 3) throw std::invalid_argument("np_train: batch_size must be > 3");
  if (eval_context.empty()) throw std::invalid_argument("np_train: evaluation context is empty");
  const std::vector<std::size_t> train_rows = ds.indices(data::Split::kTrain);
  const std::vector<std::size_t> val = ds.indices(data::Split::kVal);
  const Matrix ctx_x = ds.inputs_at(eval_context);
  const Matrix ctx_y = ds.targets_at(eval_context);
  EarlyStopping stopper(!is_regression(np.config()), cfg.base.patience);

  TrainResult res;
  res.best = np.params();
  AdamState adam;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.base.epochs; ++epoch) {
    std::vector<std::size_t> order = train_rows;
    NoiseStream shuffle_rng(cfg.base.seed, epoch, NoiseRole::kShuffle, 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const std::size_t n_batches = (order.size() + cfg.base.batch_size - 1) / cfg.base.batch_size;

    MetricsRow row;
    row.epoch = epoch;
    row.bound_r = row.bound_m = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t lo = b * cfg.base.batch_size;
      const std::vector<std::size_t> batch = take(order, lo, std::min(order.size(), lo + cfg.base.batch_size));
      const std::size_t max_ctx = std::min(cfg.max_context, batch.size());
      NoiseStream ctx_rng(cfg.base.seed, step, NoiseRole::kContext, 0);
      std::size_t k = max_ctx;
      if (max_ctx > 3) k = std::uniform_int_distribution<std::size_t>(3, max_ctx)(ctx_rng);
      std::vector<std::size_t> shuffled = batch;
      std::shuffle(shuffled.begin(), shuffled.end(), ctx_rng);
      const std::vector<std::size_t> context = take(shuffled, 0, k);

      ad::Tape tape;
      const BoundParams p(tape, np.params());
      NoiseStream latent_rng(cfg.base.seed, step, NoiseRole::kGlobalLatent, 0);
      const ad::Tensor obj = np_objective(np, p, ds, batch, context, latent_rng.normals(1, np.config().latent_dim));
      require_finite(obj.item(), "NP objective", epoch, step);
      row.bound_total += obj.item();
      const ad::Gradients grads = tape.backward(ad::neg(obj));
      adam_step(np.params(), trainable_grads(np.params(), p, grads), adam, cfg.base.adam);
      ++step;
    }
    row.bound_total /= static_cast<double>(std::max<std::size_t>(1, n_batches));
    row.val_metric = std::numeric_limits<double>::quiet_NaN();
    if (!val.empty()) {
      const PredictiveSummary s = np_predict(np, ctx_x, ctx_y, ds.inputs_at(val), cfg.base.val_samples,
                                             mix64(cfg.base.seed ^ 0x6e70ULL) + epoch);
      row.val_metric = prediction_metric(s, ds, val);
      if (stopper.update(row.val_metric)) {
        res.best = np.params();
        res.best_epoch = epoch;
      }
    }
    res.metrics.push_back(row);
    if (stopper.should_stop()) break;
  }
  if (val.empty() && !res.metrics.empty()) {
    res.best = np.params();
    res.best_epoch = res.metrics.back().epoch;
  }
  res.steps = step;
  np.params() = res.best;
  return res;
}

// ---------------------------------------------------------------- NN / MC dropout

MlpNet::MlpNet(BaselineConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const std::size_t width = add_torso(params_, cfg_, seed);
  add_output(params_, cfg_, width, seed);
}

void MlpNet::fit_standardization(const data::LabeledDataset& ds, std::span<const std::size_t> rows) {
  if (is_regression(cfg_)) detail::fit_standardization(params_, ds, rows);
}

HeadOutput MlpNet::forward(const BoundParams& p, const Matrix& x, std::span<const Matrix> masks) const {
  if (!masks.empty() && masks.size() != cfg_.torso_hidden.size()) {
    throw std::invalid_argument("mlp: one dropout mask per hidden layer expected");
  }
  ad::Tape& tape = p.tape();
  ad::Tensor h = tape.constant(x);
  if (is_regression(cfg_)) h = detail::standardize_inputs(p, h);
  for (std::size_t k = 0; k < cfg_.torso_hidden.size(); ++k) {
    h = ad::relu(linear(p, "torso." + std::to_string(k), h));
    if (!masks.empty()) h = ad::mul(h, tape.constant(masks[k]));
  }
  return output_head(p, cfg_, h);
}

ad::Tensor MlpNet::log_likelihood_rows(const BoundParams& p, const HeadOutput& head, const Matrix& targets) const {
  return loglik_rows(p, cfg_, head, targets);
}

void MlpNet::destandardize(const HeadOutput& head, std::vector<double>& mean, std::vector<double>& sigma) const {
  detail::destandardize(params_, head.mean, head.sigma, mean, sigma);
}

std::vector<Matrix> MlpNet::dropout_masks(std::size_t rows, std::uint64_t seed, std::uint64_t round) const {
  const double keep = 1.0 - cfg_.dropout;
  std::vector<Matrix> masks;
  for (std::size_t k = 0; k < cfg_.torso_hidden.size(); ++k) {
    NoiseStream rng(seed, round, NoiseRole::kDropout, k);
    Matrix m = rng.uniforms(rows, cfg_.torso_hidden[k]);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = m[i] < keep ? 1.0 / keep : 0.0;
    masks.push_back(std::move(m));
  }
  return masks;
}

TrainResult mlp_train(MlpNet& net, const data::LabeledDataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  const std::vector<std::size_t> train_rows = ds.indices(data::Split::kTrain);
  const std::vector<std::size_t> val = ds.indices(data::Split::kVal);
  EarlyStopping stopper(!is_regression(net.config()), cfg.patience);

  TrainResult res;
  res.best = net.params();
  AdamState adam;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = train_rows;
    NoiseStream shuffle_rng(cfg.seed, epoch, NoiseRole::kShuffle, 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const std::size_t n_batches = (order.size() + cfg.batch_size - 1) / cfg.batch_size;

    MetricsRow row;
    row.epoch = epoch;
    row.bound_r = row.bound_m = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t lo = b * cfg.batch_size;
      const std::vector<std::size_t> batch = take(order, lo, std::min(order.size(), lo + cfg.batch_size));
      ad::Tape tape;
      const BoundParams p(tape, net.params());
      const std::vector<Matrix> masks = net.dropout_masks(batch.size(), cfg.seed, step);
      const HeadOutput head = net.forward(p, ds.inputs_at(batch), masks);
      const ad::Tensor ll = ad::sum(net.log_likelihood_rows(p, head, ds.targets_at(batch)));
      require_finite(ll.item(), "log-likelihood", epoch, step);
      row.bound_total += ll.item();
      const ad::Gradients grads = tape.backward(ad::neg(ll));
      adam_step(net.params(), trainable_grads(net.params(), p, grads), adam, cfg.adam);
      ++step;
    }
    row.bound_total /= static_cast<double>(std::max<std::size_t>(1, n_batches));
    row.val_metric = std::numeric_limits<double>::quiet_NaN();
    if (!val.empty()) {
      row.val_metric = prediction_metric(nn_predict(net, ds.inputs_at(val)), ds, val);
      if (stopper.update(row.val_metric)) {
        res.best = net.params();
        res.best_epoch = epoch;
      }
    }
    res.metrics.push_back(row);
    if (stopper.should_stop()) break;
  }
  if (val.empty() && !res.metrics.empty()) {
    res.best = net.params();
    res.best_epoch = res.metrics.back().epoch;
  }
  res.steps = step;
  net.params() = res.best;
  return res;
}

PredictiveSummary mc_dropout_predict(const MlpNet& net, const Matrix& x, std::size_t samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("mc_dropout_predict: need at least one sample");
  PredictiveAccumulator acc(net.config().task, x.rows(), net.config().num_classes, false);
  for (std::size_t s = 0; s < samples; ++s) {
    ad::Tape tape(ad::Tape::Mode::kInference);
    const BoundParams p(tape, net.params());
    const std::vector<Matrix> masks = net.dropout_masks(x.rows(), seed, s);
    add_draw(acc, net.config(), net.params(), net.forward(p, x, masks));
  }
  return acc.finish();
}

PredictiveSummary nn_predict(const MlpNet& net, const Matrix& x) {
  PredictiveAccumulator acc(net.config().task, x.rows(), net.config().num_classes, false);
  ad::Tape tape(ad::Tape::Mode::kInference);
  const BoundParams p(tape, net.params());
  add_draw(acc, net.config(), net.params(), net.forward(p, x, {}));
  return acc.finish();
}

// ---------------------------------------------------------------- GP

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

MatrixXd rbf(std::span<const double> a, std::span<const double> b, double lengthscale) {
  MatrixXd k(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  const double inv = 1.0 / (2.0 * lengthscale * lengthscale);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double d = a[i] - b[j];
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::exp(-d * d * inv);
    }
  return k;
}

// Cholesky of k, adding jitter 1e-8, 1e-7, ... up to 1e-2 on failure.
Eigen::LLT<MatrixXd> robust_cholesky(const MatrixXd& k) {
  const auto n = k.rows();
  double jitter = 0.0;
  while (true) {
    Eigen::LLT<MatrixXd> llt(k + jitter * MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) return llt;
    jitter = jitter == 0.0 ? 1e-8 : jitter * 10.0;
    if (jitter > 1e-2 * (1.0 + 1e-9)) {
      throw CholeskyError("GP covariance is not positive definite even with jitter 1e-2");
    }
  }
}

void check_gp_inputs(std::span<const double> x, std::span<const double> y) {
  if (x.empty()) throw std::invalid_argument("gp: need at least one training point");
  if (x.size() != y.size())
    throw ShapeError("gp: " + std::to_string(x.size()) + " inputs vs " + std::to_string(y.size()) + " targets");
}

}  // namespace

double gp_log_marginal(std::span<const double> x, std::span<const double> y, const GpModel& gp, double* grad) {
  check_gp_inputs(x, y);
  const double ell = std::exp(gp.log_lengthscale);
  const double noise = std::exp(gp.log_noise_var);
  const auto n = static_cast<Eigen::Index>(x.size());
  const MatrixXd kf = rbf(x, x, ell);
  const MatrixXd k = kf + noise * MatrixXd::Identity(n, n);
  const Eigen::LLT<MatrixXd> llt = robust_cholesky(k);
  const VectorXd yv = Eigen::Map<const VectorXd>(y.data(), n);
  const VectorXd alpha = llt.solve(yv);
  const MatrixXd l = llt.matrixL();
  const double lml = -0.5 * yv.dot(alpha) - l.diagonal().array().log().sum() - 0.5 * static_cast<double>(n) * kLog2Pi;
  if (grad != nullptr) {
    const MatrixXd w = alpha * alpha.transpose() - llt.solve(MatrixXd::Identity(n, n));
    MatrixXd dk_dell(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        const double d = x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)];
        dk_dell(i, j) = kf(i, j) * d * d / (ell * ell);
      }
    grad[0] = 0.5 * (w.array() * dk_dell.array()).sum();
    grad[1] = 0.5 * noise * w.trace();
  }
  return lml;
}

GpPosterior gp_regress(std::span<const double> x, std::span<const double> y, std::span<const double> queries,
                       const GpModel& gp) {
  check_gp_inputs(x, y);
  const double ell = std::exp(gp.log_lengthscale);
  const auto n = static_cast<Eigen::Index>(x.size());
  const MatrixXd k = rbf(x, x, ell) + std::exp(gp.log_noise_var) * MatrixXd::Identity(n, n);
  const Eigen::LLT<MatrixXd> llt = robust_cholesky(k);
  const VectorXd alpha = llt.solve(Eigen::Map<const VectorXd>(y.data(), n));
  const MatrixXd ks = rbf(queries, x, ell);                // m x n
  const MatrixXd v = llt.matrixL().solve(ks.transpose());  // n x m

  GpPosterior post;
  post.mean.resize(queries.size());
  post.var.resize(queries.size());
  const VectorXd mean = ks * alpha;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    post.mean[i] = mean(static_cast<Eigen::Index>(i));
    post.var[i] = std::max(0.0, 1.0 - v.col(static_cast<Eigen::Index>(i)).squaredNorm());
  }
  return post;
}

GpModel gp_fit(std::span<const double> x, std::span<const double> y, const GpFitConfig& cfg) {
  check_gp_inputs(x, y);
  GpModel best;
  double best_lml = -std::numeric_limits<double>::infinity();
  for (double l0 : cfg.start_log_lengthscales) {
    for (double n0 : cfg.start_log_noise_vars) {
      // Adam ascent on (log l, log noise var).
      double theta[2] = {l0, std::max(n0, cfg.min_log_noise_var)};
      double m[2] = {0.0, 0.0}, v[2] = {0.0, 0.0};
      bool ok = true;
      for (std::size_t it = 1; it <= cfg.iterations && ok; ++it) {
        double g[2];
        try {
          gp_log_marginal(x, y, {theta[0], theta[1]}, g);
        } catch (const CholeskyError&) {
          ok = false;
          break;
        }
        for (int k = 0; k < 2; ++k) {
          m[k] = 0.9 * m[k] + 0.1 * g[k];
          v[k] = 0.999 * v[k] + 0.001 * g[k] * g[k];
          const double mh = m[k] / (1.0 - std::pow(0.9, static_cast<double>(it)));
          const double vh = v[k] / (1.0 - std::pow(0.999, static_cast<double>(it)));
          theta[k] += cfg.step * mh / (std::sqrt(vh) + 1e-8);
        }
        theta[1] = std::max(theta[1], cfg.min_log_noise_var);
      }
      if (!ok) continue;
      double lml = 0.0;
      try {
        lml = gp_log_marginal(x, y, {theta[0], theta[1]});
      } catch (const CholeskyError&) {
        continue;
      }
      if (lml > best_lml) {
        best_lml = lml;
        best = {theta[0], theta[1]};
      }
    }
  }
  if (!std::isfinite(best_lml)) throw CholeskyError("gp_fit: every start failed");
  return best;
}

}  // namespace fnproc
