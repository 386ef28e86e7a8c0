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

#include "fnproc/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "fnproc/inference.hpp"

namespace fnproc {

BoundEstimate BoundTerms::estimate() const {
  BoundEstimate e;
  e.l_r = ll_r.item() - kl_r.item();
  if (n_m > 0) e.l_m_given_r = scale * (ll_m.item() - kl_m.item());
  e.total = e.l_r + e.l_m_given_r;
  return e;
}

BoundTerms build_bound(const FnpModel& model, const BoundParams& p, const data::LabeledDataset& ds,
                       std::span<const std::size_t> reference, std::span<const std::size_t> batch, std::size_t m_total,
                       const NoiseBundle& noise, GraphMode mode) {
  if (reference.empty()) throw std::invalid_argument("bound: reference set is empty");
  if (batch.size() > m_total) throw std::invalid_argument("bound: batch larger than |M|");
  const ModelConfig& cfg = model.config();
  const dist::ConcreteConfig concrete(cfg.temperature);
  ad::Tape& tape = p.tape();

  std::vector<std::size_t> r(reference.begin(), reference.end());
  std::vector<std::size_t> m(batch.begin(), batch.end());
  std::sort(r.begin(), r.end());
  std::sort(m.begin(), m.end());
  const std::vector<std::uint64_t> rid(r.begin(), r.end());
  const std::vector<std::uint64_t> mid(m.begin(), m.end());
  const bool plus = cfg.variant == Variant::kFnpPlus;
  const ad::Tensor log_tau = model.log_tau(p);

  BoundTerms t;
  t.n_r = r.size();
  t.n_m = m.size();

  const Matrix targets_r = ds.targets_at(r);
  const Embedding er = model.embed(p, tape.constant(ds.inputs_at(r)));
  const ad::Tensor u_r = dist::gaussian_rsample(er.u, noise.stacked_normals(NoiseRole::kU, rid, cfg.d_u));
  const ad::Tensor z_r = dist::gaussian_rsample(er.z, noise.stacked_normals(NoiseRole::kZ, rid, cfg.d_z));
  const dist::DiagGaussianParams theta = model.reference_params(p, er, targets_r);

  const ad::Tensor G = sample_dag_G(u_r, log_tau, mode, pair_noise(noise, NoiseRole::kGRow, rid, rid), concrete);
  t.kl_r = dist::gaussian_kl(er.z, prior_z_params(G, theta, cfg.epsilon));
  const HeadOutput head_r = model.predict_head(p, z_r, plus ? std::optional(u_r) : std::nullopt);
  t.ll_r = ad::sum(model.log_likelihood_rows(p, head_r, targets_r));

  if (!m.empty()) {
    t.scale = static_cast<double>(m_total) / static_cast<double>(m.size());
    const Embedding em = model.embed(p, tape.constant(ds.inputs_at(m)));
    const ad::Tensor u_m = dist::gaussian_rsample(em.u, noise.stacked_normals(NoiseRole::kU, mid, cfg.d_u));
    const ad::Tensor z_m = dist::gaussian_rsample(em.z, noise.stacked_normals(NoiseRole::kZ, mid, cfg.d_z));
    const ad::Tensor A =
        sample_bipartite_A(u_m, u_r, log_tau, mode, pair_noise(noise, NoiseRole::kARow, mid, rid), concrete);
    t.kl_m = dist::gaussian_kl(em.z, prior_z_params(A, theta, cfg.epsilon));
    const HeadOutput head_m = model.predict_head(p, z_m, plus ? std::optional(u_m) : std::nullopt);
    t.ll_m = ad::sum(model.log_likelihood_rows(p, head_m, ds.targets_at(m)));
  }
  return t;
}

BoundEstimate elbo_batch(const FnpModel& model, const data::LabeledDataset& ds, std::span<const std::size_t> reference,
                         std::span<const std::size_t> batch, std::size_t m_total, const NoiseBundle& noise,
                         GraphMode mode) {
  ad::Tape tape(ad::Tape::Mode::kInference);
  const BoundParams p(tape, model.params());
  return build_bound(model, p, ds, reference, batch, m_total, noise, mode).estimate();
}

ad::Tensor soft_free_bits(const ad::Tensor& kl, std::size_t units, double lambda) {
  if (units < 1) throw std::invalid_argument("soft_free_bits: need at least one unit");
  if (lambda < 0.0) throw std::invalid_argument("soft_free_bits: lambda must be >= 0");
  if (lambda == 0.0) return kl;
  return ad::clamp(kl, lambda * static_cast<double>(units), std::numeric_limits<double>::infinity());
}

void adam_step(ParameterStore& params, std::span<const Matrix* const> grads, AdamState& state, const AdamConfig& cfg) {
  auto& entries = params.entries();
  if (grads.size() != entries.size()) {
    throw ShapeError("adam_step: " + std::to_string(grads.size()) + " gradients for " + std::to_string(entries.size()) +
                     " parameters");
  }
  if (state.m.empty()) {
    for (const auto& e : entries) {
      state.m.emplace_back(e.value.rows(), e.value.cols());
      state.v.emplace_back(e.value.rows(), e.value.cols());
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!entries[i].trainable || grads[i] == nullptr) continue;
    Matrix& w = entries[i].value;
    const Matrix& g = *grads[i];
    if (g.shape() != w.shape() || state.m[i].shape() != w.shape()) {
      throw ShapeError("adam_step: gradient " + g.shape().str() + " for parameter " + entries[i].name + " " +
                       w.shape().str());
    }
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      const double mh = m[k] / c1;
      const double vh = v[k] / c2;
      w[k] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.eps);
    }
  }
}

bool EarlyStopping::update(double metric) {
  const bool better = !seen_ || (higher_ ? metric > best_ : metric < best_);
  if (better) {
    seen_ = true;
    best_ = metric;
    since_best_ = 0;
  } else {
    ++since_best_;
  }
  return better;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("train.batch_size: must be >= 1");
  if (!(free_bits >= 0.0)) throw std::invalid_argument("train.free_bits: must be >= 0");
  if (!(adam.learning_rate > 0.0)) throw std::invalid_argument("train.learning_rate: must be > 0");
  if (val_samples < 1) throw std::invalid_argument("train.val_samples: must be >= 1");
}

namespace {

void require_finite(const ad::Tensor& t, const char* name, std::size_t epoch, std::size_t step) {
  if (!t.valid()) return;
  const double v = t.item();
  if (!std::isfinite(v)) {
    throw TrainingAborted("non-finite bound term " + std::string(name) + " = " + std::to_string(v) + " at epoch " +
                          std::to_string(epoch) + ", step " + std::to_string(step));
  }
}

// Accuracy (classification) or RMSE (regression) on the validation rows.
double validation_metric(const FnpModel& model, const data::ReferenceSplit& split, std::span<const std::size_t> val,
                         const TrainConfig& cfg, std::size_t epoch) {
  const data::LabeledDataset& ds = *split.base;
  const PredictiveSummary s = posterior_predictive(model, ReferenceData::from_split(split), ds.inputs_at(val),
                                                   cfg.val_samples, mix64(cfg.seed ^ 0x7661'6cULL) + epoch);
  return prediction_metric(s, ds, val);
}

}  // namespace

TrainResult train(FnpModel& model, const data::ReferenceSplit& split, const TrainConfig& cfg) {
  cfg.validate();
  split.validate();
  const data::LabeledDataset& ds = *split.base;
  const std::vector<std::size_t> val = ds.indices(data::Split::kVal);
  EarlyStopping stopper(model.config().task == data::TaskKind::kClassification, cfg.patience);
  const std::size_t d_z = model.config().d_z;

  TrainResult res;
  res.best = model.params();
  AdamState adam;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = split.other;
    NoiseStream shuffle_rng(cfg.seed, epoch, NoiseRole::kShuffle, 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const std::size_t n_batches = std::max<std::size_t>(1, (order.size() + cfg.batch_size - 1) / cfg.batch_size);

    MetricsRow row;
    row.epoch = epoch;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t lo = std::min(order.size(), b * cfg.batch_size);
      const std::size_t hi = std::min(order.size(), lo + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + lo, hi - lo);

      ad::Tape tape;
      const BoundParams p(tape, model.params());
      const BoundTerms t = build_bound(model, p, ds, split.reference, batch, order.size(), NoiseBundle(cfg.seed, step),
                                       GraphMode::kRelaxed);
      require_finite(t.ll_r, "log-likelihood(R)", epoch, step);
      require_finite(t.kl_r, "KL(R)", epoch, step);
      require_finite(t.ll_m, "log-likelihood(M)", epoch, step);
      require_finite(t.kl_m, "KL(M)", epoch, step);

      const BoundEstimate e = t.estimate();
      row.bound_r += e.l_r;
      row.bound_m += e.l_m_given_r;
      row.bound_total += e.total;

      ad::Tensor objective = ad::sub(t.ll_r, soft_free_bits(t.kl_r, t.n_r * d_z, cfg.free_bits));
      if (t.n_m > 0) {
        const ad::Tensor lm = ad::sub(t.ll_m, soft_free_bits(t.kl_m, t.n_m * d_z, cfg.free_bits));
        objective = ad::add(objective, ad::scale(lm, t.scale));
      }
      const ad::Gradients grads = tape.backward(ad::neg(objective));
      std::vector<const Matrix*> g(model.params().size(), nullptr);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (model.params().entries()[i].trainable) g[i] = grads.find(p.at(i));
      adam_step(model.params(), g, adam, cfg.adam);
      ++step;
    }
    const double nb = static_cast<double>(n_batches);
    row.bound_r /= nb;
    row.bound_m /= nb;
    row.bound_total /= nb;

    row.val_metric = std::numeric_limits<double>::quiet_NaN();
    if (!val.empty()) {
      row.val_metric = validation_metric(model, split, val, cfg, epoch);
      if (stopper.update(row.val_metric)) {
        res.best = model.params();
        res.best_epoch = epoch;
      }
    }
    res.metrics.push_back(row);
    if (stopper.should_stop()) break;
  }

  if (val.empty() && !res.metrics.empty()) {
    res.best = model.params();
    res.best_epoch = res.metrics.back().epoch;
  }
  res.steps = step;
  model.params() = res.best;
  return res;
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRow> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "epoch,bound_total,bound_R,bound_M,val_metric\n";
  for (const MetricsRow& r : rows) {
    out << r.epoch;
    for (double v : {r.bound_total, r.bound_r, r.bound_m, r.val_metric}) {
      out << ',';
      if (std::isnan(v))
        out << "nan";
      else
        out << v;
    }
    out << '\n';
  }
}

}  // namespace fnproc
