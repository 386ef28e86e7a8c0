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

#include "fnproc/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "fnproc/rng.hpp"

namespace fnproc {

ReferenceData ReferenceData::from_split(const data::ReferenceSplit& split) {
  ReferenceData ref;
  ref.inputs = split.base->inputs_at(split.reference);
  ref.targets = split.base->targets_at(split.reference);
  ref.ids.assign(split.reference.begin(), split.reference.end());
  return ref;
}

namespace {

// Everything a draw needs that does not depend on the noise.
struct FrozenEmbeddings {
  Matrix u_ref_mean, u_ref_logvar;
  Matrix u_q_mean, u_q_logvar;
  Matrix ref_mean, ref_logvar;
};

FrozenEmbeddings freeze(const FnpModel& model, const ReferenceData& ref, const Matrix& queries) {
  ad::Tape tape(ad::Tape::Mode::kInference);
  const BoundParams p(tape, model.params());
  const Embedding er = model.embed(p, tape.constant(ref.inputs));
  const Embedding eq = model.embed(p, tape.constant(queries));
  const dist::DiagGaussianParams theta = model.reference_params(p, er, ref.targets);
  return {er.u.mean.value(),   er.u.logvar.value(), eq.u.mean.value(),
          eq.u.logvar.value(), theta.mean.value(),  theta.logvar.value()};
}

}  // namespace

PredictiveSummary posterior_predictive(const FnpModel& model, const ReferenceData& ref, const Matrix& queries,
                                       std::size_t samples, std::uint64_t seed, bool keep_draws) {
  if (ref.size() == 0) throw std::invalid_argument("posterior_predictive: reference set is empty");
  if (samples < 1) throw std::invalid_argument("posterior_predictive: need at least one sample");
  const ModelConfig& cfg = model.config();
  const std::size_t n = queries.rows();
  const FrozenEmbeddings fe = freeze(model, ref, queries);

  std::vector<std::uint64_t> qids(n);
  for (std::size_t i = 0; i < n; ++i) qids[i] = kQueryIdBase + i;

  PredictiveAccumulator acc(cfg.task, n, cfg.num_classes, keep_draws);
  const dist::ConcreteConfig concrete(cfg.temperature);
  for (std::size_t s = 0; s < samples; ++s) {
    const NoiseBundle noise(seed, s);
    ad::Tape tape(ad::Tape::Mode::kInference);
    const BoundParams p(tape, model.params());
    const auto u_ref_p = dist::DiagGaussianParams::make(tape.constant(fe.u_ref_mean), tape.constant(fe.u_ref_logvar));
    const auto u_q_p = dist::DiagGaussianParams::make(tape.constant(fe.u_q_mean), tape.constant(fe.u_q_logvar));
    const auto theta = dist::DiagGaussianParams::make(tape.constant(fe.ref_mean), tape.constant(fe.ref_logvar));

    const ad::Tensor u_ref = dist::gaussian_rsample(u_ref_p, noise.stacked_normals(NoiseRole::kU, ref.ids, cfg.d_u));
    const ad::Tensor u_q = dist::gaussian_rsample(u_q_p, noise.stacked_normals(NoiseRole::kU, qids, cfg.d_u));
    const ad::Tensor a = sample_bipartite_A(u_q, u_ref, model.log_tau(p), GraphMode::kHard,
                                            pair_noise(noise, NoiseRole::kARow, qids, ref.ids), concrete);
    const auto prior = prior_z_params(a, theta, cfg.epsilon);
    const ad::Tensor z = dist::gaussian_rsample(prior, noise.stacked_normals(NoiseRole::kZ, qids, cfg.d_z));
    std::optional<ad::Tensor> u;
    if (cfg.variant == Variant::kFnpPlus) u = u_q;
    const HeadOutput head = model.predict_head(p, z, u);

    if (cfg.task == data::TaskKind::kClassification) {
      acc.add_probs(head.log_probs.value());
    } else {
      std::vector<double> mean, sigma;
      model.destandardize(head, mean, sigma);
      acc.add_gaussian(mean, sigma);
    }
  }
  return acc.finish();
}

PredictiveAccumulator::PredictiveAccumulator(data::TaskKind task, std::size_t points, std::size_t classes,
                                             bool keep_draws)
    : points_(points), keep_(keep_draws) {
  out_.task = task;
  if (task == data::TaskKind::kClassification) {
    out_.probs = Matrix(points, classes);
  } else {
    sum_mean_.assign(points, 0.0);
    sum_second_.assign(points, 0.0);
  }
}

void PredictiveAccumulator::add_probs(Matrix log_probs) {
  if (log_probs.shape() != out_.probs.shape()) {
    throw ShapeError("predictive draw " + log_probs.shape().str() + " vs " + out_.probs.shape().str());
  }
  for (std::size_t i = 0; i < log_probs.size(); ++i) {
    log_probs[i] = std::exp(log_probs[i]);
    out_.probs[i] += log_probs[i];
  }
  if (keep_) out_.draws.push_back(std::move(log_probs));
  ++out_.samples;
}

void PredictiveAccumulator::add_gaussian(std::span<const double> mean, std::span<const double> sigma) {
  if (mean.size() != points_ || sigma.size() != points_) throw ShapeError("predictive draw has the wrong length");
  for (std::size_t i = 0; i < points_; ++i) {
    sum_mean_[i] += mean[i];
    sum_second_[i] += sigma[i] * sigma[i] + mean[i] * mean[i];
  }
  if (keep_) {
    Matrix d(points_, 2);
    for (std::size_t i = 0; i < points_; ++i) {
      d(i, 0) = mean[i];
      d(i, 1) = sigma[i];
    }
    out_.draws.push_back(std::move(d));
  }
  ++out_.samples;
}

PredictiveSummary PredictiveAccumulator::finish() {
  if (out_.samples == 0) throw std::logic_error("predictive summary without draws");
  const double inv = 1.0 / static_cast<double>(out_.samples);
  if (out_.task == data::TaskKind::kClassification) {
    for (std::size_t i = 0; i < out_.probs.size(); ++i) out_.probs[i] *= inv;
    out_.entropy.resize(points_);
    for (std::size_t i = 0; i < points_; ++i) out_.entropy[i] = predictive_entropy(out_.probs.row_span(i));
  } else {
    out_.mean.resize(points_);
    out_.stddev.resize(points_);
    for (std::size_t i = 0; i < points_; ++i) {
      out_.mean[i] = sum_mean_[i] * inv;
      out_.stddev[i] = std::sqrt(std::max(0.0, sum_second_[i] * inv - out_.mean[i] * out_.mean[i]));
    }
  }
  return std::move(out_);
}

double predictive_entropy(std::span<const double> probs) {
  if (probs.empty()) throw std::invalid_argument("predictive_entropy: empty distribution");
  double total = 0.0;
  double h = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw std::invalid_argument("predictive_entropy: negative or NaN probability");
    total += p;
    if (p > 0.0) h -= p * std::log(p);
  }
  if (std::fabs(total - 1.0) > 1e-6) {
    throw std::invalid_argument("predictive_entropy: probabilities sum to " + std::to_string(total));
  }
  return h;
}

double aucr(std::span<const double> in_entropy, std::span<const double> out_entropy) {
  if (in_entropy.empty() || out_entropy.empty()) throw std::invalid_argument("aucr: empty input");
  // Rank-based Mann-Whitney count: sort the in-distribution values once and
  // count how many lie strictly below / equal to each out value.
  std::vector<double> in(in_entropy.begin(), in_entropy.end());
  std::sort(in.begin(), in.end());
  double wins = 0.0;
  for (double o : out_entropy) {
    const auto lo = std::lower_bound(in.begin(), in.end(), o);
    const auto hi = std::upper_bound(lo, in.end(), o);
    wins += static_cast<double>(lo - in.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(in.size()) * static_cast<double>(out_entropy.size()));
}

OodReport ood_report(std::span<const double> in_entropy, std::span<const double> out_entropy) {
  auto mean = [](std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  return {mean(in_entropy), mean(out_entropy), aucr(in_entropy, out_entropy)};
}

void mixture_moments(std::span<const double> means, std::span<const double> sigmas, double& mean, double& sd) {
  if (means.empty() || means.size() != sigmas.size()) {
    throw std::invalid_argument("mixture_moments: need matching, non-empty draws");
  }
  double m = 0.0, second = 0.0;
  for (std::size_t i = 0; i < means.size(); ++i) {
    m += means[i];
    second += sigmas[i] * sigmas[i] + means[i] * means[i];
  }
  const double inv = 1.0 / static_cast<double>(means.size());
  mean = m * inv;
  sd = std::sqrt(std::max(0.0, second * inv - mean * mean));
}

std::vector<BandRow> regression_bands(const FnpModel& model, const ReferenceData& ref, const Matrix& grid,
                                      std::size_t samples, std::uint64_t seed) {
  if (model.config().task != data::TaskKind::kRegression) {
    throw std::invalid_argument("regression_bands: model is not a regression model");
  }
  const PredictiveSummary s = posterior_predictive(model, ref, grid, samples, seed);
  std::vector<BandRow> rows(grid.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = {grid(i, 0), s.mean[i], s.stddev[i]};
  return rows;
}

Matrix uniform_grid(double lo, double hi, std::size_t n) {
  if (n < 2) throw std::invalid_argument("uniform_grid: need at least two points");
  Matrix g(n, 1);
  for (std::size_t i = 0; i < n; ++i) g(i, 0) = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  g(n - 1, 0) = hi;
  return g;
}

void write_bands_csv(const std::filesystem::path& path, std::span<const BandRow> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "x,mean,lo,hi\n";
  for (const BandRow& r : rows) out << r.x << ',' << r.mean << ',' << r.lo() << ',' << r.hi() << '\n';
}

std::vector<int> predicted_classes(const Matrix& probs) {
  std::vector<int> out(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const auto row = probs.row_span(i);
    out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

double prediction_metric(const PredictiveSummary& summary, const data::LabeledDataset& ds,
                         std::span<const std::size_t> rows) {
  if (rows.empty()) throw std::invalid_argument("prediction_metric: no rows");
  if (summary.task == data::TaskKind::kClassification) {
    const std::vector<int> pred = predicted_classes(summary.probs);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) hits += pred.at(i) == ds.labels[rows[i]] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(rows.size());
  }
  double se = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double e = summary.mean.at(i) - ds.values[rows[i]];
    se += e * e;
  }
  return std::sqrt(se / static_cast<double>(rows.size()));
}

void write_class_summary_csv(const std::filesystem::path& path, const PredictiveSummary& summary) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "point_id,entropy,max_prob,pred_class\n";
  const std::vector<int> pred = predicted_classes(summary.probs);
  for (std::size_t i = 0; i < summary.probs.rows(); ++i) {
    out << i << ',' << summary.entropy[i] << ',' << summary.probs(i, static_cast<std::size_t>(pred[i])) << ','
        << pred[i] << '\n';
  }
}

}  // namespace fnproc
