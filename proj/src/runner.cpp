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

#include "fnproc/runner.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "fnproc/baselines.hpp"

namespace fnproc {

using nlohmann::json;

namespace {

constexpr const char* kCheckpointFile = "model.ckpt.json";

bool is_fnp(ModelKind m) { return m == ModelKind::kFnp || m == ModelKind::kFnpPlus; }

std::size_t num_classes(const PreparedData& d) { return d.dataset().num_classes; }

ReferenceData reference_from(const data::LabeledDataset& ds, const std::vector<std::size_t>& rows) {
  ReferenceData ref;
  ref.inputs = ds.inputs_at(rows);
  ref.targets = ds.targets_at(rows);
  ref.ids.assign(rows.begin(), rows.end());
  return ref;
}

std::vector<double> column(const Matrix& m, std::size_t c = 0) {
  std::vector<double> v(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) v[r] = m(r, c);
  return v;
}

struct GpState {
  GpModel gp;
  double y_mean = 0.0;
  double y_std = 1.0;
};

GpState gp_state(const ParameterStore& p) {
  return {{p.get("gp.log_lengthscale")(0, 0), p.get("gp.log_noise_var")(0, 0)},
          p.get("norm.y")(0, 0),
          p.get("norm.y")(0, 1)};
}

// Training inputs and standardized targets seen by the GP.
void gp_training_data(const data::LabeledDataset& ds, const GpState& s, std::vector<double>& x,
                      std::vector<double>& y) {
  const std::vector<std::size_t> rows = ds.indices(data::Split::kTrain);
  x.clear();
  y.clear();
  for (std::size_t r : rows) {
    x.push_back(ds.inputs(r, 0));
    y.push_back((ds.values[r] - s.y_mean) / s.y_std);
  }
}

Checkpoint fit_gp(const RunConfig& cfg, const PreparedData& d, std::vector<MetricsRow>& metrics) {
  const data::LabeledDataset& ds = d.dataset();
  const std::vector<std::size_t> rows = ds.indices(data::Split::kTrain);
  double mean = 0.0, ss = 0.0;
  for (std::size_t r : rows) mean += ds.values[r];
  mean /= static_cast<double>(rows.size());
  for (std::size_t r : rows) ss += (ds.values[r] - mean) * (ds.values[r] - mean);
  GpState s;
  s.y_mean = mean;
  s.y_std = std::sqrt(ss / static_cast<double>(rows.size()));
  if (!(s.y_std > 0.0)) s.y_std = 1.0;

  std::vector<double> x, y;
  gp_training_data(ds, s, x, y);
  s.gp = gp_fit(x, y);

  Checkpoint ck;
  ck.params.add("gp.log_lengthscale", Matrix(1, 1, s.gp.log_lengthscale));
  ck.params.add("gp.log_noise_var", Matrix(1, 1, s.gp.log_noise_var));
  ck.params.add("norm.y", Matrix::row({s.y_mean, s.y_std}), false);
  MetricsRow row;
  row.epoch = 0;
  row.bound_total = gp_log_marginal(x, y, s.gp);
  row.bound_r = row.bound_m = row.val_metric = std::numeric_limits<double>::quiet_NaN();
  metrics.push_back(row);
  (void)cfg;
  return ck;
}

PredictiveSummary gp_predict(const PreparedData& d, const ParameterStore& p, const Matrix& queries) {
  const GpState s = gp_state(p);
  std::vector<double> x, y;
  gp_training_data(d.dataset(), s, x, y);
  const GpPosterior post = gp_regress(x, y, column(queries), s.gp);
  const double noise = std::exp(s.gp.log_noise_var);
  PredictiveSummary out;
  out.task = data::TaskKind::kRegression;
  out.samples = 1;
  for (std::size_t i = 0; i < post.mean.size(); ++i) {
    out.mean.push_back(post.mean[i] * s.y_std + s.y_mean);
    out.stddev.push_back(std::sqrt(post.var[i] + noise) * s.y_std);
  }
  return out;
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json checkpoint_echo(const RunConfig& cfg) {
  json j = cfg.to_json();
  j.erase("output_dir");  // where the files go does not change what they hold
  return j;
}

}  // namespace

PreparedData prepare_data(const RunConfig& cfg) {
  PreparedData d;
  std::shared_ptr<data::LabeledDataset> ds;
  if (cfg.task == TaskName::kIdxClassification) {
    ds = std::make_shared<data::LabeledDataset>(data::load_manifest_dataset(cfg.data));
    d.test = ds;
    d.test_rows = ds->indices(data::Split::kTest);
  } else {
    const auto gen = cfg.task == TaskName::kToy1 ? data::gen_toy1 : data::gen_toy2;
    ds = std::make_shared<data::LabeledDataset>(gen(cfg.data.seed));
    auto test = std::make_shared<data::LabeledDataset>(gen(cfg.data.seed + 1));
    test->split.assign(test->size(), data::Split::kTest);
    d.test_rows = test->indices(data::Split::kTest);
    d.test = std::move(test);
  }
  d.split = data::select_reference_set(ds, cfg.reference_size, cfg.seed);
  if (cfg.val_fraction > 0.0 && ds->indices(data::Split::kVal).empty()) {
    d.split = data::hold_out_validation(d.split, cfg.val_fraction, cfg.seed);
  }
  return d;
}

TrainOutcome train_model(const RunConfig& cfg, const PreparedData& d) {
  const data::LabeledDataset& ds = d.dataset();
  const std::vector<std::size_t> train_rows = ds.indices(data::Split::kTrain);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;

  TrainOutcome out;
  TrainResult res;
  switch (cfg.model) {
    case ModelKind::kFnp:
    case ModelKind::kFnpPlus: {
      FnpModel model(cfg.model_config(ds.input_dim(), num_classes(d)), cfg.seed);
      model.fit_standardization(ds, train_rows);
      res = train(model, d.split, tc);
      out.checkpoint.reference = d.split.reference;
      break;
    }
    case ModelKind::kNp: {
      NpModel np(cfg.baseline_config(ds.input_dim(), num_classes(d)), cfg.seed);
      np.fit_standardization(ds, train_rows);
      res = np_train(np, ds, d.split.reference, {tc, cfg.max_context});
      out.checkpoint.reference = d.split.reference;
      break;
    }
    case ModelKind::kNn:
    case ModelKind::kMcDropout: {
      MlpNet net(cfg.baseline_config(ds.input_dim(), num_classes(d)), cfg.seed);
      net.fit_standardization(ds, train_rows);
      res = mlp_train(net, ds, tc);
      break;
    }
    case ModelKind::kGp:
      out.checkpoint = fit_gp(cfg, d, out.metrics);
      break;
  }
  if (cfg.model != ModelKind::kGp) {
    out.checkpoint.params = std::move(res.best);
    out.metrics = std::move(res.metrics);
  }
  out.checkpoint.seed = cfg.seed;
  out.checkpoint.model = model_kind_name(cfg.model);
  out.checkpoint.config = checkpoint_echo(cfg);
  return out;
}

PredictiveSummary predict(const RunConfig& cfg, const Checkpoint& ck, const PreparedData& d, const Matrix& queries,
                          std::size_t samples, std::uint64_t seed) {
  const data::LabeledDataset& ds = d.dataset();
  switch (cfg.model) {
    case ModelKind::kFnp:
    case ModelKind::kFnpPlus: {
      FnpModel model(cfg.model_config(ds.input_dim(), num_classes(d)), cfg.seed);
      restore_parameters(model.params(), ck.params);
      return posterior_predictive(model, reference_from(ds, ck.reference), queries, samples, seed);
    }
    case ModelKind::kNp: {
      NpModel np(cfg.baseline_config(ds.input_dim(), num_classes(d)), cfg.seed);
      restore_parameters(np.params(), ck.params);
      return np_predict(np, ds.inputs_at(ck.reference), ds.targets_at(ck.reference), queries, samples, seed);
    }
    case ModelKind::kNn:
    case ModelKind::kMcDropout: {
      MlpNet net(cfg.baseline_config(ds.input_dim(), num_classes(d)), cfg.seed);
      restore_parameters(net.params(), ck.params);
      return cfg.model == ModelKind::kNn ? nn_predict(net, queries) : mc_dropout_predict(net, queries, samples, seed);
    }
    case ModelKind::kGp: {
      ParameterStore p;
      p.add("gp.log_lengthscale", Matrix(1, 1));
      p.add("gp.log_noise_var", Matrix(1, 1));
      p.add("norm.y", Matrix(1, 2), false);
      restore_parameters(p, ck.params);
      return gp_predict(d, p, queries);
    }
  }
  throw std::logic_error("predict: unknown model kind");
}

std::vector<double> uncertainty_scores(const PredictiveSummary& s) {
  if (s.task == data::TaskKind::kClassification) return s.entropy;
  std::vector<double> h(s.stddev.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    h[i] = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e) + std::log(s.stddev[i]);
  }
  return h;
}

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::uint64_t eval_seed(const RunConfig& cfg) { return mix64(cfg.seed ^ 0x6576'616cULL); }

Matrix ood_inputs(const RunConfig& cfg, const PreparedData& d, const OodSpec& o, std::size_t index) {
  const std::size_t dim = d.dataset().input_dim();
  if (o.kind == "uniform" || o.kind == "gaussian") {
    return data::gen_ood_noise(o.kind == "uniform" ? data::NoiseKind::kUniform : data::NoiseKind::kGaussian, o.count,
                               dim, mix64(cfg.seed + 0x6f6f64ULL + index));
  }
  if (o.kind == "test") return d.test->inputs_at(d.test_rows);
  const data::LabeledDataset ext = data::load_idx(o.images, o.labels, cfg.data.num_classes);
  if (ext.input_dim() != dim) {
    throw ConfigError("eval.ood[" + std::to_string(index) + "]: input width " + std::to_string(ext.input_dim()) +
                      " differs from the training data (" + std::to_string(dim) + ")");
  }
  std::vector<std::size_t> rows(std::min(o.count, ext.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return ext.inputs_at(rows);
}

}  // namespace

json evaluate(const RunConfig& cfg, const Checkpoint& ck, const PreparedData& d) {
  const std::uint64_t seed = eval_seed(cfg);
  const PredictiveSummary test = predict(cfg, ck, d, d.test->inputs_at(d.test_rows), cfg.eval.samples, seed);
  const std::vector<double> h_in = uncertainty_scores(test);
  const double metric = prediction_metric(test, *d.test, d.test_rows);

  json report = {{"task", task_name(cfg.task)},
                 {"model", model_kind_name(cfg.model)},
                 {"seed", cfg.seed},
                 {"samples", test.samples}};
  json t = {{"points", d.test_rows.size()}, {"mean_entropy", mean_of(h_in)}};
  if (cfg.is_regression())
    t["rmse"] = metric;
  else
    t["error"] = 1.0 - metric;
  report["test"] = std::move(t);

  json ood = json::array();
  for (std::size_t i = 0; i < cfg.eval.ood.size(); ++i) {
    const OodSpec& o = cfg.eval.ood[i];
    const PredictiveSummary s = predict(cfg, ck, d, ood_inputs(cfg, d, o, i), cfg.eval.samples, seed);
    const std::vector<double> h_out = uncertainty_scores(s);
    const OodReport r = ood_report(h_in, h_out);
    ood.push_back({{"name", o.name},
                   {"kind", o.kind},
                   {"points", h_out.size()},
                   {"mean_entropy", r.mean_out_entropy},
                   {"aucr", r.aucr}});
  }
  report["ood"] = std::move(ood);
  return report;
}

std::vector<BandRow> bands(const RunConfig& cfg, const Checkpoint& ck, const PreparedData& d) {
  if (!cfg.is_regression()) throw ConfigError("task: bands need a regression task");
  const Matrix grid = uniform_grid(cfg.eval.grid_lo, cfg.eval.grid_hi, cfg.eval.grid_points);
  const PredictiveSummary s = predict(cfg, ck, d, grid, cfg.eval.samples, eval_seed(cfg));
  std::vector<BandRow> rows(grid.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = {grid(i, 0), s.mean[i], s.stddev[i]};
  return rows;
}

Checkpoint load_run_checkpoint(const RunConfig& cfg) {
  Checkpoint ck = load_checkpoint(cfg.output_dir / kCheckpointFile);
  if (ck.model != model_kind_name(cfg.model)) {
    throw ConfigError("model: checkpoint holds a '" + ck.model + "' model, config asks for '" +
                      model_kind_name(cfg.model) + "'");
  }
  if (is_fnp(cfg.model) && ck.reference.empty()) {
    throw CheckpointError(CheckpointError::Kind::kMissingParameter, "checkpoint: reference set is empty");
  }
  return ck;
}

void cmd_train(const RunConfig& cfg) {
  const PreparedData d = prepare_data(cfg);
  const TrainOutcome out = train_model(cfg, d);
  std::filesystem::create_directories(cfg.output_dir);
  save_checkpoint(cfg.output_dir / kCheckpointFile, out.checkpoint);
  write_metrics_csv(cfg.output_dir / "metrics.csv", out.metrics);
}

void cmd_eval(const RunConfig& cfg) {
  const Checkpoint ck = load_run_checkpoint(cfg);
  const json report = evaluate(cfg, ck, prepare_data(cfg));
  write_json(cfg.output_dir / "report.json", report);
}

void cmd_bands(const RunConfig& cfg) {
  if (!cfg.is_regression()) throw ConfigError("task: bands need a regression task");
  const Checkpoint ck = load_run_checkpoint(cfg);
  write_bands_csv(cfg.output_dir / "bands.csv", bands(cfg, ck, prepare_data(cfg)));
}

int run_command(std::string_view command, const CommandOptions& opts, std::ostream& log) {
  try {
    RunConfig cfg = load_run_config(opts.config);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.out) cfg.output_dir = *opts.out;
    if (command == "train") {
      cmd_train(cfg);
      log << "wrote " << (cfg.output_dir / kCheckpointFile).string() << " and metrics.csv\n";
    } else if (command == "eval") {
      cmd_eval(cfg);
      log << "wrote " << (cfg.output_dir / "report.json").string() << "\n";
    } else if (command == "bands") {
      cmd_bands(cfg);
      log << "wrote " << (cfg.output_dir / "bands.csv").string() << "\n";
    } else {
      log << "error: unknown command '" << command << "'\n";
      return kExitConfig;
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const data::IdxError& e) {
    log << "input error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CheckpointError& e) {
    log << "checkpoint error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    log << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const TrainingAborted& e) {
    log << "training aborted: " << e.what() << "\n";
    return kExitAbort;
  } catch (const std::exception& e) {
    log << "runtime error: " << e.what() << "\n";
    return kExitAbort;
  }
}

}  // namespace fnproc
