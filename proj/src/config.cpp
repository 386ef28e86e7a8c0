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

#include "fnproc/config.hpp"

#include <fstream>
#include <limits>
#include <set>
#include <numbers>

namespace fnproc {

using nlohmann::json;

namespace {

template <typename E>
struct Named {
  const char* name;
  E value;
};

constexpr Named<TaskName> kTasks[] = {
    {"toy1", TaskName::kToy1}, {"toy2", TaskName::kToy2}, {"idx-classification", TaskName::kIdxClassification}};
constexpr Named<ModelKind> kModels[] = {
    {"fnp", ModelKind::kFnp}, {"fnp-plus", ModelKind::kFnpPlus},     {"np", ModelKind::kNp},
    {"nn", ModelKind::kNn},   {"mc-dropout", ModelKind::kMcDropout}, {"gp", ModelKind::kGp}};

template <typename E, std::size_t N>
E lookup(const Named<E> (&table)[N], const std::string& s, const std::string& path) {
  std::string options;
  for (const auto& t : table) {
    if (s == t.name) return t.value;
    options += std::string(options.empty() ? "" : ", ") + t.name;
  }
  throw ConfigError(path + ": unknown value '" + s + "' (expected one of " + options + ")");
}

// Reads fields of one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  void read(const char* key, std::size_t& out, std::size_t min = 0) {
    if (const json* v = take(key)) {
      if (!v->is_number_unsigned() || v->get<std::uint64_t>() < min) {
        throw ConfigError(where(key) + ": expected an integer >= " + std::to_string(min));
      }
      out = v->get<std::size_t>();
    }
  }
  void read(const char* key, double& out, double lo, double hi, bool open_lo = false) {
    if (const json* v = take(key)) {
      if (!v->is_number()) throw ConfigError(where(key) + ": expected a number");
      const double x = v->get<double>();
      if (!(x >= lo && x <= hi) || (open_lo && x == lo)) {
        throw ConfigError(where(key) + ": value " + v->dump() + " out of range");
      }
      out = x;
    }
  }
  void read(const char* key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) throw ConfigError(where(key) + ": expected a string");
      out = v->get<std::string>();
    }
  }
  void read(const char* key, std::vector<std::size_t>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) throw ConfigError(where(key) + ": expected an array of positive integers");
      out.clear();
      for (const json& e : *v) {
        if (!e.is_number_unsigned() || e.get<std::uint64_t>() == 0) {
          throw ConfigError(where(key) + ": expected an array of positive integers");
        }
        out.push_back(e.get<std::size_t>());
      }
    }
  }
  void read_path(const char* key, std::filesystem::path& out, const std::filesystem::path& base) {
    std::string s;
    read(key, s);
    if (s.empty()) return;
    out = std::filesystem::path(s).is_absolute() ? std::filesystem::path(s) : base / s;
  }
  const json* sub(const char* key) { return take(key); }

  std::string where(const char* key = nullptr) const {
    if (key == nullptr) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!used_.count(k)) throw ConfigError(where(k.c_str()) + ": unknown field");
    }
  }

 private:
  const json* take(const char* key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

void require_file(const std::filesystem::path& p, const std::string& field) {
  if (p.empty()) throw ConfigError(field + ": required for this task");
  if (!std::filesystem::is_regular_file(p)) throw ConfigError(field + ": file not found: " + p.string());
}

void apply_defaults(RunConfig& c) {
  ArchitectureSpec& a = c.arch;
  TrainConfig& t = c.train;
  switch (c.task) {
    case TaskName::kToy1:
    case TaskName::kToy2:
      a.torso_hidden = {100};
      a.d_u = 3;
      a.d_z = c.task == TaskName::kToy1 ? 50 : 10;
      a.latent_dim = a.d_z;
      c.reference_size = 10;
      c.max_context = 19;
      t.epochs = c.task == TaskName::kToy1 ? 6000 : 1000;
      t.batch_size = 10;
      t.patience = 0;
      t.free_bits = c.model == ModelKind::kFnpPlus ? 4.0 : 1.0;
      c.eval.grid_lo = c.task == TaskName::kToy1 ? -0.2 : -6.0;
      c.eval.grid_hi = c.task == TaskName::kToy1 ? 1.2 : 6.0;
      break;
    case TaskName::kIdxClassification:
      a.torso_hidden = {256, 256};
      a.d_u = 32;
      a.d_z = 64;
      a.latent_dim = 32;
      c.reference_size = 100;
      c.max_context = 100;
      t.epochs = 100;
      t.batch_size = 100;
      t.patience = 20;
      t.free_bits = std::numbers::ln2;  // one bit per unit, in nats
      c.eval.ood = {{"uniform", "uniform", 1000, {}, {}}};
      break;
  }
}

}  // namespace

const char* task_name(TaskName t) {
  for (const auto& e : kTasks)
    if (e.value == t) return e.name;
  return "?";
}

const char* model_kind_name(ModelKind m) {
  for (const auto& e : kModels)
    if (e.value == m) return e.name;
  return "?";
}

ModelConfig RunConfig::model_config(std::size_t input_dim, std::size_t num_classes) const {
  ModelConfig m;
  m.task = is_regression() ? data::TaskKind::kRegression : data::TaskKind::kClassification;
  m.num_classes = is_regression() ? 0 : num_classes;
  m.input_dim = input_dim;
  m.torso_hidden = arch.torso_hidden;
  m.head_hidden = arch.head_hidden;
  m.d_u = arch.d_u;
  m.d_z = arch.d_z;
  m.variant = model == ModelKind::kFnpPlus ? Variant::kFnpPlus : Variant::kFnp;
  m.epsilon = arch.epsilon;
  m.temperature = arch.temperature;
  return m;
}

BaselineConfig RunConfig::baseline_config(std::size_t input_dim, std::size_t num_classes) const {
  BaselineConfig b;
  b.task = is_regression() ? data::TaskKind::kRegression : data::TaskKind::kClassification;
  b.num_classes = is_regression() ? 0 : num_classes;
  b.input_dim = input_dim;
  b.torso_hidden = arch.torso_hidden;
  b.latent_dim = arch.latent_dim;
  b.context_dim = arch.context_dim;
  b.dropout = model == ModelKind::kNn ? 0.0 : arch.dropout;
  return b;
}

json RunConfig::to_json() const {
  json ood = json::array();
  for (const OodSpec& o : eval.ood) {
    json e = {{"name", o.name}, {"kind", o.kind}, {"count", o.count}};
    if (!o.images.empty()) e["images"] = o.images.string();
    if (!o.labels.empty()) e["labels"] = o.labels.string();
    ood.push_back(std::move(e));
  }
  return {
      {"task", task_name(task)},
      {"model", model_kind_name(model)},
      {"seed", seed},
      {"output_dir", output_dir.string()},
      {"architecture",
       {{"torso_hidden", arch.torso_hidden},
        {"head_hidden", arch.head_hidden},
        {"d_u", arch.d_u},
        {"d_z", arch.d_z},
        {"epsilon", arch.epsilon},
        {"temperature", arch.temperature},
        {"latent_dim", arch.latent_dim},
        {"context_dim", arch.context_dim},
        {"dropout", arch.dropout}}},
      {"train",
       {{"epochs", train.epochs},
        {"batch_size", train.batch_size},
        {"learning_rate", train.adam.learning_rate},
        {"beta1", train.adam.beta1},
        {"beta2", train.adam.beta2},
        {"adam_eps", train.adam.eps},
        {"free_bits", train.free_bits},
        {"patience", train.patience},
        {"val_samples", train.val_samples},
        {"reference_size", reference_size},
        {"val_fraction", val_fraction},
        {"max_context", max_context}}},
      {"data",
       {{"images", data.images.string()},
        {"labels", data.labels.string()},
        {"train", data.train},
        {"val", data.val},
        {"test", data.test},
        {"num_classes", data.num_classes},
        {"seed", data.seed}}},
      {"eval",
       {{"samples", eval.samples},
        {"ood", std::move(ood)},
        {"grid", {{"lo", eval.grid_lo}, {"hi", eval.grid_hi}, {"points", eval.grid_points}}}}},
  };
}

RunConfig parse_run_config(const json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  Section top(j, "");
  std::string task, model;
  top.read("task", task);
  top.read("model", model);
  if (task.empty()) throw ConfigError("task: required");
  if (model.empty()) throw ConfigError("model: required");
  c.task = lookup(kTasks, task, "task");
  c.model = lookup(kModels, model, "model");
  apply_defaults(c);

  top.read("seed", c.seed);
  std::string out;
  top.read("output_dir", out);
  if (!out.empty())
    c.output_dir = std::filesystem::path(out).is_absolute() ? std::filesystem::path(out) : base_dir / out;
  else
    c.output_dir = base_dir / c.output_dir;

  if (const json* a = top.sub("architecture")) {
    Section s(*a, "architecture");
    s.read("torso_hidden", c.arch.torso_hidden);
    s.read("head_hidden", c.arch.head_hidden, 1);
    s.read("d_u", c.arch.d_u, 1);
    s.read("d_z", c.arch.d_z, 1);
    s.read("epsilon", c.arch.epsilon, 0.0, 1.0, true);
    s.read("temperature", c.arch.temperature, 0.0, 1e6, true);
    s.read("latent_dim", c.arch.latent_dim, 1);
    s.read("context_dim", c.arch.context_dim, 1);
    s.read("dropout", c.arch.dropout, 0.0, 0.99);
    s.finish();
  }
  if (const json* t = top.sub("train")) {
    Section s(*t, "train");
    const double inf = std::numeric_limits<double>::infinity();
    s.read("epochs", c.train.epochs);
    s.read("batch_size", c.train.batch_size, 1);
    s.read("learning_rate", c.train.adam.learning_rate, 0.0, inf, true);
    s.read("beta1", c.train.adam.beta1, 0.0, 1.0);
    s.read("beta2", c.train.adam.beta2, 0.0, 1.0);
    s.read("adam_eps", c.train.adam.eps, 0.0, inf, true);
    s.read("free_bits", c.train.free_bits, 0.0, inf);
    s.read("patience", c.train.patience);
    s.read("val_samples", c.train.val_samples, 1);
    s.read("reference_size", c.reference_size, 1);
    s.read("val_fraction", c.val_fraction, 0.0, 0.9);
    s.read("max_context", c.max_context, 3);
    s.finish();
  }
  if (const json* d = top.sub("data")) {
    Section s(*d, "data");
    s.read_path("images", c.data.images, base_dir);
    s.read_path("labels", c.data.labels, base_dir);
    s.read("train", c.data.train, 1);
    s.read("val", c.data.val);
    s.read("test", c.data.test, 1);
    s.read("num_classes", c.data.num_classes, 2);
    s.read("seed", c.data.seed);
    s.finish();
  }
  if (const json* e = top.sub("eval")) {
    Section s(*e, "eval");
    s.read("samples", c.eval.samples, 1);
    if (const json* ood = s.sub("ood")) {
      if (!ood->is_array()) throw ConfigError("eval.ood: expected an array");
      c.eval.ood.clear();
      for (std::size_t i = 0; i < ood->size(); ++i) {
        Section o((*ood)[i], "eval.ood[" + std::to_string(i) + "]");
        OodSpec spec;
        o.read("name", spec.name);
        o.read("kind", spec.kind);
        o.read("count", spec.count, 1);
        o.read_path("images", spec.images, base_dir);
        o.read_path("labels", spec.labels, base_dir);
        o.finish();
        if (spec.name.empty()) spec.name = spec.kind;
        if (spec.kind == "idx") {
          require_file(spec.images, o.where("images"));
          require_file(spec.labels, o.where("labels"));
        } else if (spec.kind != "uniform" && spec.kind != "gaussian" && spec.kind != "test") {
          throw ConfigError(o.where("kind") + ": unknown value '" + spec.kind +
                            "' (expected one of uniform, gaussian, test, idx)");
        }
        c.eval.ood.push_back(std::move(spec));
      }
    }
    if (const json* g = s.sub("grid")) {
      Section gs(*g, "eval.grid");
      const double inf = std::numeric_limits<double>::infinity();
      gs.read("lo", c.eval.grid_lo, -inf, inf);
      gs.read("hi", c.eval.grid_hi, -inf, inf);
      gs.read("points", c.eval.grid_points, 2);
      gs.finish();
      if (!(c.eval.grid_lo < c.eval.grid_hi)) throw ConfigError("eval.grid: lo must be below hi");
    }
    s.finish();
  }
  top.finish();

  if (c.task == TaskName::kIdxClassification) {
    require_file(c.data.images, "data.images");
    require_file(c.data.labels, "data.labels");
    if (c.model == ModelKind::kGp) throw ConfigError("model: gp supports the regression tasks only");
    if (c.reference_size > c.data.train) throw ConfigError("train.reference_size: exceeds data.train");
  } else if (c.reference_size >= 20) {
    throw ConfigError("train.reference_size: must be below the 20 toy training points");
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

}  // namespace fnproc
