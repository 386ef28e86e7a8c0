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
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fnproc/baselines.hpp"
#include "fnproc/datasets.hpp"
#include "fnproc/model.hpp"
#include "fnproc/training.hpp"

namespace fnproc {

enum class TaskName { kToy1, kToy2, kIdxClassification };
enum class ModelKind { kFnp, kFnpPlus, kNp, kNn, kMcDropout, kGp };

const char* task_name(TaskName t);
const char* model_kind_name(ModelKind m);

/// Raised for a malformed or inconsistent configuration; the message starts
/// with the dotted field path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Architecture fields shared by all learned models.
struct ArchitectureSpec {
  std::vector<std::size_t> torso_hidden;
  std::size_t head_hidden = 100;
  std::size_t d_u = 3;
  std::size_t d_z = 50;
  double epsilon = 1e-8;
  double temperature = 0.3;
  std::size_t latent_dim = 50;
  std::size_t context_dim = 256;
  double dropout = 0.5;
};

struct OodSpec {
  std::string name;
  /// "uniform", "gaussian", "test" (the in-distribution test set again) or "idx".
  std::string kind = "uniform";
  std::size_t count = 1000;
  std::filesystem::path images;
  std::filesystem::path labels;
};

struct EvalSpec {
  std::size_t samples = 100;
  std::vector<OodSpec> ood;
  double grid_lo = 0.0;
  double grid_hi = 1.0;
  std::size_t grid_points = 200;
};

struct RunConfig {
  TaskName task = TaskName::kToy1;
  ModelKind model = ModelKind::kFnp;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";

  ArchitectureSpec arch;
  TrainConfig train;
  std::size_t reference_size = 10;
  /// Fraction of M moved to a validation split when the data has none.
  double val_fraction = 0.0;
  std::size_t max_context = 100;

  /// IDX files and subset sizes (idx-classification only). For toy tasks
  /// only `seed` is used: it draws the training data.
  data::DatasetManifest data;
  EvalSpec eval;

  bool is_regression() const { return task != TaskName::kIdxClassification; }
  ModelConfig model_config(std::size_t input_dim, std::size_t num_classes) const;
  BaselineConfig baseline_config(std::size_t input_dim, std::size_t num_classes) const;
  /// Every field, defaults included, in the input layout.
  nlohmann::json to_json() const;
};

/// Task-dependent defaults, overridden by the fields present in `j`.
/// Relative paths are resolved against `base_dir`; referenced files must exist.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace fnproc
