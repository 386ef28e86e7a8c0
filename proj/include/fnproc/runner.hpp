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

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fnproc/checkpoint.hpp"
#include "fnproc/config.hpp"
#include "fnproc/inference.hpp"

namespace fnproc {

/// Everything a run derives from its configuration before touching a model.
struct PreparedData {
  data::ReferenceSplit split;  // R and M over the training rows of split.base
  std::shared_ptr<const data::LabeledDataset> test;
  std::vector<std::size_t> test_rows;

  const data::LabeledDataset& dataset() const { return *split.base; }
};

PreparedData prepare_data(const RunConfig& cfg);

struct TrainOutcome {
  Checkpoint checkpoint;
  std::vector<MetricsRow> metrics;
};

/// Builds the configured model, trains it and packages the result.
TrainOutcome train_model(const RunConfig& cfg, const PreparedData& data);

/// Predictive summary of a checkpoint at `queries` with `samples` draws
/// (ignored by the deterministic models).
PredictiveSummary predict(const RunConfig& cfg, const Checkpoint& ck, const PreparedData& data, const Matrix& queries,
                          std::size_t samples, std::uint64_t seed);

/// Per-point uncertainty scores: class entropy, or the differential entropy
/// of a Gaussian with the predictive std for regression.
std::vector<double> uncertainty_scores(const PredictiveSummary& s);

nlohmann::json evaluate(const RunConfig& cfg, const Checkpoint& ck, const PreparedData& data);
std::vector<BandRow> bands(const RunConfig& cfg, const Checkpoint& ck, const PreparedData& data);

/// Loads `model.ckpt.json` from the output directory and checks that it was
/// written for the configured model.
Checkpoint load_run_checkpoint(const RunConfig& cfg);

// Commands. Each writes its files into cfg.output_dir and throws on failure.
void cmd_train(const RunConfig& cfg);
void cmd_eval(const RunConfig& cfg);
void cmd_bands(const RunConfig& cfg);

struct CommandOptions {
  std::filesystem::path config = {};
  std::optional<std::uint64_t> seed = {};
  std::optional<std::filesystem::path> out = {};
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitAbort = 3;

/// Runs "train", "eval" or "bands" and maps failures to exit codes.
int run_command(std::string_view command, const CommandOptions& opts, std::ostream& log);

}  // namespace fnproc
