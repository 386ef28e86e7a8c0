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

#include "fnproc/checkpoint.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace fnproc {

using nlohmann::json;

namespace {

[[noreturn]] void fail(CheckpointError::Kind kind, const std::string& msg) {
  throw CheckpointError(kind, "checkpoint: " + msg);
}

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) fail(CheckpointError::Kind::kParse, std::string("missing field '") + key + "'");
  return *it;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
  json params = json::array();
  for (const auto& e : ck.params.entries()) {
    json values = json::array();
    for (std::size_t i = 0; i < e.value.size(); ++i) values.push_back(e.value[i]);
    params.push_back({{"name", e.name},
                      {"shape", {e.value.rows(), e.value.cols()}},
                      {"trainable", e.trainable},
                      {"values", std::move(values)}});
  }
  json out = {{"format_version", ck.format_version},
              {"seed", ck.seed},
              {"model", ck.model},
              {"config", ck.config},
              {"reference", ck.reference},
              {"parameters", std::move(params)}};
  return out.dump(1) + "\n";
}

Checkpoint parse_checkpoint(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(CheckpointError::Kind::kParse, e.what());
  }
  Checkpoint ck;
  try {
    ck.format_version = field(j, "format_version").get<int>();
    if (ck.format_version != kCheckpointVersion) {
      fail(CheckpointError::Kind::kVersion, "unsupported format_version " + std::to_string(ck.format_version) +
                                                " (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    ck.seed = field(j, "seed").get<std::uint64_t>();
    ck.model = field(j, "model").get<std::string>();
    ck.config = field(j, "config");
    ck.reference = field(j, "reference").get<std::vector<std::size_t>>();
    std::set<std::string> seen;
    for (const json& p : field(j, "parameters")) {
      const std::string name = field(p, "name").get<std::string>();
      if (!seen.insert(name).second) fail(CheckpointError::Kind::kDuplicate, "duplicate parameter '" + name + "'");
      const auto shape = field(p, "shape").get<std::vector<std::size_t>>();
      const auto values = field(p, "values").get<std::vector<double>>();
      if (shape.size() != 2 || shape[0] * shape[1] != values.size()) {
        fail(CheckpointError::Kind::kShape,
             "parameter '" + name + "' has " + std::to_string(values.size()) + " values, inconsistent with its shape");
      }
      Matrix m(shape[0], shape[1]);
      for (std::size_t i = 0; i < values.size(); ++i) m[i] = values[i];
      ck.params.add(name, std::move(m), field(p, "trainable").get<bool>());
    }
  } catch (const json::exception& e) {
    fail(CheckpointError::Kind::kParse, e.what());
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(CheckpointError::Kind::kIo, "cannot write " + path.string());
  out << serialize_checkpoint(ck);
  if (!out) fail(CheckpointError::Kind::kIo, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(CheckpointError::Kind::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

void restore_parameters(ParameterStore& target, const ParameterStore& loaded) {
  for (auto& e : target.entries()) {
    if (!loaded.contains(e.name)) fail(CheckpointError::Kind::kMissingParameter, "missing parameter '" + e.name + "'");
    const Matrix& v = loaded.get(e.name);
    if (v.shape() != e.value.shape()) {
      fail(CheckpointError::Kind::kShape,
           "parameter '" + e.name + "' has shape " + v.shape().str() + ", model expects " + e.value.shape().str());
    }
    e.value = v;
  }
  for (const auto& e : loaded.entries()) {
    if (!target.contains(e.name)) {
      fail(CheckpointError::Kind::kMissingParameter, "unexpected parameter '" + e.name + "'");
    }
  }
}

}  // namespace fnproc
