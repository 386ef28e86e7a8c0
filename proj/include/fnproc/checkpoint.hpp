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
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fnproc/params.hpp"

namespace fnproc {

inline constexpr int kCheckpointVersion = 1;

/// Trained parameters plus what is needed to rebuild the model around them.
struct Checkpoint {
  int format_version = kCheckpointVersion;
  std::uint64_t seed = 0;
  std::string model;  // model kind, e.g. "fnp-plus"
  nlohmann::json config;
  /// Dataset identities of the reference / context set (empty when unused).
  std::vector<std::size_t> reference;
  ParameterStore params;
};

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { kIo, kParse, kVersion, kMissingParameter, kShape, kDuplicate };
  CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Canonical text form. Doubles are written in the shortest form that reads
/// back to the same value.
std::string serialize_checkpoint(const Checkpoint& ck);
Checkpoint parse_checkpoint(std::string_view text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies every entry of `target` from `loaded` by name. Throws kMissingParameter
/// or kShape; entries of `loaded` that `target` does not know are also kMissingParameter.
void restore_parameters(ParameterStore& target, const ParameterStore& loaded);

}  // namespace fnproc
