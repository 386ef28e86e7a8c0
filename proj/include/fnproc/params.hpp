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
#include <string>
#include <string_view>
#include <vector>

#include "fnproc/matrix.hpp"
#include "fnproc/tensor.hpp"

namespace fnproc {

/// Named parameter matrices in insertion order. Non-trainable entries hold
/// fixed buffers (e.g. input standardization) that travel with checkpoints.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Matrix value;
    bool trainable = true;
  };

  void add(std::string name, Matrix value, bool trainable = true);
  bool contains(std::string_view name) const;
  const Matrix& get(std::string_view name) const;
  Matrix& get(std::string_view name);
  std::size_t index_of(std::string_view name) const;

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  bool operator==(const ParameterStore&) const;

 private:
  std::vector<Entry> entries_;
};

bool operator==(const ParameterStore::Entry& a, const ParameterStore::Entry& b);

/// Adds a dense layer `prefix.weight` (in x out) and `prefix.bias` (1 x out)
/// drawn from U(-1/sqrt(in), 1/sqrt(in)).
void add_linear(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t out, std::uint64_t seed);

/// Every entry of a store placed on one tape. Trainable entries become
/// variables, buffers become constants.
class BoundParams {
 public:
  BoundParams(ad::Tape& tape, const ParameterStore& store);

  const ad::Tensor& operator[](std::string_view name) const;
  const ad::Tensor& at(std::size_t index) const { return tensors_[index]; }
  ad::Tape& tape() const { return *tape_; }
  const ParameterStore& store() const { return *store_; }

 private:
  ad::Tape* tape_;
  const ParameterStore* store_;
  std::vector<ad::Tensor> tensors_;
};

/// x W + b for the layer registered under `prefix`.
ad::Tensor linear(const BoundParams& p, const std::string& prefix, const ad::Tensor& x);

}  // namespace fnproc
