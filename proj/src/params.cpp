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

#include "fnproc/params.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fnproc/rng.hpp"

namespace fnproc {
namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

}  // namespace

void ParameterStore::add(std::string name, Matrix value, bool trainable) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  entries_.push_back({std::move(name), std::move(value), trainable});
}

bool ParameterStore::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
}

std::size_t ParameterStore::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].name == name) return i;
  throw std::out_of_range("unknown parameter: " + std::string(name));
}

const Matrix& ParameterStore::get(std::string_view name) const { return entries_[index_of(name)].value; }
Matrix& ParameterStore::get(std::string_view name) { return entries_[index_of(name)].value; }

bool operator==(const ParameterStore::Entry& a, const ParameterStore::Entry& b) {
  return a.name == b.name && a.trainable == b.trainable && a.value == b.value;
}

bool ParameterStore::operator==(const ParameterStore& other) const { return entries_ == other.entries_; }

void add_linear(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t out, std::uint64_t seed) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  NoiseStream rng(seed, 0, NoiseRole::kInit, fnv1a(prefix));
  Matrix w(in, out);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = bound * (2.0 * rng.uniform() - 1.0);
  Matrix b(1, out);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = bound * (2.0 * rng.uniform() - 1.0);
  store.add(prefix + ".weight", std::move(w));
  store.add(prefix + ".bias", std::move(b));
}

BoundParams::BoundParams(ad::Tape& tape, const ParameterStore& store) : tape_(&tape), store_(&store) {
  tensors_.reserve(store.size());
  for (const auto& e : store.entries()) {
    tensors_.push_back(e.trainable ? tape.variable(e.value) : tape.constant(e.value));
  }
}

const ad::Tensor& BoundParams::operator[](std::string_view name) const { return tensors_[store_->index_of(name)]; }

ad::Tensor linear(const BoundParams& p, const std::string& prefix, const ad::Tensor& x) {
  return ad::add_row(ad::matmul(x, p[prefix + ".weight"]), p[prefix + ".bias"]);
}

}  // namespace fnproc
