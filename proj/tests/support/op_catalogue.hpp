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

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "fnproc/tensor.hpp"
#include "testing.hpp"

namespace fnproc::testing {

/// A differentiable op with a random-input generator that keeps samples away
/// from kinks and outside the op's domain.
struct OpCase {
  std::string name;
  std::function<std::vector<Matrix>(std::mt19937_64&)> inputs;
  ScalarBuilder build;
};

namespace detail {

inline Matrix away_from(Matrix m, double point, double margin) {
  for (double& v : m.values()) {
    if (std::abs(v - point) < margin) v = point + (v < point ? -margin : margin);
  }
  return m;
}

inline Matrix positive(Matrix m, double lo) {
  for (double& v : m.values()) v = std::abs(v) + lo;
  return m;
}

// Contracts an op output against fixed weights so every output element
// carries a distinct gradient.
inline ad::Tensor contract(ad::Tape& t, const ad::Tensor& y) {
  Matrix w(y.rows(), y.cols());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = 0.5 + 0.25 * std::sin(1.3 * static_cast<double>(k));
  return ad::sum(ad::mul(y, t.constant(w)));
}

inline ScalarBuilder unary(ad::Tensor (*op)(const ad::Tensor&)) {
  return [op](ad::Tape& t, std::span<const ad::Tensor> x) { return contract(t, op(x[0])); };
}

inline ScalarBuilder binary(ad::Tensor (*op)(const ad::Tensor&, const ad::Tensor&)) {
  return [op](ad::Tape& t, std::span<const ad::Tensor> x) { return contract(t, op(x[0], x[1])); };
}

}  // namespace detail

inline std::vector<OpCase> primitive_ops() {
  using detail::away_from;
  using detail::binary;
  using detail::contract;
  using detail::positive;
  using detail::unary;
  auto one = [](std::size_t r, std::size_t c) {
    return [r, c](std::mt19937_64& g) { return std::vector<Matrix>{random_matrix(r, c, g)}; };
  };
  auto two = [](std::size_t r, std::size_t c) {
    return [r, c](std::mt19937_64& g) { return std::vector<Matrix>{random_matrix(r, c, g), random_matrix(r, c, g)}; };
  };
  std::vector<OpCase> ops;
  ops.push_back({"matmul",
                 [](std::mt19937_64& g) { return std::vector<Matrix>{random_matrix(3, 4, g), random_matrix(4, 2, g)}; },
                 binary(ad::matmul)});
  ops.push_back({"add", two(3, 2), binary(ad::add)});
  ops.push_back({"sub", two(3, 2), binary(ad::sub)});
  ops.push_back({"mul", two(3, 2), binary(ad::mul)});
  ops.push_back({"div",
                 [](std::mt19937_64& g) {
                   return std::vector<Matrix>{random_matrix(3, 2, g), positive(random_matrix(3, 2, g), 0.5)};
                 },
                 binary(ad::div)});
  ops.push_back({"relu",
                 [](std::mt19937_64& g) { return std::vector<Matrix>{away_from(random_matrix(3, 3, g), 0.0, 1e-3)}; },
                 unary(ad::relu)});
  ops.push_back({"softplus", one(3, 3), unary(ad::softplus)});
  ops.push_back({"exp", one(3, 3), unary(ad::exp)});
  ops.push_back({"log", [](std::mt19937_64& g) { return std::vector<Matrix>{positive(random_matrix(3, 3, g), 0.1)}; },
                 unary(ad::log)});
  ops.push_back({"sigmoid", one(3, 3), unary(ad::sigmoid)});
  ops.push_back({"neg", one(3, 3), unary(ad::neg)});
  ops.push_back({"sum", one(3, 3), [](ad::Tape&, std::span<const ad::Tensor> x) {
                   return ad::mul(ad::sum(x[0]), ad::sum(ad::mul(x[0], x[0])));
                 }});
  ops.push_back({"mean", one(3, 3), [](ad::Tape&, std::span<const ad::Tensor> x) {
                   return ad::mul(ad::mean(x[0]), ad::mean(ad::exp(x[0])));
                 }});
  ops.push_back({"concat_cols",
                 [](std::mt19937_64& g) { return std::vector<Matrix>{random_matrix(3, 2, g), random_matrix(3, 1, g)}; },
                 binary(ad::concat_cols)});
  ops.push_back({"add_row",
                 [](std::mt19937_64& g) { return std::vector<Matrix>{random_matrix(3, 2, g), random_matrix(1, 2, g)}; },
                 binary(ad::add_row)});
  ops.push_back({"transpose", one(3, 2), unary(ad::transpose)});
  ops.push_back({"scale", one(3, 2),
                 [](ad::Tape& t, std::span<const ad::Tensor> x) { return contract(t, ad::scale(x[0], -1.7)); }});
  ops.push_back({"add_scalar", one(3, 2), [](ad::Tape& t, std::span<const ad::Tensor> x) {
                   return contract(t, ad::mul(ad::add_scalar(x[0], 0.6), x[0]));
                 }});
  ops.push_back({"mul_scalar",
                 [](std::mt19937_64& g) { return std::vector<Matrix>{random_matrix(3, 2, g), random_matrix(1, 1, g)}; },
                 binary(ad::mul_scalar)});
  ops.push_back({"clamp",
                 [](std::mt19937_64& g) {
                   return std::vector<Matrix>{away_from(away_from(random_matrix(3, 3, g), -1.0, 1e-3), 1.0, 1e-3)};
                 },
                 [](ad::Tape& t, std::span<const ad::Tensor> x) { return contract(t, ad::clamp(x[0], -1.0, 1.0)); }});
  ops.push_back({"row_sum", one(3, 4), unary(ad::row_sum)});
  ops.push_back({"column_mean", one(4, 3), unary(ad::column_mean)});
  ops.push_back({"pairwise_sqdist",
                 [](std::mt19937_64& g) { return std::vector<Matrix>{random_matrix(3, 2, g), random_matrix(4, 2, g)}; },
                 binary(ad::pairwise_sqdist)});
  ops.push_back({"log1mexp",
                 [](std::mt19937_64& g) { return std::vector<Matrix>{positive(random_matrix(3, 3, g), 0.1)}; },
                 unary(ad::log1mexp)});
  ops.push_back({"log_softmax", one(3, 4), unary(ad::log_softmax)});
  return ops;
}

}  // namespace fnproc::testing
