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

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fnproc {

/// Extent of a dense row-major matrix. Scalars are 1x1, vectors are 1xn.
struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
  std::string str() const { return std::to_string(rows) + "x" + std::to_string(cols); }
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major matrix of doubles with value semantics.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : shape_{rows, cols}, values_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : shape_{rows, cols}, values_(std::move(values)) {
    if (values_.size() != shape_.size()) {
      throw ShapeError("matrix: " + std::to_string(values_.size()) + " values do not fill shape " + shape_.str());
    }
  }

  static Matrix scalar(double v) { return Matrix(1, 1, v); }
  static Matrix row(std::vector<double> v) {
    const std::size_t n = v.size();
    return Matrix(1, n, std::move(v));
  }
  static Matrix column(std::vector<double> v) {
    const std::size_t n = v.size();
    return Matrix(n, 1, std::move(v));
  }
  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return shape_.rows; }
  std::size_t cols() const { return shape_.cols; }
  std::size_t size() const { return values_.size(); }
  const Shape& shape() const { return shape_; }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * shape_.cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * shape_.cols + c]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> row_span(std::size_t r) { return {values_.data() + r * shape_.cols, shape_.cols}; }
  std::span<const double> row_span(std::size_t r) const { return {values_.data() + r * shape_.cols, shape_.cols}; }
  const std::vector<double>& storage() const { return values_; }

  bool operator==(const Matrix&) const = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

}  // namespace fnproc
