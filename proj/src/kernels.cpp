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

#include "fnproc/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fnproc::kernels {
namespace {

// Below this many multiply-adds a kernel runs on the calling thread.
constexpr std::size_t kParallelWork = 1 << 15;

int g_max_threads = 0;

void check_matmul(const Matrix& a, const Matrix& b, std::size_t inner_a, std::size_t inner_b, const char* name) {
  if (inner_a != inner_b) {
    throw ShapeError(std::string(name) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

// c_i = sum_k a(i, k) * b_k, k ascending. Zero entries of a are skipped; this
// is exact for finite b and pays off on sparse pixel inputs.
inline void matmul_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  const std::size_t n = b.cols();
  double* out = c.data() + i * n;
  std::fill(out, out + n, 0.0);
  const double* arow = a.data() + i * a.cols();
  for (std::size_t k = 0; k < a.cols(); ++k) {
    const double aik = arow[k];
    if (aik == 0.0) continue;
    const double* brow = b.data() + k * n;
    for (std::size_t j = 0; j < n; ++j) out[j] += aik * brow[j];
  }
}

// Row i of a^T b: sum over k of a(k, i) * b_k.
inline void matmul_tn_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  const std::size_t n = b.cols();
  double* out = c.data() + i * n;
  std::fill(out, out + n, 0.0);
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double aki = a(k, i);
    if (aki == 0.0) continue;
    const double* brow = b.data() + k * n;
    for (std::size_t j = 0; j < n; ++j) out[j] += aki * brow[j];
  }
}

inline void sqdist_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  const std::size_t d = a.cols();
  const double* arow = a.data() + i * d;
  for (std::size_t j = 0; j < b.rows(); ++j) {
    const double* brow = b.data() + j * d;
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = arow[k] - brow[k];
      acc += diff * diff;
    }
    c(i, j) = acc;
  }
}

inline void log_softmax_row(const Matrix& a, Matrix& c, std::size_t i) {
  const auto in = a.row_span(i);
  auto out = c.row_span(i);
  const double m = *std::max_element(in.begin(), in.end());
  double s = 0.0;
  for (double v : in) s += std::exp(v - m);
  const double lse = m + std::log(s);
  for (std::size_t j = 0; j < in.size(); ++j) out[j] = in[j] - lse;
}

Matrix transposed(const Matrix& b) {
  Matrix t(b.cols(), b.rows());
  for (std::size_t r = 0; r < b.rows(); ++r)
    for (std::size_t k = 0; k < b.cols(); ++k) t(k, r) = b(r, k);
  return t;
}

template <typename RowFn>
void for_rows_parallel(std::size_t rows, std::size_t work, RowFn&& fn) {
#ifdef _OPENMP
  const bool go_parallel = work >= kParallelWork && rows > 1;
  const int threads = g_max_threads > 0 ? g_max_threads : omp_get_max_threads();
  const long long n = static_cast<long long>(rows);
#pragma omp parallel for schedule(static) num_threads(threads) if (go_parallel)
  for (long long i = 0; i < n; ++i) fn(static_cast<std::size_t>(i));
#else
  (void)work;
  for (std::size_t i = 0; i < rows; ++i) fn(i);
#endif
}

template <typename RowFn>
void for_rows_serial(std::size_t rows, RowFn&& fn) {
  for (std::size_t i = 0; i < rows; ++i) fn(i);
}

}  // namespace

void set_max_threads(int n) { g_max_threads = std::max(0, n); }

int max_threads() {
#ifdef _OPENMP
  return g_max_threads > 0 ? g_max_threads : omp_get_max_threads();
#else
  return 1;
#endif
}

void matmul(const Matrix& a, const Matrix& b, Matrix& c) {
  check_matmul(a, b, a.cols(), b.rows(), "matmul");
  c = Matrix(a.rows(), b.cols());
  for_rows_parallel(a.rows(), a.size() * b.cols(), [&](std::size_t i) { matmul_row(a, b, c, i); });
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c) {
  check_matmul(a, b, a.rows(), b.rows(), "matmul_tn");
  c = Matrix(a.cols(), b.cols());
  for_rows_parallel(a.cols(), a.size() * b.cols(), [&](std::size_t i) { matmul_tn_row(a, b, c, i); });
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  check_matmul(a, b, a.cols(), b.cols(), "matmul_nt");
  const Matrix bt = transposed(b);
  c = Matrix(a.rows(), b.rows());
  for_rows_parallel(a.rows(), a.size() * b.rows(), [&](std::size_t i) { matmul_row(a, bt, c, i); });
}

void pairwise_sqdist(const Matrix& a, const Matrix& b, Matrix& c) {
  check_matmul(a, b, a.cols(), b.cols(), "pairwise_sqdist");
  c = Matrix(a.rows(), b.rows());
  for_rows_parallel(a.rows(), a.size() * b.rows(), [&](std::size_t i) { sqdist_row(a, b, c, i); });
}

void log_softmax_rows(const Matrix& a, Matrix& c) {
  c = Matrix(a.rows(), a.cols());
  if (a.cols() == 0) return;
  for_rows_parallel(a.rows(), a.size() * 8, [&](std::size_t i) { log_softmax_row(a, c, i); });
}

namespace serial {

void matmul(const Matrix& a, const Matrix& b, Matrix& c) {
  check_matmul(a, b, a.cols(), b.rows(), "matmul");
  c = Matrix(a.rows(), b.cols());
  for_rows_serial(a.rows(), [&](std::size_t i) { matmul_row(a, b, c, i); });
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c) {
  check_matmul(a, b, a.rows(), b.rows(), "matmul_tn");
  c = Matrix(a.cols(), b.cols());
  for_rows_serial(a.cols(), [&](std::size_t i) { matmul_tn_row(a, b, c, i); });
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  check_matmul(a, b, a.cols(), b.cols(), "matmul_nt");
  const Matrix bt = transposed(b);
  c = Matrix(a.rows(), b.rows());
  for_rows_serial(a.rows(), [&](std::size_t i) { matmul_row(a, bt, c, i); });
}

void pairwise_sqdist(const Matrix& a, const Matrix& b, Matrix& c) {
  check_matmul(a, b, a.cols(), b.cols(), "pairwise_sqdist");
  c = Matrix(a.rows(), b.rows());
  for_rows_serial(a.rows(), [&](std::size_t i) { sqdist_row(a, b, c, i); });
}

void log_softmax_rows(const Matrix& a, Matrix& c) {
  c = Matrix(a.rows(), a.cols());
  if (a.cols() == 0) return;
  for_rows_serial(a.rows(), [&](std::size_t i) { log_softmax_row(a, c, i); });
}

}  // namespace serial
}  // namespace fnproc::kernels
