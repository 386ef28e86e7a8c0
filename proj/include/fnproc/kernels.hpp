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

#include "fnproc/matrix.hpp"

// Dense compute kernels. Every kernel exists twice: an OpenMP version in
// fnproc::kernels and a single-threaded reference in fnproc::kernels::serial.
// Both share the per-row routine, so each output element is accumulated in
// the same order and the two produce bit-identical results.
namespace fnproc::kernels {

/// c = a * b
void matmul(const Matrix& a, const Matrix& b, Matrix& c);
/// c = a^T * b
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c);
/// c = a * b^T
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c);
/// c(i, j) = ||a_i - b_j||^2
void pairwise_sqdist(const Matrix& a, const Matrix& b, Matrix& c);
/// Row-wise log-softmax with max subtraction.
void log_softmax_rows(const Matrix& a, Matrix& c);

/// Caps the OpenMP team size used by the parallel kernels (0 = runtime default).
void set_max_threads(int n);
int max_threads();

namespace serial {
void matmul(const Matrix& a, const Matrix& b, Matrix& c);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c);
void pairwise_sqdist(const Matrix& a, const Matrix& b, Matrix& c);
void log_softmax_rows(const Matrix& a, Matrix& c);
}  // namespace serial

}  // namespace fnproc::kernels
