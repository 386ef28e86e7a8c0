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

#include <doctest.h>

#include <cmath>
#include <random>

#include "fnproc/tensor.hpp"
#include "../support/op_catalogue.hpp"

using namespace fnproc;
using fnproc::testing::random_matrix;

TEST_SUITE("tensor") {
  TEST_CASE("relu clips negatives") {
    ad::Tape t;
    const ad::Tensor y = ad::relu(t.constant(Matrix::row({-2.0, 0.0, 3.0})));
    CHECK(y.value() == Matrix::row({0.0, 0.0, 3.0}));
  }

  TEST_CASE("matmul by the identity is a no-op") {
    std::mt19937_64 rng(3);
    const Matrix x = random_matrix(3, 5, rng);
    ad::Tape t;
    CHECK(ad::matmul(t.constant(Matrix::identity(3)), t.constant(x)).value() == x);
  }

  TEST_CASE("softplus at zero is ln 2") {
    ad::Tape t;
    CHECK(ad::softplus(t.constant(0.0)).item() == doctest::Approx(0.69314718055994529).epsilon(1e-15));
    CHECK(ad::softplus_value(0.0) == doctest::Approx(0.69314718055994529).epsilon(1e-15));
    // Stable form stays finite far out.
    CHECK(ad::softplus_value(800.0) == 800.0);
    CHECK(ad::softplus_value(-800.0) == 0.0);
  }

  TEST_CASE("shape mismatch names both shapes") {
    ad::Tape t;
    const ad::Tensor a = t.constant(Matrix(2, 3));
    const ad::Tensor b = t.constant(Matrix(3, 2));
    try {
      (void)ad::add(a, b);
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("2x3") != std::string::npos);
      CHECK(msg.find("3x2") != std::string::npos);
    }
    CHECK_THROWS_AS(ad::matmul(a, a), ShapeError);
  }

  TEST_CASE("backward of sum gives ones") {
    ad::Tape t;
    const ad::Tensor x = t.variable(Matrix(2, 3, 1.5));
    const ad::Gradients g = t.backward(ad::sum(x));
    CHECK(g.at(x) == Matrix(2, 3, 1.0));
  }

  TEST_CASE("softplus derivative at zero is one half") {
    ad::Tape t;
    const ad::Tensor x = t.variable(Matrix::scalar(0.0));
    CHECK(t.backward(ad::softplus(x)).at(x)(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  }

  TEST_CASE("product rule") {
    ad::Tape t;
    const ad::Tensor x = t.variable(Matrix::scalar(3.0));
    CHECK(t.backward(ad::mul(x, x)).at(x)(0, 0) == 6.0);
  }

  TEST_CASE("fan-out gradients accumulate exactly") {
    ad::Tape t;
    const ad::Tensor x = t.variable(Matrix::row({0.1, -7.3, 1e10}));
    const ad::Gradients g = t.backward(ad::sum(ad::add(x, x)));
    CHECK(g.at(x) == Matrix(1, 3, 2.0));
  }

  TEST_CASE("non-scalar loss is rejected") {
    ad::Tape t;
    const ad::Tensor x = t.variable(Matrix(2, 2, 1.0));
    CHECK_THROWS(t.backward(x));
  }

  TEST_CASE("constants receive no gradient") {
    ad::Tape t;
    const ad::Tensor x = t.variable(Matrix::scalar(2.0));
    const ad::Tensor c = t.constant(Matrix::scalar(5.0));
    const ad::Gradients g = t.backward(ad::mul(x, c));
    CHECK(g.find(c) == nullptr);
    CHECK(g.at(x)(0, 0) == 5.0);
  }

  TEST_CASE("inference tapes record no gradients") {
    ad::Tape t(ad::Tape::Mode::kInference);
    const ad::Tensor x = t.variable(Matrix::scalar(2.0));
    CHECK_FALSE(x.requires_grad());
  }

  TEST_CASE("parents precede children on the tape") {
    ad::Tape t;
    const ad::Tensor a = t.variable(Matrix::scalar(1.0));
    const ad::Tensor b = ad::exp(a);
    const ad::Tensor c = ad::mul(a, b);
    CHECK(a.id() < b.id());
    CHECK(b.id() < c.id());
    CHECK(t.size() == 3);
  }

  TEST_CASE("backward is deterministic") {
    std::mt19937_64 rng(5);
    const Matrix w = random_matrix(4, 3, rng);
    const Matrix xv = random_matrix(6, 4, rng);
    ad::Tape t;
    const ad::Tensor x = t.variable(xv);
    const ad::Tensor loss = ad::sum(ad::log_softmax(ad::matmul(ad::softplus(x), t.constant(w))));
    CHECK(t.backward(loss).at(x) == t.backward(loss).at(x));
  }

  TEST_CASE("log floors its argument") {
    ad::Tape t;
    const ad::Tensor x = t.variable(Matrix::row({0.0, -1.0}));
    const ad::Tensor y = ad::log(x);
    CHECK(y.value()(0, 0) == doctest::Approx(std::log(ad::kLogFloor)));
    CHECK(t.backward(ad::sum(y)).at(x) == Matrix(1, 2, 0.0));
  }

  TEST_CASE("column_mean does not depend on row order") {
    ad::Tape t;
    const Matrix a(3, 1, std::vector<double>{1e16, 1.0, -1e16});
    const Matrix b(3, 1, std::vector<double>{1.0, -1e16, 1e16});
    CHECK(ad::column_mean(t.constant(a)).item() == ad::column_mean(t.constant(b)).item());
    CHECK(ad::column_mean(t.constant(a)).item() == doctest::Approx(1.0 / 3.0));
  }

  TEST_CASE("finite differences") {
    auto sq = [](const Matrix& x) { return x[0] * x[0] + x[1] * x[1]; };
    const Matrix g = ad::finite_diff_grad(sq, Matrix::row({1.0, 2.0}), 1e-5);
    CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(g[1] == doctest::Approx(4.0).epsilon(1e-8));
    const Matrix z = ad::finite_diff_grad([](const Matrix&) { return 3.0; }, Matrix::row({1.0, 2.0}), 1e-5);
    CHECK(z == Matrix(1, 2, 0.0));
    auto sp = [](const Matrix& x) { return ad::softplus_value(x[0]); };
    CHECK(std::abs(ad::finite_diff_grad(sp, Matrix::scalar(0.0), 1e-5)[0] - 0.5) < 1e-8);
  }

  TEST_CASE("every primitive matches finite differences") {
    std::mt19937_64 rng(17);
    for (const auto& op : fnproc::testing::primitive_ops()) {
      CAPTURE(op.name);
      for (int rep = 0; rep < 10; ++rep) {
        CHECK(fnproc::testing::worst_gradient_error(op.build, op.inputs(rng)) < 1e-5);
      }
    }
  }

}  // TEST_SUITE
