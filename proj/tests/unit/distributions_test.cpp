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
#include <limits>
#include <random>

#include "fnproc/distributions.hpp"
#include "fnproc/numeric.hpp"
#include "fnproc/rng.hpp"
#include "../support/testing.hpp"

using namespace fnproc;

namespace {

dist::DiagGaussianParams gauss(ad::Tape& t, std::vector<double> mean, std::vector<double> logvar) {
  return dist::DiagGaussianParams::make(t.constant(Matrix::row(std::move(mean))),
                                        t.constant(Matrix::row(std::move(logvar))));
}

}  // namespace

TEST_SUITE("distributions") {
  TEST_CASE("rsample") {
    ad::Tape t;
    const Matrix z = Matrix::row({0.3, -1.2});
    CHECK(dist::gaussian_rsample(gauss(t, {0, 0}, {0, 0}), z).value() == z);
    CHECK(dist::gaussian_rsample(gauss(t, {0.7, -2}, {3, -5}), Matrix(1, 2, 0.0)).value() == Matrix::row({0.7, -2}));
    CHECK(dist::gaussian_rsample(gauss(t, {1.0}, {std::log(4.0)}), Matrix::row({0.5})).item() ==
          doctest::Approx(2.0).epsilon(1e-15));
    CHECK_THROWS_AS(dist::gaussian_rsample(gauss(t, {0, 0}, {0, 0}), Matrix::row({1.0})), ShapeError);
  }

  TEST_CASE("logvar is clamped on construction") {
    ad::Tape t;
    const auto p = gauss(t, {0, 0}, {-100, 100});
    CHECK(p.logvar.value() == Matrix::row({dist::kLogvarMin, dist::kLogvarMax}));
  }

  TEST_CASE("log density") {
    ad::Tape t;
    const auto std_normal = gauss(t, {0.0}, {0.0});
    CHECK(dist::gaussian_log_prob(t.constant(0.0), std_normal).item() ==
          doctest::Approx(-0.91893853320467278).epsilon(1e-15));
    CHECK(dist::gaussian_log_prob(t.constant(1.0), std_normal).item() ==
          doctest::Approx(-1.4189385332046727).epsilon(1e-15));
    const auto p = gauss(t, {0.4, -1.0}, {0.3, -0.8});
    const double at_mean = dist::gaussian_log_prob(p.mean, p).item();
    CHECK(at_mean == doctest::Approx(-0.5 * (2 * std::log(2 * M_PI) + 0.3 - 0.8)).epsilon(1e-14));
  }

  TEST_CASE("KL closed form") {
    ad::Tape t;
    const auto p = gauss(t, {0.2, -0.4}, {0.1, 0.5});
    CHECK(dist::gaussian_kl(p, p).item() == 0.0);
    CHECK(dist::gaussian_kl(gauss(t, {1.0}, {0.0}), gauss(t, {0.0}, {0.0})).item() ==
          doctest::Approx(0.5).epsilon(1e-15));
    CHECK(dist::gaussian_kl(gauss(t, {0.0}, {std::log(4.0)}), gauss(t, {0.0}, {0.0})).item() ==
          doctest::Approx(0.80685281944005471).epsilon(1e-14));
  }

  TEST_CASE("KL is non-negative and zero only at equality") {
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 200; ++rep) {
      ad::Tape t;
      const Matrix m1 = testing::random_matrix(1, 4, rng), v1 = testing::random_matrix(1, 4, rng);
      const Matrix m2 = testing::random_matrix(1, 4, rng), v2 = testing::random_matrix(1, 4, rng);
      const auto q = dist::DiagGaussianParams::make(t.constant(m1), t.constant(v1));
      const auto p = dist::DiagGaussianParams::make(t.constant(m2), t.constant(v2));
      CHECK(dist::gaussian_kl(q, p).item() > 1e-12);
      CHECK(std::abs(dist::gaussian_kl(q, q).item()) <= 1e-12);
    }
  }

  TEST_CASE("KL matches a Monte-Carlo estimate") {
    ad::Tape t(ad::Tape::Mode::kInference);
    const auto q = gauss(t, {0.3, -0.2}, {-0.4, 0.6});
    const auto p = gauss(t, {-0.1, 0.5}, {0.2, -0.3});
    const std::size_t n = 100000;
    NoiseStream rng(21);
    const ad::Tensor x =
        dist::gaussian_rsample(dist::DiagGaussianParams::make(ad::matmul(t.constant(Matrix(n, 1, 1.0)), q.mean),
                                                              ad::matmul(t.constant(Matrix(n, 1, 1.0)), q.logvar)),
                               rng.normals(n, 2));
    auto rows_under = [&](const dist::DiagGaussianParams& g) {
      return dist::gaussian_log_prob_rows(
          x, dist::DiagGaussianParams::make(ad::matmul(t.constant(Matrix(n, 1, 1.0)), g.mean),
                                            ad::matmul(t.constant(Matrix(n, 1, 1.0)), g.logvar)));
    };
    const Matrix lq = rows_under(q).value(), lp = rows_under(p).value();
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = lq[i] - lp[i];
      sum += d;
      sum2 += d * d;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum2 / n - mean * mean) / n);
    CHECK(std::abs(mean - dist::gaussian_kl(q, p).item()) < 3.0 * se);
  }

  TEST_CASE("binary concrete") {
    ad::Tape t;
    const dist::ConcreteConfig c03(0.3);
    for (double temp : {0.1, 0.3, 2.0}) {
      CHECK(dist::binary_concrete_rsample(t.constant(0.0), dist::ConcreteConfig(temp), Matrix::scalar(0.5)).item() ==
            0.5);
    }
    CHECK(dist::binary_concrete_rsample(t.constant(1e4), c03, Matrix::scalar(0.5)).item() == 1.0);
    CHECK(dist::binary_concrete_rsample(t.constant(0.0), c03, Matrix::scalar(0.731059)).item() ==
          doctest::Approx(0.96555504192853592).epsilon(1e-13));
    const double u1 = 1.0 / (1.0 + std::exp(-1.0));
    CHECK(dist::binary_concrete_rsample(t.constant(0.0), c03, Matrix::scalar(u1)).item() ==
          doctest::Approx(0.96555480433378882).epsilon(1e-13));
    CHECK_THROWS_AS(dist::binary_concrete_rsample(t.constant(0.0), c03, Matrix::scalar(0.0)), std::domain_error);
    CHECK_THROWS_AS(dist::binary_concrete_rsample(t.constant(0.0), c03, Matrix::scalar(1.0)), std::domain_error);
    CHECK_THROWS(dist::ConcreteConfig(0.0));
  }

  TEST_CASE("binary concrete stays inside the open interval and differentiates") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> ud(1e-6, 1.0 - 1e-6);
    for (int rep = 0; rep < 100; ++rep) {
      const Matrix u = Matrix::row({ud(rng), ud(rng), ud(rng)});
      const Matrix logit = testing::random_matrix(1, 3, rng);
      ad::Tape t;
      const Matrix y = dist::binary_concrete_rsample(t.constant(logit), dist::ConcreteConfig(0.3), u).value();
      for (double v : y.values()) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
      }
      const testing::ScalarBuilder f = [&](ad::Tape& tp, std::span<const ad::Tensor> x) {
        return ad::sum(ad::mul(dist::binary_concrete_rsample(x[0], dist::ConcreteConfig(0.3), u),
                               tp.constant(Matrix::row({1.0, -0.5, 0.25}))));
      };
      CHECK(testing::worst_gradient_error(f, {logit}) < 1e-5);
    }
  }

  TEST_CASE("bernoulli threshold") {
    for (double u : {1e-9, 0.5, 1.0 - 1e-9}) {
      CHECK(dist::bernoulli_sample(1.0, u) == 1);
      CHECK(dist::bernoulli_sample(0.0, u) == 0);
    }
    CHECK(dist::bernoulli_sample(0.3, 0.29) == 1);
    CHECK(dist::bernoulli_sample(0.3, 0.31) == 0);
  }

  TEST_CASE("standard normal log CDF") {
    CHECK(dist::std_normal_log_cdf(0.0) == doctest::Approx(-0.69314718055994529).epsilon(1e-15));
    CHECK(dist::std_normal_log_cdf(40.0) == 0.0);
    CHECK(dist::std_normal_log_cdf(3.0) == doctest::Approx(-0.0013508099647481938).epsilon(1e-13));
    CHECK(dist::std_normal_log_cdf(-7.5) == doctest::Approx(-31.075890902890002).epsilon(1e-13));
    CHECK(dist::std_normal_log_cdf(-10.0) == doctest::Approx(-53.23128515051247).epsilon(1e-13));
    CHECK(dist::std_normal_log_cdf(-40.0) == doctest::Approx(-804.6084420137538).epsilon(1e-13));
    CHECK(std::isfinite(dist::std_normal_log_cdf(-1e3)));
  }

  TEST_CASE("standard normal log CDF is strictly increasing") {
    double prev = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 1000; ++i) {
      const double v = dist::std_normal_log_cdf(-12.0 + 24.0 * i / 1000.0);
      CHECK(v > prev);
      prev = v;
    }
  }

}  // TEST_SUITE
