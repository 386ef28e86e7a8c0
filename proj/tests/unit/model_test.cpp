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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fnproc/distributions.hpp"
#include "fnproc/model.hpp"
#include "fnproc/rng.hpp"
#include "../support/testing.hpp"

using namespace fnproc;
using fnproc::testing::random_matrix;

namespace {

Matrix permute_rows(const Matrix& m, const std::vector<std::size_t>& perm) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t k = 0; k < m.cols(); ++k) out(i, k) = m(perm[i], k);
  return out;
}

Matrix permute_both(const Matrix& m, const std::vector<std::size_t>& perm) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t j = 0; j < perm.size(); ++j) out(i, j) = m(perm[i], perm[j]);
  return out;
}

void zero_entries(ParameterStore& store, std::initializer_list<const char*> prefixes) {
  for (auto& e : store.entries())
    for (const char* p : prefixes)
      if (e.name.rfind(p, 0) == 0) e.value = Matrix(e.value.rows(), e.value.cols(), 0.0);
}

}  // namespace

TEST_SUITE("fnp-model") {
  TEST_CASE("config validation") {
    ModelConfig cfg;
    cfg.d_u = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = ModelConfig{};
    cfg.epsilon = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = ModelConfig{};
    CHECK_NOTHROW(cfg.validate());
    cfg.variant = Variant::kFnpPlus;
    CHECK(cfg.head_input_dim() == cfg.d_z + cfg.d_u);
  }

  TEST_CASE("embedding is per point") {
    const FnpModel model(testing::small_classifier_config(4, 3), 7);
    std::mt19937_64 rng(1);
    const Matrix x = random_matrix(5, 4, rng);
    ad::Tape t;
    const BoundParams p(t, model.params());
    const Embedding e = model.embed(p, t.constant(x));
    CHECK(e.u.dims() == 2);
    CHECK(e.z.dims() == 3);

    Matrix dup(6, 4);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t k = 0; k < 4; ++k) dup(i, k) = x(i, k);
    for (std::size_t k = 0; k < 4; ++k) dup(5, k) = x(2, k);
    const Embedding ed = model.embed(p, t.constant(dup));
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(ed.z.mean.value()(5, k) == e.z.mean.value()(2, k));
      CHECK(ed.z.logvar.value()(5, k) == e.z.logvar.value()(2, k));
    }

    const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
    const Embedding ep = model.embed(p, t.constant(permute_rows(x, perm)));
    CHECK(ep.u.mean.value() == permute_rows(e.u.mean.value(), perm));
    CHECK(ep.z.logvar.value() == permute_rows(e.z.logvar.value(), perm));
  }

  TEST_CASE("zero heads give standard normal embeddings") {
    FnpModel model(testing::small_classifier_config(4, 3), 7);
    zero_entries(model.params(), {"u_", "z_"});
    std::mt19937_64 rng(2);
    ad::Tape t;
    const BoundParams p(t, model.params());
    const Embedding e = model.embed(p, t.constant(random_matrix(3, 4, rng)));
    for (const auto* m : {&e.u.mean, &e.u.logvar, &e.z.mean, &e.z.logvar})
      for (double v : m->value().values()) CHECK(v == 0.0);
  }

  TEST_CASE("kernel g") {
    const std::vector<double> a{0.3, -1.2}, b{1.0, 0.0}, far{1e3, 0.0};
    CHECK(kernel_g(a, a, 0.7) == 1.0);
    CHECK(kernel_g(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 1.0}, 0.0) ==
          doctest::Approx(0.36787944117144233).epsilon(1e-15));
    CHECK(kernel_g(a, far, -200.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(kernel_g(a, b, 0.3) == kernel_g(b, a, 0.3));
    const double g = kernel_g(a, b, 0.3);
    CHECK(g > 0.0);
    CHECK(g <= 1.0);
    CHECK_THROWS_AS(kernel_g(a, std::vector<double>{1.0}, 0.0), ShapeError);
  }

  TEST_CASE("kernel g is symmetric bit for bit") {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 1000; ++rep) {
      const Matrix uv = random_matrix(2, 3, rng);
      const double lt = random_matrix(1, 1, rng)[0];
      CHECK(kernel_g(uv.row_span(0), uv.row_span(1), lt) == kernel_g(uv.row_span(1), uv.row_span(0), lt));
    }
  }

  TEST_CASE("scalar ordering") {
    CHECK(scalar_ordering_t(std::vector<double>{0.0, 0.0}) == doctest::Approx(-1.3862943611198906).epsilon(1e-15));
    CHECK(scalar_ordering_t(std::vector<double>{}) == 0.0);
    CHECK(scalar_ordering_t(std::vector<double>{0.5, 0.1}) > scalar_ordering_t(std::vector<double>{0.5, 0.0}));
    CHECK(scalar_ordering_t(std::vector<double>{-9.0, 2.0}) > scalar_ordering_t(std::vector<double>{-9.5, 2.0}));
  }

  TEST_CASE("bipartite graph") {
    ad::Tape t;
    const ad::Tensor lt = t.constant(0.0);
    const dist::ConcreteConfig cc;
    const ad::Tensor same_m = t.constant(Matrix(2, 2, 0.4));
    const ad::Tensor same_r = t.constant(Matrix(3, 2, 0.4));
    const Matrix noise(2, 3, 0.999);
    CHECK(sample_bipartite_A(same_m, same_r, lt, GraphMode::kHard, noise, cc).value() == Matrix(2, 3, 1.0));

    // tau -> infinity separates distinct points.
    const ad::Tensor um = t.constant(Matrix::row({0.0}));
    const ad::Tensor ur = t.constant(Matrix::column({0.1, -0.2}));
    for (double v : edge_probs(um, ur, t.constant(60.0)).value().values()) CHECK(v < 1e-300);

    // g = (0.3, 0.9) with tau = 1.
    const ad::Tensor u2 =
        t.constant(Matrix::column({std::sqrt(-2.0 * std::log(0.3)), std::sqrt(-2.0 * std::log(0.9))}));
    const Matrix g = edge_probs(um, u2, lt).value();
    CHECK(g[0] == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(g[1] == doctest::Approx(0.9).epsilon(1e-14));
    CHECK(sample_bipartite_A(um, u2, lt, GraphMode::kHard, Matrix::row({0.29, 0.95}), cc).value() ==
          Matrix::row({1.0, 0.0}));

    // Logits are log g - log(1 - g).
    const Matrix lg = edge_logits(um, u2, lt).value();
    CHECK(lg[0] == doctest::Approx(std::log(0.3 / 0.7)).epsilon(1e-12));
    CHECK_THROWS_AS(sample_bipartite_A(um, u2, lt, GraphMode::kHard, Matrix::row({0.5}), cc), ShapeError);
  }

  TEST_CASE("DAG over R") {
    ad::Tape t;
    const ad::Tensor lt = t.constant(-1.0);
    const dist::ConcreteConfig cc;
    const Matrix noise(4, 4, 1e-9);
    for (GraphMode mode : {GraphMode::kHard, GraphMode::kRelaxed}) {
      CHECK(sample_dag_G(t.constant(Matrix(4, 2, 0.3)), lt, mode, noise, cc).value() == Matrix(4, 4, 0.0));
    }
    // Point 0 ranks above point 1, so only 0 can take 1 as a parent.
    const ad::Tensor u = t.constant(Matrix(2, 1, std::vector<double>{0.5, 0.2}));
    const Matrix g = edge_probs(u, u, lt).value();
    int ones = 0;
    NoiseStream rng(9);
    for (int rep = 0; rep < 2000; ++rep) {
      const Matrix G = sample_dag_G(u, lt, GraphMode::kHard, rng.uniforms(2, 2), cc).value();
      CHECK(G(1, 0) == 0.0);
      CHECK(G(0, 0) == 0.0);
      CHECK(G(1, 1) == 0.0);
      ones += G(0, 1) == 1.0;
    }
    const double p = g(0, 1);
    CHECK(std::abs(ones / 2000.0 - p) < 5.0 * std::sqrt(p * (1 - p) / 2000.0));
    const Matrix soft = sample_dag_G(u, lt, GraphMode::kRelaxed, Matrix(2, 2, 0.5), cc).value();
    CHECK(soft(1, 0) == 0.0);
    CHECK(soft(0, 1) > 0.0);
  }

  TEST_CASE("hard DAG samples are acyclic and antisymmetric") {
    std::mt19937_64 rng(5);
    NoiseStream noise(6);
    const dist::ConcreteConfig cc;
    for (int rep = 0; rep < 200; ++rep) {
      const std::size_t n = 1 + rep % 50;
      ad::Tape t;
      const Matrix u = random_matrix(n, 3, rng, -1.0, 1.0);
      const Matrix G = sample_dag_G(t.constant(u), t.constant(0.0), GraphMode::kHard, noise.uniforms(n, n), cc).value();
      CHECK(is_acyclic(G));
      const Matrix P = dag_edge_probs(u, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) CHECK(P(i, j) * P(j, i) == 0.0);
    }
  }

  TEST_CASE("acyclicity check") {
    CHECK(is_acyclic(Matrix(3, 3, 0.0)));
    Matrix cyc(2, 2, 0.0);
    cyc(0, 1) = cyc(1, 0) = 1.0;
    CHECK_FALSE(is_acyclic(cyc));
    Matrix self(1, 1, 1.0);
    CHECK_FALSE(is_acyclic(self));
  }

  TEST_CASE("parent-averaged prior") {
    ad::Tape t;
    const auto ref =
        dist::DiagGaussianParams::make(t.constant(Matrix(2, 2, std::vector<double>{0.5, -1.0, 2.0, 0.3})),
                                       t.constant(Matrix(2, 2, std::vector<double>{-0.2, 0.4, 1.1, -3.0})));
    for (double eps : {1e-8, 0.5}) {
      const auto zero = prior_z_params(t.constant(Matrix(1, 2, 0.0)), ref, eps);
      CHECK(zero.mean.value() == Matrix(1, 2, 0.0));
      CHECK(zero.logvar.value() == Matrix(1, 2, 0.0));
    }
    const auto single = prior_z_params(t.constant(Matrix::row({0.0, 1.0})), ref, 1e-8);
    CHECK(single.mean.value()[0] == doctest::Approx(2.0).epsilon(1e-7));
    CHECK(single.logvar.value()[1] == doctest::Approx(-3.0).epsilon(1e-7));

    const auto twin_ref = dist::DiagGaussianParams::make(t.constant(Matrix(2, 1, std::vector<double>{0.7, 0.7})),
                                                         t.constant(Matrix(2, 1, std::vector<double>{-0.4, -0.4})));
    const auto one = prior_z_params(t.constant(Matrix::row({1.0, 0.0})), twin_ref, 1e-8);
    const auto two = prior_z_params(t.constant(Matrix::row({1.0, 1.0})), twin_ref, 1e-8);
    CHECK(two.mean.item() == doctest::Approx(one.mean.item()).epsilon(1e-7));
    CHECK(two.logvar.item() == doctest::Approx(one.logvar.item()).epsilon(1e-7));
  }

  TEST_CASE("regression head scale") {
    ModelConfig cfg;
    cfg.torso_hidden = {4};
    cfg.head_hidden = 3;
    cfg.d_z = 2;
    FnpModel model(cfg, 1);
    zero_entries(model.params(), {"head.scale"});
    ad::Tape t;
    const BoundParams p(t, model.params());
    std::mt19937_64 rng(4);
    const HeadOutput h = model.predict_head(p, t.constant(random_matrix(5, 2, rng)), std::nullopt);
    for (double s : h.sigma.value().values()) CHECK(s == doctest::Approx(0.72383246250395072).epsilon(1e-15));

    FnpModel big(cfg, 2);
    for (auto& e : big.params().entries())
      if (e.name.rfind("head.", 0) == 0)
        for (double& v : e.value.values()) v *= 50.0;
    ad::Tape t2;
    const BoundParams p2(t2, big.params());
    const HeadOutput hb = big.predict_head(p2, t2.constant(random_matrix(50, 2, rng, -10, 10)), std::nullopt);
    for (double s : hb.sigma.value().values()) CHECK(s > 0.1);
  }

  TEST_CASE("classification head") {
    FnpModel model(testing::small_classifier_config(4, 5), 3);
    zero_entries(model.params(), {"head.out"});
    ad::Tape t;
    const BoundParams p(t, model.params());
    const HeadOutput h = model.predict_head(p, t.constant(Matrix(2, 3, 0.8)), std::nullopt);
    for (double v : h.log_probs.value().values()) CHECK(v == doctest::Approx(-std::log(5.0)).epsilon(1e-15));
    CHECK_THROWS_AS(model.predict_head(p, t.constant(Matrix(2, 3, 0.8)), t.constant(Matrix(2, 2, 0.0))),
                    std::invalid_argument);

    FnpModel plus(testing::small_classifier_config(4, 5, Variant::kFnpPlus), 3);
    ad::Tape t2;
    const BoundParams p2(t2, plus.params());
    CHECK_THROWS_AS(plus.predict_head(p2, t2.constant(Matrix(2, 3, 0.8)), std::nullopt), std::invalid_argument);
    CHECK(plus.predict_head(p2, t2.constant(Matrix(2, 3, 0.8)), t2.constant(Matrix(2, 2, 0.1))).log_probs.cols() == 5);
  }

  TEST_CASE("log joint of R") {
    const FnpModel model = testing::tiny_regression_model();
    const auto ds = testing::regression_data({0.3}, {1.2});
    const NoiseBundle nb(11, 3);
    ad::Tape t;
    const BoundParams p(t, model.params());
    const Embedding e = model.embed(p, t.constant(ds->inputs));
    const ad::Tensor z = dist::gaussian_rsample(e.z, nb.normals(NoiseRole::kZ, 0, 1));
    const auto ref = model.reference_params(p, e, ds->targets_at(std::vector<std::size_t>{0}));
    const ad::Tensor G = t.constant(Matrix(1, 1, 0.0));
    const double v = log_joint_R(model, p, e.u.mean, z, ds->targets_at(std::vector<std::size_t>{0}), G, ref).item();
    CHECK(v == doctest::Approx(-2.6387081390076466).epsilon(1e-13));
  }

  TEST_CASE("log joint of R is invariant to relabelling R") {
    FnpModel model(testing::small_classifier_config(3, 4), 5);
    testing::fill_by_name(model.params());
    const auto ds = testing::classification_data(6, 3, 4, 2);
    std::vector<std::size_t> rows(6);
    std::iota(rows.begin(), rows.end(), 0);
    const std::vector<std::size_t> perm{4, 2, 0, 5, 1, 3};
    std::mt19937_64 rng(7);
    const Matrix zv = random_matrix(6, 3, rng);
    ad::Tape t;
    const BoundParams p(t, model.params());
    const Embedding e = model.embed(p, t.constant(ds->inputs));
    const Matrix graph =
        sample_dag_G(e.u.mean, p["log_tau"], GraphMode::kHard, Matrix(6, 6, 0.3), dist::ConcreteConfig()).value();
    const auto ref = model.reference_params(p, e, ds->targets_at(rows));
    const double a =
        log_joint_R(model, p, e.u.mean, t.constant(zv), ds->targets_at(rows), t.constant(graph), ref).item();

    const Embedding ep = model.embed(p, t.constant(permute_rows(ds->inputs, perm)));
    const auto refp = model.reference_params(p, ep, permute_rows(ds->targets_at(rows), perm));
    const double b = log_joint_R(model, p, ep.u.mean, t.constant(permute_rows(zv, perm)),
                                 permute_rows(ds->targets_at(rows), perm), t.constant(permute_both(graph, perm)), refp)
                         .item();
    CHECK(b == doctest::Approx(a).epsilon(1e-13));
  }

  TEST_CASE("pipeline is permutation equivariant") {
    FnpModel model(testing::small_classifier_config(3, 4), 5);
    const auto ds = testing::classification_data(5, 3, 4, 3);
    const std::vector<std::uint64_t> ids{0, 1, 2, 3, 4};
    const std::vector<std::size_t> perm{2, 4, 1, 0, 3};
    std::vector<std::uint64_t> pids;
    for (std::size_t i : perm) pids.push_back(ids[i]);
    const NoiseBundle nb(1, 2);

    auto run = [&](const Matrix& x, std::span<const std::uint64_t> order) {
      ad::Tape t;
      const BoundParams p(t, model.params());
      const Embedding e = model.embed(p, t.constant(x));
      const ad::Tensor u = dist::gaussian_rsample(e.u, nb.stacked_normals(NoiseRole::kU, order, 2));
      const Matrix G = sample_dag_G(u, p["log_tau"], GraphMode::kHard, pair_noise(nb, NoiseRole::kGRow, order, order),
                                    dist::ConcreteConfig())
                           .value();
      const Matrix A = sample_bipartite_A(u, u, p["log_tau"], GraphMode::kRelaxed,
                                          pair_noise(nb, NoiseRole::kARow, order, order), dist::ConcreteConfig())
                           .value();
      return std::tuple{u.value(), e.z.mean.value(), G, A};
    };
    const auto [u, zm, G, A] = run(ds->inputs, ids);
    const auto [up, zmp, Gp, Ap] = run(permute_rows(ds->inputs, perm), pids);
    CHECK(up == permute_rows(u, perm));
    CHECK(zmp == permute_rows(zm, perm));
    CHECK(Gp == permute_both(G, perm));
    CHECK(Ap == permute_both(A, perm));
  }

  TEST_CASE("composite map gradient") {
    FnpModel model(testing::small_classifier_config(3, 2), 11);
    testing::fill_by_name(model.params());
    std::mt19937_64 rng(12);
    const Matrix xr = random_matrix(3, 3, rng, -1.0, 1.0);
    const auto ds = testing::classification_data(3, 3, 2, 1);
    const Matrix yr = ds->targets_at(std::vector<std::size_t>{0, 1, 2});
    const Matrix noise_u = random_matrix(5, 2, rng, -1.0, 1.0);
    NoiseStream us(13);
    const Matrix noise_a = us.uniforms(2, 3);
    const testing::ScalarBuilder f = [&](ad::Tape& t, std::span<const ad::Tensor> in) {
      const BoundParams p(t, model.params());
      const Embedding er = model.embed(p, in[0]);
      const Embedding em = model.embed(p, in[1]);
      const ad::Tensor ur = ad::add(er.u.mean, t.constant(Matrix(3, 2, 0.0)));
      const ad::Tensor A =
          sample_bipartite_A(em.u.mean, ur, in[2], GraphMode::kRelaxed, noise_a, dist::ConcreteConfig());
      const auto prior = prior_z_params(A, model.reference_params(p, er, yr), model.config().epsilon);
      return dist::gaussian_kl(em.z, prior);
    };
    CHECK(testing::worst_gradient_error(f, {xr, random_matrix(2, 3, rng, -1.0, 1.0), Matrix::scalar(-0.3)}) < 1e-4);
  }

}  // TEST_SUITE
