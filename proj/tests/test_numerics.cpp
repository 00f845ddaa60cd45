// Copyright 2026 The Essence Vector Authors.
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

#include <cmath>
#include <random>

#include "doctest.h"
#include "ev/numerics.hpp"
#include "test_util.hpp"

using namespace ev;
using ev::testing::random_bow;
using ev::testing::random_vector;

TEST_CASE("dense_forward with identity weights is the identity") {
  DenseLayer layer{Matrix::Identity(3, 3), Vector::Zero(3), Activation::kIdentity};
  Vector x(3);
  x << 1.5, -2.0, 0.25;
  CHECK(dense_forward(layer, x) == x);
  CHECK_THROWS_AS(dense_forward(layer, Vector::Zero(2)), std::invalid_argument);
}

TEST_CASE("softmax of equal logits is uniform") {
  DenseLayer layer{Matrix::Zero(2, 1), Vector::Zero(2), Activation::kSoftmax};
  Vector out = dense_forward(layer, Vector::Ones(1));
  CHECK(out[0] == 0.5);
  CHECK(out[1] == 0.5);
}

TEST_CASE("tanh layer matches a scalar evaluation") {
  std::mt19937_64 rng(42);
  auto layer = DenseLayer::glorot(4, 3, Activation::kTanh, rng);
  layer.bias << 0.1, -0.2, 0.3;
  Vector x = random_vector(4, rng);
  Vector out = dense_forward(layer, x);
  for (int r = 0; r < 3; ++r) {
    double acc = layer.bias[r];
    for (int c = 0; c < 4; ++c) acc += layer.weight(r, c) * x[c];
    CHECK(out[r] == doctest::Approx(std::tanh(acc)).epsilon(1e-14));
  }
}

TEST_CASE("sparse inputs take the column path with the same result") {
  std::mt19937_64 rng(1);
  auto layer = DenseLayer::glorot(40, 5, Activation::kIdentity, rng);
  Vector x = Vector::Zero(40);
  x[3] = 0.25;
  x[17] = 0.75;
  Vector expected = layer.weight * x + layer.bias;
  CHECK((dense_forward(layer, x) - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("softmax properties") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 1000; ++trial) {
    Vector logits = random_vector(1 + static_cast<Eigen::Index>(rng() % 30), rng, 20.0);
    Vector s = softmax(logits);
    REQUIRE(std::abs(s.sum() - 1.0) < 1e-9);
    REQUIRE((s.array() > 0.0).all());
    Vector shifted = softmax((logits.array() + 123.456).matrix());
    REQUIRE((s - shifted).cwiseAbs().maxCoeff() < 1e-9);
  }
  Vector huge(2);
  huge << 1000.0, 1000.0;
  CHECK(softmax(huge)[0] == 0.5);
}

TEST_CASE("tanh outputs stay inside (-1, 1)") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    auto layer = DenseLayer::glorot(6, 4, Activation::kTanh, rng);
    Vector out = dense_forward(layer, random_vector(6, rng, 3.0));
    REQUIRE((out.array().abs() < 1.0).all());
  }
}

TEST_CASE("kl_divergence closed forms") {
  Vector half(2);
  half << 0.5, 0.5;
  CHECK(kl_divergence(half, half) == 0.0);
  Vector one_zero(2);
  one_zero << 1.0, 0.0;
  CHECK(kl_divergence(one_zero, half) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  BowVector sparse({{0, 1.0}}, 2);
  CHECK(kl_divergence(sparse, half) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  Vector with_zero(2);
  with_zero << 0.0, 1.0;
  CHECK_THROWS_AS(kl_divergence(half, with_zero), std::domain_error);
  CHECK_THROWS_AS(kl_divergence(sparse, Vector::Ones(3)), std::invalid_argument);
}

TEST_CASE("kl_divergence of sparse p against softmax q matches direct summation") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t dim = 5 + rng() % 20;
    auto p = random_bow(dim, 0.3, rng);
    Vector q = softmax(random_vector(static_cast<Eigen::Index>(dim), rng));
    const auto dense = p.dense();
    double oracle = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      if (dense[i] > 0.0) oracle += dense[i] * std::log(dense[i] / q[static_cast<Eigen::Index>(i)]);
    }
    CHECK(std::abs(kl_divergence(p, q) - oracle) < 1e-10);
    CHECK(kl_divergence(p, q) >= 0.0);
  }
}

TEST_CASE("kl_divergence is nonnegative on random distributions") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto dim = static_cast<Eigen::Index>(2 + rng() % 15);
    Vector p = softmax(random_vector(dim, rng, 2.0));
    Vector q = softmax(random_vector(dim, rng, 2.0));
    REQUIRE(kl_divergence(p, q) >= 0.0);
    REQUIRE(std::abs(kl_divergence(p, p)) <= 1e-12);
  }
}

TEST_CASE("cosine_similarity") {
  Vector a(3), b(3);
  a << 1.0, 2.0, -1.0;
  CHECK(cosine_similarity(a, a) == doctest::Approx(1.0));
  CHECK(cosine_similarity(a, -a) == doctest::Approx(-1.0));
  a << 1.0, 0.0, 0.0;
  b << 0.0, 1.0, 0.0;
  CHECK(cosine_similarity(a, b) == 0.0);
  CHECK_THROWS_AS(cosine_similarity(a, Vector::Zero(3)), std::domain_error);
}

TEST_CASE("cosine gradient matches finite differences") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    Vector a = random_vector(4, rng), b = random_vector(4, rng);
    Vector analytic = cosine_similarity_grad(a, b);
    std::vector<double> values(a.data(), a.data() + a.size());
    GradCheckParam param{"a", values, {analytic.data(), static_cast<std::size_t>(analytic.size())}};
    auto report = finite_difference_check(
        [&] {
          Vector x = Eigen::Map<Vector>(values.data(), 4);
          return x.dot(b) / (x.norm() * b.norm());
        },
        std::span(&param, 1));
    CHECK(report.max_relative_error < 1e-6);
  }
}

namespace {

struct ScalarAdam {
  double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double m = 0.0, v = 0.0;
  int t = 0;
  double step(double theta, double g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    return theta - lr * mhat / (std::sqrt(vhat) + eps);
  }
};

DenseLayer scalar_layer(double value) {
  DenseLayer layer = DenseLayer::zeros(1, 1, Activation::kIdentity);
  layer.weight(0, 0) = value;
  return layer;
}

LayerGrad scalar_grad(double g) { return LayerGrad{Matrix::Constant(1, 1, g), Vector::Zero(1)}; }

}  // namespace

TEST_CASE("adam with zero gradient from a fresh state is a no-op") {
  std::mt19937_64 rng(8);
  auto layer = DenseLayer::glorot(3, 2, Activation::kTanh, rng);
  const auto before = layer;
  std::vector<ParamRef> params{{"w", &layer}};
  auto state = AdamState::for_params(params);
  auto grads = zero_grads(std::span<const DenseLayer>(&layer, 1));
  for (int i = 0; i < 5; ++i) adam_step(params, grads, state);
  CHECK(layer.weight == before.weight);
  CHECK(layer.bias == before.bias);
  CHECK(state.step == 5);
}

TEST_CASE("adam first step moves by the learning rate") {
  auto layer = scalar_layer(0.0);
  std::vector<ParamRef> params{{"w", &layer}};
  auto state = AdamState::for_params(params);
  std::vector<LayerGrad> grads{scalar_grad(1.0)};
  adam_step(params, grads, state);
  // m_hat = v_hat = 1 after bias correction.
  CHECK(std::abs(layer.weight(0, 0) - (-1e-3 / (1.0 + 1e-8))) < 1e-15);
  CHECK(state.step == 1);
}

TEST_CASE("adam matches a standalone scalar recurrence over 100 steps") {
  auto layer = scalar_layer(2.0);
  std::vector<ParamRef> params{{"w", &layer}};
  auto state = AdamState::for_params(params);
  std::vector<LayerGrad> grads{scalar_grad(0.7)};
  ScalarAdam oracle;
  double theta = 2.0;
  double previous = layer.weight(0, 0);
  for (int i = 0; i < 100; ++i) {
    adam_step(params, grads, state);
    theta = oracle.step(theta, 0.7);
    CHECK(layer.weight(0, 0) == doctest::Approx(theta).epsilon(1e-14));
    CHECK(layer.weight(0, 0) < previous);
    previous = layer.weight(0, 0);
  }
}

TEST_CASE("adam rejects non-finite gradients by name") {
  auto layer = scalar_layer(1.0);
  std::vector<ParamRef> params{{"decoder.0", &layer}};
  auto state = AdamState::for_params(params);
  std::vector<LayerGrad> grads{scalar_grad(std::nan(""))};
  CHECK_THROWS_WITH_AS(adam_step(params, grads, state), doctest::Contains("decoder.0"),
                       std::domain_error);
  CHECK(layer.weight(0, 0) == 1.0);
  CHECK(state.step == 0);
  AdamConfig bad;
  bad.beta1 = 1.0;
  CHECK_THROWS(AdamState::for_params(params, bad));
}

TEST_CASE("finite_difference_check on a quadratic") {
  std::vector<double> theta{3.0};
  std::vector<double> grad{3.0};
  GradCheckParam param{"theta", theta, grad};
  auto loss = [&] { return 0.5 * theta[0] * theta[0]; };
  auto report = finite_difference_check(loss, std::span(&param, 1), 1e-5);
  CHECK(report.max_relative_error < 1e-6);
  CHECK(report.step_size == 1e-5);
  CHECK(report.worst_parameter == "theta[0]");
  CHECK(theta[0] == 3.0);

  std::vector<double> doubled{6.0};
  GradCheckParam corrupted{"theta", theta, doubled};
  auto bad = finite_difference_check(loss, std::span(&corrupted, 1), 1e-5);
  CHECK(bad.max_relative_error == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(!bad.passes(1e-4));
}

TEST_CASE("backprop through a tanh/softmax stack matches finite differences") {
  std::mt19937_64 rng(31);
  std::vector<DenseLayer> layers{DenseLayer::glorot(5, 4, Activation::kTanh, rng),
                                 DenseLayer::glorot(4, 6, Activation::kSoftmax, rng)};
  Vector x = random_vector(5, rng);
  Vector target = softmax(random_vector(6, rng));
  NetworkTrace trace;
  Vector q = network_forward(layers, x, &trace);
  auto grads = zero_grads(layers);
  backprop(layers, trace, q - target, grads);
  std::vector<ParamRef> refs{{"l0", &layers[0]}, {"l1", &layers[1]}};
  auto params = gradcheck_params(refs, grads);
  auto report = finite_difference_check(
      [&] { return kl_divergence(target, network_forward(layers, x)); }, params);
  CHECK(report.max_relative_error < 1e-6);
  CHECK(report.checked == 4 * 5 + 4 + 6 * 4 + 6);
}
