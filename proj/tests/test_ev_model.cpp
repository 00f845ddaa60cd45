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
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "ev/ev_model.hpp"
#include "test_util.hpp"
#include "toy_model.hpp"

using namespace ev;
using namespace ev::testing;

namespace {

void check_close(const Vector& actual, const double* expected, double tol) {
  for (Eigen::Index i = 0; i < actual.size(); ++i) {
    CHECK(std::abs(actual[i] - expected[i]) < tol);
  }
}

// Random toy model whose attention is safely away from the clamp boundary so
// the loss is smooth around the current parameters.
struct ToyCase {
  EvModelParams params;
  BowVector p;
  BowVector p_bg;
};

ToyCase random_case(std::mt19937_64& rng) {
  for (;;) {
    auto arch = random_toy_arch(rng);
    arch.embedding_dim = std::max(arch.embedding_dim, 2);
    auto params = EvModelParams::initialize(arch, rng);
    inflate(params.f_layers, 2.0);
    inflate(params.g_layers, 2.0);
    inflate(params.h_layers, 2.0);
    auto dim = static_cast<std::size_t>(arch.vocab_dim);
    BowVector p = random_bow(dim, 0.5, rng);
    BowVector p_bg = random_bow(dim, 0.9, rng);
    const auto trace = forward(params, p, p_bg);
    const double raw = trace.attention.raw;
    const double floor = arch.attention_floor;
    if (std::abs(raw - floor) > 1e-3 && std::abs(raw - (1.0 - floor)) > 1e-3) {
      return {std::move(params), std::move(p), std::move(p_bg)};
    }
  }
}

GradCheckReport check_ev_gradients(ToyCase& c, double background_weight) {
  const auto trace = forward(c.params, c.p, c.p_bg);
  const auto grads = ev_backward(c.params, trace, c.p, c.p_bg, background_weight);
  auto refs = c.params.params();
  auto checked = gradcheck_params(refs, grads.layers);
  return finite_difference_check(
      [&] { return ev_loss(forward(c.params, c.p, c.p_bg), c.p, c.p_bg, background_weight); },
      checked);
}

double max_abs_diff(std::span<const DenseLayer> a, std::span<const DenseLayer> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, (a[i].weight - b[i].weight).cwiseAbs().maxCoeff());
    m = std::max(m, (a[i].bias - b[i].bias).cwiseAbs().maxCoeff());
  }
  return m;
}

bool identical(const EvModelParams& a, const EvModelParams& b) {
  auto same = [](const std::vector<DenseLayer>& x, const std::vector<DenseLayer>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i].weight != y[i].weight || x[i].bias != y[i].bias ||
          x[i].activation != y[i].activation) {
        return false;
      }
    }
    return true;
  };
  return a.arch == b.arch && same(a.f_layers, b.f_layers) && same(a.g_layers, b.g_layers) &&
         same(a.h_layers, b.h_layers);
}

std::vector<BowVector> small_corpus(std::size_t dim, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<BowVector> corpus;
  for (std::size_t i = 0; i < n; ++i) corpus.push_back(random_bow(dim, 0.4, rng));
  return corpus;
}

EvArchitecture small_arch(int vocab) {
  EvArchitecture arch;
  arch.vocab_dim = vocab;
  arch.embedding_dim = 3;
  arch.f_hidden = {6};
  arch.g_hidden = {6};
  arch.h_hidden = {6};
  return arch;
}

}  // namespace

TEST_CASE("toy 4-word model matches the hand computation") {
  auto params = toy_ev();
  params.validate();
  const auto p = toy_p(), bg = toy_bg();
  const auto trace = forward(params, p, bg);
  namespace x = toy_expected;
  check_close(trace.v_paragraph, x::v_paragraph, 1e-12);
  check_close(trace.v_background, x::v_background, 1e-12);
  check_close(trace.mixed_code, x::mixed, 1e-12);
  check_close(trace.p_reconstructed, x::p_rec, 1e-12);
  check_close(trace.p_bg_reconstructed, x::p_bg_rec, 1e-12);
  CHECK(std::abs(trace.attention.cosine - x::cosine) < 1e-12);
  CHECK(std::abs(trace.alpha - x::alpha) < 1e-12);
  CHECK(!trace.attention.clamped);

  const auto terms = ev_loss_terms(trace, p, bg);
  CHECK(std::abs(terms.paragraph - x::kl_paragraph) < 1e-12);
  CHECK(std::abs(terms.background - x::kl_background) < 1e-12);
  CHECK(ev_loss(trace, p, bg) == terms.paragraph + terms.background);
  CHECK(ev_loss(trace, p, bg, 0.0) == terms.paragraph);

  // Exact mixing identity and encoders agree with the trace.
  CHECK(trace.mixed_code == trace.alpha * trace.v_paragraph + (1.0 - trace.alpha) * trace.v_background);
  CHECK(encode_paragraph(params, p) == trace.v_paragraph);
  CHECK(encode_background(params, bg) == trace.v_background);
}

TEST_CASE("zero-initialized model encodes to the zero vector") {
  QuietLog quiet;
  auto arch = small_arch(5);
  auto params = EvModelParams::zeros(arch);
  std::mt19937_64 rng(1);
  auto p = random_bow(5, 0.5, rng);
  CHECK(encode_paragraph(params, p) == Vector::Zero(3));
  const auto trace = forward(params, p, p);
  CHECK(trace.attention.degenerate);
  CHECK(trace.alpha == arch.attention_floor);
  CHECK(trace.p_reconstructed.isApprox(Vector::Constant(5, 0.2), 1e-15));
}

TEST_CASE("attention special cases") {
  QuietLog quiet;
  Vector a(3), b(3);
  a << 0.3, -0.2, 0.5;
  SUBCASE("identical codes clamp to the floor") {
    auto r = attention_detail(a, a, 0.05);
    CHECK(r.raw == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(r.alpha == 0.05);
    CHECK(r.clamped);
  }
  SUBCASE("antipodal codes clamp to one minus the floor") {
    auto r = attention_detail(a, -a, 0.05);
    CHECK(r.raw == doctest::Approx(1.0));
    CHECK(r.alpha == 0.95);
  }
  SUBCASE("orthogonal codes give one half") {
    Vector u(2), v(2);
    u << 1.0, 0.0;
    v << 0.0, 2.0;
    CHECK(attention(u, v, 0.05) == 0.5);
  }
  SUBCASE("zero norm falls back to the floor") {
    auto r = attention_detail(Vector::Zero(3), a, 0.1);
    CHECK(r.degenerate);
    CHECK(r.alpha == 0.1);
  }
}

TEST_CASE("attention property: bounded and scale invariant") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto dim = static_cast<Eigen::Index>(1 + rng() % 6);
    Vector a = random_vector(dim, rng), b = random_vector(dim, rng);
    const double alpha = attention(a, b, 0.05);
    REQUIRE(alpha >= 0.05);
    REQUIRE(alpha <= 0.95);
    const double c = scale(rng);
    REQUIRE(std::abs(attention(c * a, b, 0.05) - alpha) < 1e-12);
    REQUIRE(std::abs(attention(a, c * b, 0.05) - alpha) < 1e-12);
  }
}

TEST_CASE("forward property: reconstructions and embeddings stay in range") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    auto arch = random_toy_arch(rng);
    auto params = EvModelParams::initialize(arch, rng);
    const auto dim = static_cast<std::size_t>(arch.vocab_dim);
    auto p = random_bow(dim, 0.5, rng), bg = random_bow(dim, 0.9, rng);
    const auto t = forward(params, p, bg);
    REQUIRE(std::abs(t.p_reconstructed.sum() - 1.0) < 1e-9);
    REQUIRE(std::abs(t.p_bg_reconstructed.sum() - 1.0) < 1e-9);
    REQUIRE((t.p_reconstructed.array() > 0.0).all());
    REQUIRE((t.p_bg_reconstructed.array() > 0.0).all());
    REQUIRE(t.alpha >= arch.attention_floor);
    REQUIRE(t.alpha <= 1.0 - arch.attention_floor);
    REQUIRE((t.v_paragraph.array().abs() < 1.0).all());
    REQUIRE(ev_loss(t, p, bg) >= 0.0);
  }
}

TEST_CASE("identical codes make both reconstructions nearly equal") {
  QuietLog quiet;
  auto params = toy_ev();
  params.g_layers = params.f_layers;  // same encoder, same input
  const auto p = toy_bg();
  const auto t = forward(params, p, p);
  CHECK(t.alpha == params.arch.attention_floor);
  CHECK((t.mixed_code - t.v_background).norm() < 1e-15);
  CHECK((t.p_reconstructed - t.p_bg_reconstructed).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("ev_backward matches finite differences on random toy models") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    auto c = random_case(rng);
    const auto report = check_ev_gradients(c, 1.0);
    INFO("trial " << trial << " worst " << report.worst_parameter);
    CHECK(report.max_relative_error < 1e-6);
  }
}

TEST_CASE("ev_backward on the toy model matches finite differences") {
  ToyCase c{toy_ev(), toy_p(), toy_bg()};
  CHECK(check_ev_gradients(c, 1.0).max_relative_error < 1e-7);
  CHECK(check_ev_gradients(c, 0.3).max_relative_error < 1e-7);
}

TEST_CASE("the background term contributes to the g gradient") {
  std::mt19937_64 rng(5);
  auto c = random_case(rng);
  const auto trace = forward(c.params, c.p, c.p_bg);
  const auto with = ev_backward(c.params, trace, c.p, c.p_bg, 1.0);
  const auto without = ev_backward(c.params, trace, c.p, c.p_bg, 0.0);
  double diff = 0.0;
  for (std::size_t i = 0; i < with.g().size(); ++i) {
    diff = std::max(diff, (with.g()[i].weight - without.g()[i].weight).cwiseAbs().maxCoeff());
  }
  CHECK(diff > 1e-6);
  // The ablated gradient is itself correct for the ablated loss.
  CHECK(check_ev_gradients(c, 0.0).max_relative_error < 1e-6);
  // f never sees the background term.
  for (std::size_t i = 0; i < with.f().size(); ++i) {
    CHECK(with.f()[i].weight == without.f()[i].weight);
  }
}

TEST_CASE("perfect reconstruction on a two-word toy is stationary") {
  EvArchitecture arch;
  arch.vocab_dim = 2;
  arch.embedding_dim = 2;
  arch.f_hidden = {};
  arch.g_hidden = {3};
  arch.h_hidden = {};
  std::mt19937_64 rng(3);
  auto params = EvModelParams::initialize(arch, rng);
  // h ignores its input and emits P exactly: zero weights, logit biases.
  params.h_layers[0].weight.setZero();
  params.h_layers[0].bias << std::log(0.25), std::log(0.75);
  BowVector p({{0, 0.25}, {1, 0.75}}, 2);
  const auto trace = forward(params, p, p);
  CHECK((trace.p_reconstructed - to_dense(p)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(ev_loss(trace, p, p) < 1e-15);
  const auto grads = ev_backward(params, trace, p, p);
  for (const auto& g : grads.layers) {
    CHECK(g.weight.cwiseAbs().maxCoeff() < 1e-15);
    CHECK(g.bias.cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("train_ev with zero epochs returns the initialization") {
  const auto arch = small_arch(8);
  const auto corpus = small_corpus(8, 12, 9);
  std::mt19937_64 rng(10);
  const auto bg = random_bow(8, 1.0, rng);
  TrainingConfig config;
  config.epochs = 0;
  config.seed = 42;
  const auto result = train_ev(corpus, bg, arch, config);
  CHECK(result.history.empty());
  CHECK(identical(result.params, EvModelParams::initialize(arch, std::uint64_t{42})));
}

TEST_CASE("train_ev is deterministic and independent of the thread count") {
  const auto arch = small_arch(8);
  const auto corpus = small_corpus(8, 40, 9);
  std::mt19937_64 rng(10);
  const auto bg = random_bow(8, 1.0, rng);
  TrainingConfig config;
  config.epochs = 5;
  config.batch_size = 8;
  config.seed = 7;
  config.adam.learning_rate = 1e-2;
  std::vector<double> losses;
  const auto a = train_ev(corpus, bg, arch, config,
                          [&](const EpochStats& s) { losses.push_back(s.mean_loss); });
  const auto b = train_ev(corpus, bg, arch, config);
  CHECK(identical(a.params, b.params));
  config.threads = 4;
  const auto c = train_ev(corpus, bg, arch, config);
  CHECK(identical(a.params, c.params));
  REQUIRE(a.history.size() == 5);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].epoch == static_cast<int>(i) + 1);
    CHECK(a.history[i].mean_loss == losses[i]);
    CHECK(a.history[i].mean_loss == c.history[i].mean_loss);
    CHECK(a.history[i].mean_loss ==
          doctest::Approx(a.history[i].kl_paragraph + a.history[i].kl_background));
  }
  CHECK(a.history.back().mean_loss < a.history.front().mean_loss);
  config.seed = 8;
  CHECK(!identical(a.params, train_ev(corpus, bg, arch, config).params));
}

TEST_CASE("train_ev continues from a given initialization") {
  const auto arch = small_arch(6);
  const auto corpus = small_corpus(6, 10, 2);
  std::mt19937_64 rng(4);
  const auto bg = random_bow(6, 1.0, rng);
  TrainingConfig config;
  config.epochs = 2;
  config.seed = 1;
  const auto first = train_ev(corpus, bg, arch, config);
  const auto resumed = train_ev(corpus, bg, arch, config, {}, &first.params);
  CHECK(max_abs_diff(resumed.params.h_layers, first.params.h_layers) > 0.0);
  auto other = small_arch(6);
  other.embedding_dim = 2;
  CHECK_THROWS(train_ev(corpus, bg, other, config, {}, &first.params));
  CHECK_THROWS(train_ev(std::span<const BowVector>{}, bg, arch, config));
}

TEST_CASE("train_ev reports divergence with the last good parameters") {
  QuietLog quiet;
  const auto arch = small_arch(6);
  const auto corpus = small_corpus(6, 10, 2);
  std::mt19937_64 rng(4);
  const auto bg = random_bow(6, 1.0, rng);
  TrainingConfig config;
  config.epochs = 3;
  config.seed = 1;
  config.adam.learning_rate = 1e300;
  try {
    train_ev(corpus, bg, arch, config);
    FAIL("expected divergence");
  } catch (const TrainingDiverged<EvModelParams>& e) {
    e.last_good().validate();
    for (const auto& s : e.history()) CHECK(std::isfinite(s.mean_loss));
  }
}

TEST_CASE("model files round trip bit-exactly") {
  std::mt19937_64 rng(99);
  auto params = EvModelParams::initialize(random_toy_arch(rng), rng);
  params.arch.attention_floor = 0.1 / 3.0;
  const auto path = std::filesystem::temp_directory_path() / "ev_test_model.evm";
  save_model(path, params);
  const auto loaded = load_ev_model(path);
  CHECK(identical(params, loaded));

  std::ifstream in(path, std::ios::binary);
  std::string first;
  std::getline(in, first);
  CHECK(first == "EVMODEL 1");

  // Truncated payloads and foreign versions are rejected.
  std::ifstream whole(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(whole)), std::istreambuf_iterator<char>());
  const auto broken = std::filesystem::temp_directory_path() / "ev_test_model_broken.evm";
  std::ofstream(broken, std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  CHECK_THROWS(load_ev_model(broken));
  std::ofstream(broken, std::ios::binary) << "EVMODEL 2" << bytes.substr(9);
  CHECK_THROWS(load_ev_model(broken));
}

TEST_CASE("architecture validation") {
  auto arch = small_arch(4);
  arch.attention_floor = 0.5;
  CHECK_THROWS(arch.validate());
  arch = small_arch(4);
  arch.h_hidden = {0};
  CHECK_THROWS(arch.validate());
  auto params = toy_ev();
  params.h_layers.back().activation = Activation::kTanh;
  CHECK_THROWS(params.validate());
  BowVector wrong({{0, 1.0}}, 5);
  CHECK_THROWS(forward(toy_ev(), wrong, toy_bg()));
}
