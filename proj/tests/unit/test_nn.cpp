// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>

#include "doctest.h"
#include "support/gradient_oracle.hpp"
#include "timbrelab/error.hpp"
#include "timbrelab/nn.hpp"

using namespace timbrelab;
using namespace timbrelab::nn;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Xorshift64Star& rng,
                     double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<float>(rng.uniform(lo, hi));
  }
  return m;
}

std::vector<DenseLayer> random_stack(const std::vector<int>& widths,
                                     const std::vector<Activation>& acts,
                                     Xorshift64Star& rng) {
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    layers.emplace_back(widths[l], widths[l + 1], acts[l]);
  }
  glorot_init(layers, rng);
  for (auto& layer : layers) layer.bias = random_matrix(layer.outputs(), 1, rng, -0.1, 0.1);
  return layers;
}

}  // namespace

TEST_CASE("activation functions") {
  CHECK(activate(Activation::kSigmoid, 0.0f) == 0.5f);
  CHECK(activate(Activation::kLeakyRelu, -2.0f) == doctest::Approx(-0.2f));
  CHECK(activate(Activation::kLeakyRelu, 3.0f) == 3.0f);
  CHECK(activate(Activation::kRelu, -3.0f) == 0.0f);
  CHECK(activate(Activation::kRelu, 2.5f) == 2.5f);
  CHECK(activate(Activation::kLinear, -7.0f) == -7.0f);
  // Stable branch: no overflow to NaN for large negative inputs.
  CHECK(activate(Activation::kSigmoid, -200.0f) == 0.0f);
  CHECK(activate(Activation::kSigmoid, 200.0f) == 1.0f);
  CHECK(activation_slope(Activation::kLeakyRelu, 0.0f, 0.0f) == 1.0f);
  CHECK(activation_slope(Activation::kLeakyRelu, -1.0f, -0.1f) == kLeakySlope);

  for (auto a : {Activation::kSigmoid, Activation::kRelu, Activation::kLeakyRelu,
                 Activation::kLinear}) {
    CHECK(parse_activation(to_string(a)) == a);
  }
  CHECK_THROWS_AS(parse_activation("tanh"), Error);
}

TEST_CASE("forward examples") {
  std::vector<DenseLayer> zero{DenseLayer(3, 4, Activation::kSigmoid)};
  Matrix x = Matrix::Random(3, 2);
  const Matrix y = forward(zero, x);
  CHECK((y.array() == 0.5f).all());

  std::vector<DenseLayer> identity{DenseLayer(3, 3, Activation::kLinear)};
  identity[0].weights.setIdentity();
  CHECK(forward(identity, x) == x);

  std::vector<DenseLayer> relu{DenseLayer(2, 1, Activation::kRelu)};
  relu[0].weights << 1.0f, 1.0f;
  Matrix neg(2, 1);
  neg << -1.0f, -2.0f;
  CHECK(forward(relu, neg)(0, 0) == 0.0f);

  Matrix wrong(5, 1);
  try {
    forward(relu, wrong);
    FAIL("expected shape error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kShape);
  }
}

TEST_CASE("zero-error output leaves only the penalty gradient") {
  Xorshift64Star rng(2);
  auto layers = random_stack({4, 3, 2}, {Activation::kLeakyRelu, Activation::kLinear}, rng);
  const Matrix x = random_matrix(4, 5, rng);
  const Matrix target = forward(layers, x);
  auto grads = zero_gradients(layers);
  const float l2 = 1e-3f;
  const double value = loss_gradients(layers, x, target, {l2}, grads);
  CHECK(value == 0.0);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    CHECK(grads[l].weights.isApprox(2.0f * l2 * layers[l].weights));
    CHECK(grads[l].bias.isZero());
  }
}

TEST_CASE("1 -> 1 linear layer closed form") {
  for (float w : {-1.5f, 0.25f, 3.0f}) {
    std::vector<DenseLayer> layers{DenseLayer(1, 1, Activation::kLinear)};
    layers[0].weights(0, 0) = w;
    Matrix x(1, 1), t(1, 1);
    x << 1.0f;
    t << 0.0f;
    const float l2 = 0.01f;
    auto grads = zero_gradients(layers);
    loss_gradients(layers, x, t, {l2}, grads);
    CHECK(grads[0].weights(0, 0) == doctest::Approx(2.0f * w + 2.0f * l2 * w));
    CHECK(grads[0].bias(0) == doctest::Approx(2.0f * w));
  }
}

TEST_CASE("random 5-layer stacks match central differences") {
  Xorshift64Star rng(17);
  const std::vector<Activation> pool{Activation::kSigmoid, Activation::kRelu,
                                     Activation::kLeakyRelu, Activation::kLinear};
  for (int trial = 0; trial < 8; ++trial) {
    std::vector<int> widths;
    for (int i = 0; i < 6; ++i) widths.push_back(2 + static_cast<int>(rng.below(15)));
    std::vector<Activation> acts;
    for (int i = 0; i < 5; ++i) acts.push_back(pool[rng.below(pool.size())]);
    auto layers = random_stack(widths, acts, rng);
    const Matrix x = random_matrix(widths.front(), 3, rng);
    const Matrix t = random_matrix(widths.back(), 3, rng, 0.0, 1.0);
    const float l2 = 1e-3f;
    auto grads = zero_gradients(layers);
    loss_gradients(layers, x, t, {l2}, grads);
    const double err = testing::gradient_relative_error(
        layers, grads, [&](const std::vector<testing::RefLayer>& ref) {
          return testing::ref_stack_loss(ref, x, t, l2);
        });
    CHECK(err < 1e-4);
  }
}

TEST_CASE("adam first step moves each parameter by about lr") {
  Xorshift64Star rng(5);
  std::vector<DenseLayer> layers{DenseLayer(3, 2, Activation::kLinear)};
  glorot_init(layers, rng);
  const std::vector<DenseLayer> before = layers;
  Gradients grads = zero_gradients(layers);
  grads[0].weights << 0.5f, -2.0f, 1e-3f, 10.0f, -0.1f, 4.0f;
  grads[0].bias << 0.0f, -3.0f;
  auto state = AdamState::for_layers(layers, {.learning_rate = 1e-3f});
  adam_step(layers, grads, state);
  CHECK(state.step == 1);
  // At t = 1, m_hat = g and v_hat = g^2, so the step is lr * g / (|g| + eps).
  for (Eigen::Index i = 0; i < grads[0].weights.size(); ++i) {
    const float g = grads[0].weights.data()[i];
    const float expected = -1e-3f * g / (std::abs(g) + 1e-8f);
    const float moved = layers[0].weights.data()[i] - before[0].weights.data()[i];
    CHECK(moved == doctest::Approx(expected).epsilon(1e-3));
  }
  CHECK(layers[0].bias(0) == before[0].bias(0));
  CHECK(layers[0].bias(1) - before[0].bias(1) == doctest::Approx(1e-3f).epsilon(1e-3));
}

TEST_CASE("adam with zero gradient and fresh state is a no-op") {
  Xorshift64Star rng(6);
  std::vector<DenseLayer> layers{DenseLayer(4, 3, Activation::kLinear)};
  glorot_init(layers, rng);
  const auto before = layers;
  auto state = AdamState::for_layers(layers, {});
  adam_step(layers, zero_gradients(layers), state);
  CHECK(layers[0].weights == before[0].weights);
  CHECK(layers[0].bias == before[0].bias);
}

TEST_CASE("resuming adam from a saved state is bit-identical") {
  Xorshift64Star rng(8);
  auto layers = random_stack({5, 4, 3}, {Activation::kLeakyRelu, Activation::kSigmoid}, rng);
  const Matrix x = random_matrix(5, 6, rng);
  const Matrix t = random_matrix(3, 6, rng, 0.0, 1.0);
  auto state = AdamState::for_layers(layers, {});

  auto step = [&](std::vector<DenseLayer>& net, AdamState& s) {
    auto g = zero_gradients(net);
    loss_gradients(net, x, t, {}, g);
    adam_step(net, g, s);
  };
  step(layers, state);
  auto saved_layers = layers;
  auto saved_state = state;
  step(layers, state);
  step(layers, state);
  step(saved_layers, saved_state);
  step(saved_layers, saved_state);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    CHECK(layers[l].weights == saved_layers[l].weights);
    CHECK(layers[l].bias == saved_layers[l].bias);
  }
  CHECK(state.step == saved_state.step);
}

TEST_CASE("full-batch least squares decreases every step at small lr") {
  Xorshift64Star rng(12);
  std::vector<DenseLayer> layers{DenseLayer(6, 3, Activation::kLinear)};
  glorot_init(layers, rng);
  const Matrix x = random_matrix(6, 40, rng);
  const Matrix true_w = random_matrix(3, 6, rng);
  const Matrix t = true_w * x;
  auto state = AdamState::for_layers(layers, {.learning_rate = 1e-3f});
  double previous = mse(forward(layers, x), t);
  for (int step = 0; step < 200; ++step) {
    auto g = zero_gradients(layers);
    loss_gradients(layers, x, t, {0.0f}, g);
    adam_step(layers, g, state);
    const double now = mse(forward(layers, x), t);
    REQUIRE(now < previous);
    previous = now;
  }
}

TEST_CASE("glorot init is seeded and bounded") {
  std::vector<DenseLayer> a{DenseLayer(10, 6, Activation::kLinear)};
  std::vector<DenseLayer> b{DenseLayer(10, 6, Activation::kLinear)};
  Xorshift64Star r1(99), r2(99);
  glorot_init(a, r1);
  glorot_init(b, r2);
  CHECK(a[0].weights == b[0].weights);
  const float limit = std::sqrt(6.0f / 16.0f);
  CHECK(a[0].weights.cwiseAbs().maxCoeff() <= limit);
  CHECK(a[0].bias.isZero());
}
