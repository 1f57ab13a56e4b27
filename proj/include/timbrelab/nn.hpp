// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Dense feed-forward kernel: y = f(W x + b) per layer, MSE + L2 loss,
// backpropagation and ADAM. Batches are column-major matrices with one
// example per column.

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "timbrelab/rng.hpp"

namespace timbrelab::nn {

using Matrix = Eigen::MatrixXf;
using Vector = Eigen::VectorXf;

enum class Activation { kSigmoid, kRelu, kLeakyRelu, kLinear };

inline constexpr float kLeakySlope = 0.1f;

std::string_view to_string(Activation activation);
/// Accepts "sigmoid", "relu", "lrelu", "linear".
Activation parse_activation(std::string_view name);

float activate(Activation activation, float x);

/// df/dz evaluated from the pre-activation `z` and output `y`. LReLU uses
/// slope 1 at exactly 0; ReLU uses 0 there.
float activation_slope(Activation activation, float z, float y);

struct DenseLayer {
  Matrix weights;  // outputs x inputs
  Vector bias;     // outputs
  Activation activation = Activation::kLinear;

  DenseLayer() = default;
  DenseLayer(Eigen::Index inputs, Eigen::Index outputs, Activation act)
      : weights(Matrix::Zero(outputs, inputs)),
        bias(Vector::Zero(outputs)),
        activation(act) {}

  Eigen::Index inputs() const { return weights.cols(); }
  Eigen::Index outputs() const { return weights.rows(); }
};

/// Per-layer inputs and pre-activations of one forward pass.
struct ForwardCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre;
  Matrix output;
};

struct LayerGradient {
  Matrix weights;
  Vector bias;
};

using Gradients = std::vector<LayerGradient>;

Gradients zero_gradients(std::span<const DenseLayer> layers);

/// Throws kShape when consecutive layer widths or the input height disagree.
void check_shapes(std::span<const DenseLayer> layers, Eigen::Index input_rows);

/// Batch forward pass. Fills `cache` when given.
Matrix forward(std::span<const DenseLayer> layers, const Matrix& input,
               ForwardCache* cache = nullptr);

/// Backpropagates dL/d(output) through the cached pass. Gradients are
/// accumulated into `grads`; returns dL/d(input).
Matrix backward(std::span<const DenseLayer> layers, const ForwardCache& cache,
                const Matrix& output_grad, std::span<LayerGradient> grads);

struct LossConfig {
  float l2_lambda = 1e-7f;
};

/// Mean of squared errors over all elements (64-bit accumulation).
double mse(const Matrix& output, const Matrix& target);

/// dMSE/d(output).
Matrix mse_gradient(const Matrix& output, const Matrix& target);

/// lambda * sum of squared weights (biases excluded).
double l2_penalty(std::span<const DenseLayer> layers, float lambda);

/// grads.weights += 2 lambda W.
void add_l2_gradient(std::span<const DenseLayer> layers, float lambda,
                     std::span<LayerGradient> grads);

/// Exact gradients of MSE(forward(input), target) + L2 for one plain stack.
/// Returns the MSE term.
double loss_gradients(std::span<const DenseLayer> layers, const Matrix& input,
                      const Matrix& target, const LossConfig& loss, Gradients& grads);

struct AdamConfig {
  float learning_rate = 5e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
};

struct AdamState {
  AdamConfig config;
  Gradients first_moment;
  Gradients second_moment;
  std::int64_t step = 0;

  static AdamState for_layers(std::span<const DenseLayer> layers, AdamConfig config);
};

/// One bias-corrected ADAM update; increments `state.step`.
void adam_step(std::span<DenseLayer> layers, std::span<const LayerGradient> grads,
               AdamState& state);

/// Glorot-uniform weights (+-sqrt(6 / (in + out))), zero biases.
void glorot_init(std::span<DenseLayer> layers, Xorshift64Star& rng);

}  // namespace timbrelab::nn
