// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "timbrelab/nn.hpp"

#include <cmath>
#include <string>

#include "timbrelab/error.hpp"

namespace timbrelab::nn {
namespace {

void apply_activation(Activation activation, const Matrix& pre, Matrix& out) {
  out.resize(pre.rows(), pre.cols());
  const float* z = pre.data();
  float* y = out.data();
  const Eigen::Index n = pre.size();
  switch (activation) {
    case Activation::kLinear:
      out = pre;
      break;
    case Activation::kRelu:
      for (Eigen::Index i = 0; i < n; ++i) y[i] = z[i] < 0.0f ? 0.0f : z[i];
      break;
    case Activation::kLeakyRelu:
      for (Eigen::Index i = 0; i < n; ++i) y[i] = z[i] >= 0.0f ? z[i] : kLeakySlope * z[i];
      break;
    case Activation::kSigmoid:
      for (Eigen::Index i = 0; i < n; ++i) y[i] = activate(Activation::kSigmoid, z[i]);
      break;
  }
}

}  // namespace

std::string_view to_string(Activation activation) {
  switch (activation) {
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kRelu: return "relu";
    case Activation::kLeakyRelu: return "lrelu";
    case Activation::kLinear: return "linear";
  }
  return "linear";
}

Activation parse_activation(std::string_view name) {
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "relu") return Activation::kRelu;
  if (name == "lrelu") return Activation::kLeakyRelu;
  if (name == "linear") return Activation::kLinear;
  throw Error(ErrorKind::kConfig, "unknown activation '" + std::string(name) + "'");
}

float activate(Activation activation, float x) {
  switch (activation) {
    case Activation::kSigmoid:
      // Branch keeps exp() from overflowing for large |x|.
      if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
      {
        const float e = std::exp(x);
        return e / (1.0f + e);
      }
    case Activation::kRelu:
      // Written so NaN propagates instead of being clipped to zero.
      return x < 0.0f ? 0.0f : x;
    case Activation::kLeakyRelu:
      return x >= 0.0f ? x : kLeakySlope * x;
    case Activation::kLinear:
      return x;
  }
  return x;
}

float activation_slope(Activation activation, float z, float y) {
  switch (activation) {
    case Activation::kSigmoid: return y * (1.0f - y);
    case Activation::kRelu: return z > 0.0f ? 1.0f : 0.0f;
    case Activation::kLeakyRelu: return z >= 0.0f ? 1.0f : kLeakySlope;
    case Activation::kLinear: return 1.0f;
  }
  return 1.0f;
}

Gradients zero_gradients(std::span<const DenseLayer> layers) {
  Gradients grads;
  grads.reserve(layers.size());
  for (const auto& layer : layers) {
    grads.push_back({Matrix::Zero(layer.outputs(), layer.inputs()),
                     Vector::Zero(layer.outputs())});
  }
  return grads;
}

void check_shapes(std::span<const DenseLayer> layers, Eigen::Index input_rows) {
  Eigen::Index expected = input_rows;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.inputs() != expected || layer.bias.size() != layer.outputs()) {
      throw Error(ErrorKind::kShape,
                  "layer " + std::to_string(l) + " expects " +
                      std::to_string(layer.inputs()) + " inputs, got " +
                      std::to_string(expected));
    }
    expected = layer.outputs();
  }
}

Matrix forward(std::span<const DenseLayer> layers, const Matrix& input,
               ForwardCache* cache) {
  check_shapes(layers, input.rows());
  if (cache) {
    cache->inputs.resize(layers.size());
    cache->pre.resize(layers.size());
  }
  Matrix current = input;
  Matrix pre;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    pre.noalias() = layer.weights * current;
    pre.colwise() += layer.bias;
    Matrix next;
    apply_activation(layer.activation, pre, next);
    if (cache) {
      cache->inputs[l] = std::move(current);
      cache->pre[l] = pre;
    }
    current = std::move(next);
  }
  if (cache) cache->output = current;
  return current;
}

Matrix backward(std::span<const DenseLayer> layers, const ForwardCache& cache,
                const Matrix& output_grad, std::span<LayerGradient> grads) {
  Matrix upstream = output_grad;
  Matrix delta;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& layer = layers[l];
    const Matrix& pre = cache.pre[l];
    const Matrix& post = (l + 1 < layers.size()) ? cache.inputs[l + 1] : cache.output;
    delta.resize(pre.rows(), pre.cols());
    for (Eigen::Index i = 0; i < pre.size(); ++i) {
      delta.data()[i] = upstream.data()[i] *
                        activation_slope(layer.activation, pre.data()[i], post.data()[i]);
    }
    grads[l].weights.noalias() += delta * cache.inputs[l].transpose();
    grads[l].bias += delta.rowwise().sum();
    upstream.noalias() = layer.weights.transpose() * delta;
  }
  return upstream;
}

double mse(const Matrix& output, const Matrix& target) {
  if (output.rows() != target.rows() || output.cols() != target.cols()) {
    throw Error(ErrorKind::kShape, "output and target shapes differ");
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < output.size(); ++i) {
    const double d = static_cast<double>(output.data()[i]) - target.data()[i];
    sum += d * d;
  }
  return output.size() == 0 ? 0.0 : sum / static_cast<double>(output.size());
}

Matrix mse_gradient(const Matrix& output, const Matrix& target) {
  const float scale = 2.0f / static_cast<float>(output.size());
  return scale * (output - target);
}

double l2_penalty(std::span<const DenseLayer> layers, float lambda) {
  double sum = 0.0;
  for (const auto& layer : layers) {
    sum += layer.weights.cast<double>().squaredNorm();
  }
  return lambda * sum;
}

void add_l2_gradient(std::span<const DenseLayer> layers, float lambda,
                     std::span<LayerGradient> grads) {
  if (lambda == 0.0f) return;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    grads[l].weights += (2.0f * lambda) * layers[l].weights;
  }
}

double loss_gradients(std::span<const DenseLayer> layers, const Matrix& input,
                      const Matrix& target, const LossConfig& loss, Gradients& grads) {
  ForwardCache cache;
  const Matrix output = forward(layers, input, &cache);
  const double value = mse(output, target);
  backward(layers, cache, mse_gradient(output, target), grads);
  add_l2_gradient(layers, loss.l2_lambda, grads);
  return value;
}

AdamState AdamState::for_layers(std::span<const DenseLayer> layers, AdamConfig config) {
  AdamState state;
  state.config = config;
  state.first_moment = zero_gradients(layers);
  state.second_moment = zero_gradients(layers);
  return state;
}

void adam_step(std::span<DenseLayer> layers, std::span<const LayerGradient> grads,
               AdamState& state) {
  if (grads.size() != layers.size() || state.first_moment.size() != layers.size()) {
    throw Error(ErrorKind::kShape, "optimizer state does not match the network");
  }
  const auto& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const auto correct1 = static_cast<float>(1.0 - std::pow(double{c.beta1}, t));
  const auto correct2 = static_cast<float>(1.0 - std::pow(double{c.beta2}, t));

  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = c.beta1 * m + (1.0f - c.beta1) * grad;
    v = c.beta2 * v + (1.0f - c.beta2) * grad.cwiseAbs2();
    param.array() -= c.learning_rate * (m.array() / correct1) /
                     ((v.array() / correct2).sqrt() + c.epsilon);
  };

  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weights, grads[l].weights, state.first_moment[l].weights,
           state.second_moment[l].weights);
    update(layers[l].bias, grads[l].bias, state.first_moment[l].bias,
           state.second_moment[l].bias);
  }
}

void glorot_init(std::span<DenseLayer> layers, Xorshift64Star& rng) {
  for (auto& layer : layers) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.inputs() + layer.outputs()));
    // Row-major fill order so the draw sequence does not depend on storage.
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        layer.weights(r, c) = static_cast<float>(rng.uniform(-limit, limit));
      }
    }
    layer.bias.setZero();
  }
}

}  // namespace timbrelab::nn
