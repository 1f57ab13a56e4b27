// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Central-difference gradient oracle. The loss is recomputed by a separate
// double-precision forward pass written with plain loops, so the check shares
// no code with the float kernel's forward or backward paths.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "timbrelab/model.hpp"
#include "timbrelab/nn.hpp"

namespace timbrelab::testing {

struct RefLayer {
  int inputs = 0;
  int outputs = 0;
  std::vector<double> weights;  // row-major outputs x inputs
  std::vector<double> bias;
  nn::Activation activation = nn::Activation::kLinear;
};

inline std::vector<RefLayer> to_reference(std::span<const nn::DenseLayer> layers) {
  std::vector<RefLayer> out;
  for (const auto& l : layers) {
    RefLayer r;
    r.inputs = static_cast<int>(l.inputs());
    r.outputs = static_cast<int>(l.outputs());
    r.activation = l.activation;
    for (int i = 0; i < r.outputs; ++i) {
      for (int j = 0; j < r.inputs; ++j) r.weights.push_back(l.weights(i, j));
      r.bias.push_back(l.bias(i));
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline double ref_activate(nn::Activation a, double z) {
  switch (a) {
    case nn::Activation::kSigmoid: return 1.0 / (1.0 + std::exp(-z));
    case nn::Activation::kRelu: return z > 0.0 ? z : 0.0;
    case nn::Activation::kLeakyRelu: return z >= 0.0 ? z : 0.1 * z;
    case nn::Activation::kLinear: return z;
  }
  return z;
}

inline std::vector<double> ref_forward(const std::vector<RefLayer>& layers,
                                       std::size_t first, std::size_t last,
                                       std::vector<double> x) {
  for (std::size_t l = first; l < last; ++l) {
    const auto& L = layers[l];
    std::vector<double> y(L.outputs);
    for (int i = 0; i < L.outputs; ++i) {
      double acc = L.bias[i];
      for (int j = 0; j < L.inputs; ++j) acc += L.weights[i * L.inputs + j] * x[j];
      y[i] = ref_activate(L.activation, acc);
    }
    x = std::move(y);
  }
  return x;
}

/// MSE + l2 * sum W^2 of a plain stack over column batches.
inline double ref_stack_loss(const std::vector<RefLayer>& layers, const nn::Matrix& inputs,
                             const nn::Matrix& targets, double l2) {
  double sum = 0.0;
  for (Eigen::Index c = 0; c < inputs.cols(); ++c) {
    std::vector<double> x(inputs.rows());
    for (Eigen::Index r = 0; r < inputs.rows(); ++r) x[r] = inputs(r, c);
    const auto y = ref_forward(layers, 0, layers.size(), x);
    for (std::size_t r = 0; r < y.size(); ++r) {
      const double d = y[r] - targets(static_cast<Eigen::Index>(r), c);
      sum += d * d;
    }
  }
  double penalty = 0.0;
  for (const auto& L : layers) {
    for (double w : L.weights) penalty += w * w;
  }
  return sum / static_cast<double>(targets.size()) + l2 * penalty;
}

/// Same loss through the autoencoder wiring: encoder, [latent | chroma] when
/// the skip is on, decoder.
inline double ref_autoencoder_loss(const std::vector<RefLayer>& layers,
                                   std::size_t encoder_layers, bool skip,
                                   const nn::Matrix& inputs, const nn::Matrix& chroma,
                                   const nn::Matrix& targets, double l2) {
  double sum = 0.0;
  for (Eigen::Index c = 0; c < inputs.cols(); ++c) {
    std::vector<double> x(inputs.rows());
    for (Eigen::Index r = 0; r < inputs.rows(); ++r) x[r] = inputs(r, c);
    auto z = ref_forward(layers, 0, encoder_layers, x);
    if (skip) {
      for (Eigen::Index r = 0; r < chroma.rows(); ++r) z.push_back(chroma(r, c));
    }
    const auto y = ref_forward(layers, encoder_layers, layers.size(), z);
    for (std::size_t r = 0; r < y.size(); ++r) {
      const double d = y[r] - targets(static_cast<Eigen::Index>(r), c);
      sum += d * d;
    }
  }
  double penalty = 0.0;
  for (const auto& L : layers) {
    for (double w : L.weights) penalty += w * w;
  }
  return sum / static_cast<double>(targets.size()) + l2 * penalty;
}

/// Relative L2 distance between analytic gradients and central differences
/// of `loss` (a callable over the reference layers), over every parameter.
template <typename LossFn>
double gradient_relative_error(std::span<const nn::DenseLayer> layers,
                               const nn::Gradients& analytic, LossFn&& loss,
                               double h = 1e-5) {
  auto ref = to_reference(layers);
  double diff2 = 0.0, norm2 = 0.0;
  auto probe = [&](double& param, double analytic_value) {
    const double saved = param;
    param = saved + h;
    const double up = loss(ref);
    param = saved - h;
    const double down = loss(ref);
    param = saved;
    const double numeric = (up - down) / (2.0 * h);
    diff2 += (analytic_value - numeric) * (analytic_value - numeric);
    norm2 += numeric * numeric;
  };
  for (std::size_t l = 0; l < ref.size(); ++l) {
    auto& L = ref[l];
    for (int i = 0; i < L.outputs; ++i) {
      for (int j = 0; j < L.inputs; ++j) {
        probe(L.weights[i * L.inputs + j], analytic[l].weights(i, j));
      }
      probe(L.bias[i], analytic[l].bias(i));
    }
  }
  return norm2 == 0.0 ? std::sqrt(diff2) : std::sqrt(diff2 / norm2);
}

}  // namespace timbrelab::testing
