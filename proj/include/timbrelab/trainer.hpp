// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Mini-batch ADAM training of an autoencoder on a corpus, with per-epoch
// validation and CSV history export.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "timbrelab/corpus.hpp"
#include "timbrelab/model.hpp"

namespace timbrelab::trainer {

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_mse = 0.0;
  double val_mse = 0.0;
  double seconds = 0.0;
};

struct TrainConfig {
  int epochs = 300;
  /// Zero is accepted (no-op updates), negative is not.
  float learning_rate = 5e-4f;
  float l2_lambda = 1e-7f;
  int batch_size = 64;
  std::uint64_t seed = 0;
  /// Skip frames without note energy; also honored when the corpus asks for it.
  bool drop_silent = false;
  std::function<void(const EpochStats&)> on_epoch;

  void validate() const;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  std::optional<double> test_mse;

  /// epoch,train_mse,val_mse,seconds
  void write_csv(std::ostream& out) const;
};

struct TrainResult {
  model::Autoencoder model;
  model::Autoencoder best;  // lowest validation MSE
  int best_epoch = 0;
  TrainHistory history;
};

/// Column batch for one set of frames.
struct Batch {
  nn::Matrix inputs;   // input_dim x n
  nn::Matrix chroma;   // 12 x n
  nn::Matrix targets;  // frame_bins x n
};

/// Throws kConfig when the model's input layout does not match the corpus
/// augmentation mode or frame length.
void check_compatible(const model::ModelConfig& config, const corpus::Corpus& corpus);

Batch make_batch(const model::Autoencoder& model, const corpus::Corpus& corpus,
                 std::span<const std::size_t> indices);

TrainResult train(model::Autoencoder model, const corpus::Corpus& corpus,
                  const TrainConfig& config);

/// Mean squared reconstruction error over a split, L2 term excluded.
/// Throws kEmptyCorpus when the split has no frames.
double evaluate_mse(const model::Autoencoder& model, const corpus::Corpus& corpus,
                    corpus::Split split, bool skip_silent = false);

/// evaluate_mse plus l2 * sum of squared weights.
double total_loss(const model::Autoencoder& model, const corpus::Corpus& corpus,
                  corpus::Split split, float l2_lambda, bool skip_silent = false);

/// Per-dimension min/max of the encoder output over a split's non-silent frames.
void latent_bounds(const model::Autoencoder& model, const corpus::Corpus& corpus,
                   corpus::Split split, std::vector<float>& lo, std::vector<float>& hi);

}  // namespace timbrelab::trainer
