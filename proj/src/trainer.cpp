// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "timbrelab/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "timbrelab/error.hpp"

namespace timbrelab::trainer {
namespace {

constexpr std::size_t kEvalChunk = 256;

using corpus::Split;

template <typename Fn>
void for_chunks(std::span<const std::size_t> indices, std::size_t chunk, Fn&& fn) {
  for (std::size_t start = 0; start < indices.size(); start += chunk) {
    fn(indices.subspan(start, std::min(chunk, indices.size() - start)));
  }
}

void finish_info(model::Autoencoder& m, const corpus::Corpus& corpus, const TrainConfig& config,
                 const std::string& hash, const std::string& checkpoint, int epochs,
                 const EpochStats& stats, bool skip_silent) {
  auto& info = m.info();
  info.epochs = epochs;
  info.final_train_mse = stats.train_mse;
  info.final_val_mse = stats.val_mse;
  info.corpus_hash = hash;
  info.checkpoint = checkpoint;
  info.seed = config.seed;
  info.note_classes = corpus.classes(Split::kTrain);
  info.test_mse.reset();
  if (!corpus.indices(Split::kTest, skip_silent).empty()) {
    info.test_mse = evaluate_mse(m, corpus, Split::kTest, skip_silent);
  }
  latent_bounds(m, corpus, Split::kTrain, info.latent_min, info.latent_max);
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(ErrorKind::kConfig, "epochs must be at least 1");
  if (!(learning_rate >= 0.0f) || !std::isfinite(learning_rate)) {
    throw Error(ErrorKind::kConfig, "learning rate must be finite and non-negative");
  }
  if (!(l2_lambda >= 0.0f)) throw Error(ErrorKind::kConfig, "l2 must be non-negative");
  if (batch_size < 1) throw Error(ErrorKind::kConfig, "batch size must be at least 1");
}

void TrainHistory::write_csv(std::ostream& out) const {
  out << "epoch,train_mse,val_mse,seconds\n";
  const auto old = out.precision(9);
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.train_mse << ',' << e.val_mse << ',' << e.seconds << '\n';
  }
  out.precision(old);
}

void check_compatible(const model::ModelConfig& config, const corpus::Corpus& corpus) {
  if (static_cast<std::size_t>(config.frame_bins) != corpus.bins) {
    throw Error(ErrorKind::kConfig, "model reconstructs " + std::to_string(config.frame_bins) +
                                        " bins, corpus frames have " +
                                        std::to_string(corpus.bins));
  }
  const bool want_chroma = corpus.augmentation == corpus::Augmentation::kChroma;
  const bool want_diff = corpus.augmentation == corpus::Augmentation::kFirstOrderDiff;
  if (config.use_chroma_input != want_chroma || config.use_diff_input != want_diff) {
    throw Error(ErrorKind::kConfig,
                "model input layout does not match corpus augmentation '" +
                    std::string(corpus::to_string(corpus.augmentation)) + "'");
  }
}

Batch make_batch(const model::Autoencoder& m, const corpus::Corpus& corpus,
                 std::span<const std::size_t> indices) {
  const auto n = static_cast<Eigen::Index>(indices.size());
  Batch b;
  b.inputs.resize(m.config().input_dim(), n);
  b.chroma.setZero(model::kChromaDim, n);
  b.targets.resize(m.config().frame_bins, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const std::size_t i = indices[static_cast<std::size_t>(j)];
    const auto frame = corpus.frame(i);
    const auto chroma = corpus.chroma(i);
    m.fill_input({b.inputs.col(j).data(), static_cast<std::size_t>(b.inputs.rows())}, frame,
                 chroma, corpus.previous(i));
    std::copy(chroma.onehot.begin(), chroma.onehot.end(), b.chroma.col(j).data());
    std::copy(frame.begin(), frame.end(), b.targets.col(j).data());
  }
  return b;
}

double evaluate_mse(const model::Autoencoder& m, const corpus::Corpus& corpus, Split split,
                    bool skip_silent) {
  const auto indices = corpus.indices(split, skip_silent);
  if (indices.empty()) {
    throw Error(ErrorKind::kEmptyCorpus,
                "split '" + std::string(corpus::to_string(split)) + "' has no frames");
  }
  double sum = 0.0;
  for_chunks(indices, kEvalChunk, [&](std::span<const std::size_t> chunk) {
    const Batch b = make_batch(m, corpus, chunk);
    sum += nn::mse(m.reconstruct(b.inputs, b.chroma), b.targets) *
           static_cast<double>(chunk.size());
  });
  return sum / static_cast<double>(indices.size());
}

double total_loss(const model::Autoencoder& m, const corpus::Corpus& corpus, Split split,
                  float l2_lambda, bool skip_silent) {
  return evaluate_mse(m, corpus, split, skip_silent) + nn::l2_penalty(m.layers(), l2_lambda);
}

void latent_bounds(const model::Autoencoder& m, const corpus::Corpus& corpus, Split split,
                   std::vector<float>& lo, std::vector<float>& hi) {
  const int d = m.config().bottleneck_width;
  lo.assign(d, std::numeric_limits<float>::infinity());
  hi.assign(d, -std::numeric_limits<float>::infinity());
  const auto indices = corpus.indices(split, true);
  for_chunks(indices, kEvalChunk, [&](std::span<const std::size_t> chunk) {
    const nn::Matrix z = m.encode_batch(make_batch(m, corpus, chunk).inputs);
    for (int k = 0; k < d; ++k) {
      lo[k] = std::min(lo[k], z.row(k).minCoeff());
      hi[k] = std::max(hi[k], z.row(k).maxCoeff());
    }
  });
  if (indices.empty()) {
    lo.clear();
    hi.clear();
  }
}

TrainResult train(model::Autoencoder m, const corpus::Corpus& corpus, const TrainConfig& config) {
  config.validate();
  check_compatible(m.config(), corpus);
  const bool skip_silent = config.drop_silent || corpus.drop_silent;
  std::vector<std::size_t> order = corpus.indices(Split::kTrain, skip_silent);
  if (order.empty()) throw Error(ErrorKind::kEmptyCorpus, "train split has no frames");
  if (corpus.indices(Split::kValidation, skip_silent).empty()) {
    throw Error(ErrorKind::kEmptyCorpus, "validation split has no frames");
  }

  const std::string hash = corpus::corpus_hash(corpus);
  Xorshift64Star rng(config.seed);
  nn::AdamState adam = nn::AdamState::for_layers(m.layers(), {.learning_rate = config.learning_rate});
  nn::Gradients grads = nn::zero_gradients(m.layers());
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);

  TrainResult result{m, m, 0, {}};
  double best_val = std::numeric_limits<double>::infinity();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    rng.shuffle(std::span<std::size_t>(order));
    double sum = 0.0;
    for_chunks(order, batch, [&](std::span<const std::size_t> chunk) {
      const Batch b = make_batch(m, corpus, chunk);
      for (auto& g : grads) {
        g.weights.setZero();
        g.bias.setZero();
      }
      const double loss = m.gradients(b.inputs, b.chroma, b.targets, config.l2_lambda, grads);
      if (!std::isfinite(loss)) {
        throw Error(ErrorKind::kDivergence,
                    "training diverged (non-finite loss) in epoch " + std::to_string(epoch));
      }
      nn::adam_step(m.mutable_layers(), grads, adam);
      sum += loss * static_cast<double>(chunk.size());
    });
    for (const auto& layer : m.layers()) {
      if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
        throw Error(ErrorKind::kDivergence,
                    "training diverged (non-finite parameters) in epoch " + std::to_string(epoch));
      }
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_mse = sum / static_cast<double>(order.size());
    stats.val_mse = evaluate_mse(m, corpus, Split::kValidation, skip_silent);
    if (!std::isfinite(stats.val_mse)) {
      throw Error(ErrorKind::kDivergence, "validation loss is non-finite in epoch " +
                                              std::to_string(epoch));
    }
    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.epochs.push_back(stats);
    if (stats.val_mse < best_val) {
      best_val = stats.val_mse;
      result.best = m;
      result.best_epoch = epoch;
    }
    if (config.on_epoch) config.on_epoch(stats);
  }

  result.model = std::move(m);
  finish_info(result.model, corpus, config, hash, "final", config.epochs,
              result.history.epochs.back(), skip_silent);
  finish_info(result.best, corpus, config, hash, "best", result.best_epoch,
              result.history.epochs[result.best_epoch - 1], skip_silent);
  result.history.test_mse = result.model.info().test_mse;
  return result;
}

}  // namespace timbrelab::trainer
