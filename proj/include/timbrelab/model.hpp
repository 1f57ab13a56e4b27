// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Chroma-conditioned dense autoencoder: topology, encode/decode, training
// gradients through the bottleneck skip connection, and the MANN file codec.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "timbrelab/chroma.hpp"
#include "timbrelab/nn.hpp"

namespace timbrelab::model {

inline constexpr int kChromaDim = static_cast<int>(chroma::kClasses);
inline constexpr int kMaxBottleneck = 64;
inline constexpr float kOutputBiasInit = 0.01f;

struct ModelConfig {
  int bottleneck_width = 2;
  nn::Activation bottleneck_activation = nn::Activation::kSigmoid;
  bool use_chroma_input = true;
  bool use_chroma_skip = true;
  /// Legacy baseline: append the clipped first-order frame difference.
  bool use_diff_input = false;
  std::vector<int> encoder_widths = {512, 256, 128, 64};
  /// Reconstructed frame length; 2049 for every corpus-trained model.
  int frame_bins = 2049;

  int input_dim() const;
  /// Bottleneck width plus 12 when the skip connection is on.
  int decoder_input_dim() const;
  /// Throws kConfig on non-positive or oversized widths.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

/// Provenance recorded by the trainer and stored alongside the weights.
struct TrainingInfo {
  int epochs = 0;
  std::optional<double> final_train_mse;
  std::optional<double> final_val_mse;
  std::optional<double> test_mse;
  std::string corpus_hash;
  std::string checkpoint;  // "final" or "best"
  std::uint64_t seed = 0;
  /// Pitch classes present in the training split.
  std::vector<int> note_classes;
  /// Training-embedding bounding box, one entry per latent dimension.
  std::vector<float> latent_min;
  std::vector<float> latent_max;
};

nlohmann::json to_json(const TrainingInfo& info);
TrainingInfo info_from_json(const nlohmann::json& j);

class Autoencoder {
 public:
  /// All parameters zero.
  explicit Autoencoder(ModelConfig config);

  /// Glorot-uniform weights from `seed`; zero biases except the output
  /// layer, which starts at kOutputBiasInit.
  static Autoencoder build(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  TrainingInfo& info() { return info_; }
  const TrainingInfo& info() const { return info_; }

  /// Encoder layers followed by decoder layers.
  std::span<const nn::DenseLayer> layers() const { return layers_; }
  std::span<nn::DenseLayer> mutable_layers() { return layers_; }
  std::span<const nn::DenseLayer> encoder() const;
  std::span<const nn::DenseLayer> decoder() const;
  std::size_t encoder_layer_count() const { return encoder_count_; }
  std::string layer_name(std::size_t index) const;

  /// Writes [frame | chroma? | clipped diff?] into one input column.
  /// `previous` is the preceding frame of the same clip (empty for the first).
  void fill_input(std::span<float> column, std::span<const float> frame,
                  const chroma::ChromaVector& chroma,
                  std::span<const float> previous = {}) const;

  nn::Vector encode(std::span<const float> frame, const chroma::ChromaVector& chroma,
                    std::span<const float> previous = {}) const;

  /// Synthesis-path decode: sigmoid-model latents are clamped to [0,1];
  /// chroma is used only when the model has the skip connection.
  nn::Vector decode(std::span<const float> latent,
                    const chroma::ChromaVector& chroma) const;

  /// Batch variants on assembled inputs; latents are not clamped. `chroma`
  /// is 12 x batch and ignored without the skip connection.
  nn::Matrix encode_batch(const nn::Matrix& inputs) const;
  nn::Matrix decode_batch(const nn::Matrix& latents, const nn::Matrix& chroma) const;
  nn::Matrix reconstruct(const nn::Matrix& inputs, const nn::Matrix& chroma) const;

  /// Accumulates d(MSE + l2 * sum ||W||^2)/d(params) into `grads` (encoder
  /// layers first) and returns the MSE term.
  double gradients(const nn::Matrix& inputs, const nn::Matrix& chroma,
                   const nn::Matrix& targets, float l2_lambda,
                   nn::Gradients& grads) const;

 private:
  nn::Matrix decoder_input(const nn::Matrix& latents, const nn::Matrix& chroma) const;

  ModelConfig config_;
  TrainingInfo info_;
  std::vector<nn::DenseLayer> layers_;
  std::size_t encoder_count_ = 0;
};

struct ModelHeader {
  std::uint16_t version = 0;
  ModelConfig config;
  TrainingInfo info;
  nlohmann::json raw;
};

inline constexpr std::uint16_t kModelFormatVersion = 1;

void save_model(const Autoencoder& model, const std::filesystem::path& path);
Autoencoder load_model(const std::filesystem::path& path);
/// Reads only the magic, version and JSON header; weight blobs are skipped.
ModelHeader read_model_header(const std::filesystem::path& path);

}  // namespace timbrelab::model
