// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "timbrelab/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "timbrelab/error.hpp"

namespace timbrelab::model {
namespace {

using nlohmann::json;
using RowMajor = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr char kMagic[4] = {'M', 'A', 'N', 'N'};

json optional_number(const std::optional<double>& value) {
  return value ? json(*value) : json(nullptr);
}

std::optional<double> number_or_null(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

std::uint64_t blob_bytes(const nn::DenseLayer& layer) {
  return static_cast<std::uint64_t>(layer.outputs()) * (layer.inputs() + 1) * sizeof(float);
}

ModelHeader parse_header(std::istream& in, const std::filesystem::path& path) {
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) {
    throw Error(ErrorKind::kCorruptFile, path.string() + ": not a MANN model file");
  }
  ModelHeader header;
  std::uint32_t length = 0;
  if (!io::get(in, header.version) || !io::get(in, length)) {
    throw Error(ErrorKind::kCorruptFile, path.string() + ": truncated header");
  }
  if (header.version != kModelFormatVersion) {
    throw Error(ErrorKind::kUnsupportedVersion,
                path.string() + ": model format version " +
                    std::to_string(header.version) + " (supported: " +
                    std::to_string(kModelFormatVersion) + ")");
  }
  std::string text;
  if (!io::get_bytes(in, text, length)) {
    throw Error(ErrorKind::kCorruptFile, path.string() + ": truncated header JSON");
  }
  try {
    header.raw = json::parse(text);
    header.config = config_from_json(header.raw.at("config"));
    header.info = info_from_json(header.raw.at("training"));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kCorruptFile, path.string() + ": bad header: " + e.what());
  }
  return header;
}

}  // namespace

int ModelConfig::input_dim() const {
  return frame_bins + (use_chroma_input ? kChromaDim : 0) + (use_diff_input ? frame_bins : 0);
}

int ModelConfig::decoder_input_dim() const {
  return bottleneck_width + (use_chroma_skip ? kChromaDim : 0);
}

void ModelConfig::validate() const {
  if (bottleneck_width < 1 || bottleneck_width > kMaxBottleneck) {
    throw Error(ErrorKind::kConfig, "bottleneck width must be in [1, " +
                                        std::to_string(kMaxBottleneck) + "], got " +
                                        std::to_string(bottleneck_width));
  }
  if (frame_bins < 1) {
    throw Error(ErrorKind::kConfig, "frame_bins must be positive");
  }
  for (int w : encoder_widths) {
    if (w < 1) {
      throw Error(ErrorKind::kConfig,
                  "hidden widths must be positive, got " + std::to_string(w));
    }
  }
  if (bottleneck_activation != nn::Activation::kSigmoid &&
      bottleneck_activation != nn::Activation::kLeakyRelu) {
    throw Error(ErrorKind::kConfig, "bottleneck activation must be sigmoid or lrelu");
  }
}

json to_json(const ModelConfig& c) {
  return {
      {"bottleneck_width", c.bottleneck_width},
      {"bottleneck_activation", nn::to_string(c.bottleneck_activation)},
      {"use_chroma_input", c.use_chroma_input},
      {"use_chroma_skip", c.use_chroma_skip},
      {"use_diff_input", c.use_diff_input},
      {"encoder_widths", c.encoder_widths},
      {"frame_bins", c.frame_bins},
      {"input_dim", c.input_dim()},
      {"decoder_input_dim", c.decoder_input_dim()},
      {"skip_order", c.use_chroma_skip ? json::array({"bottleneck", "chroma"})
                                       : json::array({"bottleneck"})},
  };
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.bottleneck_width = j.at("bottleneck_width").get<int>();
  c.bottleneck_activation =
      nn::parse_activation(j.at("bottleneck_activation").get<std::string>());
  c.use_chroma_input = j.at("use_chroma_input").get<bool>();
  c.use_chroma_skip = j.at("use_chroma_skip").get<bool>();
  c.use_diff_input = j.value("use_diff_input", false);
  c.encoder_widths = j.at("encoder_widths").get<std::vector<int>>();
  c.frame_bins = j.value("frame_bins", 2049);
  c.validate();
  return c;
}

json to_json(const TrainingInfo& info) {
  return {
      {"epochs", info.epochs},
      {"final_train_mse", optional_number(info.final_train_mse)},
      {"final_val_mse", optional_number(info.final_val_mse)},
      {"test_mse", optional_number(info.test_mse)},
      {"corpus_hash", info.corpus_hash},
      {"checkpoint", info.checkpoint},
      {"seed", info.seed},
      {"note_classes", info.note_classes},
      {"latent_min", info.latent_min},
      {"latent_max", info.latent_max},
  };
}

TrainingInfo info_from_json(const json& j) {
  TrainingInfo info;
  info.epochs = j.value("epochs", 0);
  info.final_train_mse = number_or_null(j, "final_train_mse");
  info.final_val_mse = number_or_null(j, "final_val_mse");
  info.test_mse = number_or_null(j, "test_mse");
  info.corpus_hash = j.value("corpus_hash", "");
  info.checkpoint = j.value("checkpoint", "");
  info.seed = j.value("seed", std::uint64_t{0});
  info.note_classes = j.value("note_classes", std::vector<int>{});
  info.latent_min = j.value("latent_min", std::vector<float>{});
  info.latent_max = j.value("latent_max", std::vector<float>{});
  return info;
}

Autoencoder::Autoencoder(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  using nn::Activation;
  int width = config_.input_dim();
  for (int hidden : config_.encoder_widths) {
    layers_.emplace_back(width, hidden, Activation::kLeakyRelu);
    width = hidden;
  }
  layers_.emplace_back(width, config_.bottleneck_width, config_.bottleneck_activation);
  encoder_count_ = layers_.size();

  width = config_.decoder_input_dim();
  for (auto it = config_.encoder_widths.rbegin(); it != config_.encoder_widths.rend(); ++it) {
    layers_.emplace_back(width, *it, Activation::kLeakyRelu);
    width = *it;
  }
  layers_.emplace_back(width, config_.frame_bins, Activation::kRelu);
}

Autoencoder Autoencoder::build(const ModelConfig& config, std::uint64_t seed) {
  Autoencoder model(config);
  Xorshift64Star rng(seed);
  nn::glorot_init(model.layers_, rng);
  // A zero-bias ReLU output starts with about half its units dead for every
  // input; those bins never train. A small positive bias keeps them alive.
  model.layers_.back().bias.setConstant(kOutputBiasInit);
  model.info_.seed = seed;
  return model;
}

std::span<const nn::DenseLayer> Autoencoder::encoder() const {
  return std::span<const nn::DenseLayer>(layers_).first(encoder_count_);
}

std::span<const nn::DenseLayer> Autoencoder::decoder() const {
  return std::span<const nn::DenseLayer>(layers_).subspan(encoder_count_);
}

std::string Autoencoder::layer_name(std::size_t index) const {
  if (index + 1 == encoder_count_) return "bottleneck";
  if (index < encoder_count_) return "encoder." + std::to_string(index);
  if (index + 1 == layers_.size()) return "output";
  return "decoder." + std::to_string(index - encoder_count_);
}

void Autoencoder::fill_input(std::span<float> column, std::span<const float> frame,
                             const chroma::ChromaVector& chroma,
                             std::span<const float> previous) const {
  const auto bins = static_cast<std::size_t>(config_.frame_bins);
  if (frame.size() != bins || column.size() != static_cast<std::size_t>(config_.input_dim())) {
    throw Error(ErrorKind::kShape, "frame has " + std::to_string(frame.size()) +
                                       " bins, model expects " + std::to_string(bins));
  }
  if (!previous.empty() && previous.size() != bins) {
    throw Error(ErrorKind::kShape, "previous frame length mismatch");
  }
  std::copy(frame.begin(), frame.end(), column.begin());
  std::size_t offset = bins;
  if (config_.use_chroma_input) {
    std::copy(chroma.onehot.begin(), chroma.onehot.end(), column.begin() + offset);
    offset += chroma.onehot.size();
  }
  if (config_.use_diff_input) {
    for (std::size_t k = 0; k < bins; ++k) {
      const float diff = previous.empty() ? 0.0f : frame[k] - previous[k];
      column[offset + k] = std::clamp(diff, -1.0f, 1.0f);
    }
  }
}

nn::Vector Autoencoder::encode(std::span<const float> frame,
                               const chroma::ChromaVector& chroma,
                               std::span<const float> previous) const {
  nn::Matrix input(config_.input_dim(), 1);
  fill_input({input.data(), static_cast<std::size_t>(input.size())}, frame, chroma, previous);
  return encode_batch(input).col(0);
}

nn::Vector Autoencoder::decode(std::span<const float> latent,
                               const chroma::ChromaVector& chroma) const {
  if (latent.size() != static_cast<std::size_t>(config_.bottleneck_width)) {
    throw Error(ErrorKind::kShape, "latent has " + std::to_string(latent.size()) +
                                       " values, model bottleneck is " +
                                       std::to_string(config_.bottleneck_width));
  }
  nn::Matrix z(config_.bottleneck_width, 1);
  for (std::size_t i = 0; i < latent.size(); ++i) {
    float v = latent[i];
    if (config_.bottleneck_activation == nn::Activation::kSigmoid) {
      v = std::clamp(v, 0.0f, 1.0f);
    }
    z(static_cast<Eigen::Index>(i), 0) = v;
  }
  nn::Matrix c(kChromaDim, 1);
  std::copy(chroma.onehot.begin(), chroma.onehot.end(), c.data());
  return decode_batch(z, c).col(0);
}

nn::Matrix Autoencoder::encode_batch(const nn::Matrix& inputs) const {
  return nn::forward(encoder(), inputs);
}

nn::Matrix Autoencoder::decoder_input(const nn::Matrix& latents,
                                      const nn::Matrix& chroma) const {
  if (latents.rows() != config_.bottleneck_width) {
    throw Error(ErrorKind::kShape, "latent batch has " + std::to_string(latents.rows()) +
                                       " rows, expected " +
                                       std::to_string(config_.bottleneck_width));
  }
  if (!config_.use_chroma_skip) return latents;
  if (chroma.rows() != kChromaDim || chroma.cols() != latents.cols()) {
    throw Error(ErrorKind::kShape, "chroma batch must be 12 x batch");
  }
  nn::Matrix joined(config_.decoder_input_dim(), latents.cols());
  joined.topRows(config_.bottleneck_width) = latents;
  joined.bottomRows(kChromaDim) = chroma;
  return joined;
}

nn::Matrix Autoencoder::decode_batch(const nn::Matrix& latents,
                                     const nn::Matrix& chroma) const {
  return nn::forward(decoder(), decoder_input(latents, chroma));
}

nn::Matrix Autoencoder::reconstruct(const nn::Matrix& inputs,
                                    const nn::Matrix& chroma) const {
  return decode_batch(encode_batch(inputs), chroma);
}

double Autoencoder::gradients(const nn::Matrix& inputs, const nn::Matrix& chroma,
                              const nn::Matrix& targets, float l2_lambda,
                              nn::Gradients& grads) const {
  if (grads.size() != layers_.size()) {
    throw Error(ErrorKind::kShape, "gradient buffer does not match the model");
  }
  nn::ForwardCache enc_cache;
  const nn::Matrix latents = nn::forward(encoder(), inputs, &enc_cache);
  nn::ForwardCache dec_cache;
  const nn::Matrix output = nn::forward(decoder(), decoder_input(latents, chroma), &dec_cache);
  const double value = nn::mse(output, targets);

  std::span<nn::LayerGradient> all(grads);
  const nn::Matrix dec_input_grad = nn::backward(
      decoder(), dec_cache, nn::mse_gradient(output, targets), all.subspan(encoder_count_));
  // Only the bottleneck rows of the decoder input feed back into the encoder.
  const nn::Matrix latent_grad = dec_input_grad.topRows(config_.bottleneck_width);
  nn::backward(encoder(), enc_cache, latent_grad, all.first(encoder_count_));
  nn::add_l2_gradient(layers_, l2_lambda, all);
  return value;
}

void save_model(const Autoencoder& model, const std::filesystem::path& path) {
  json layers = json::array();
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    const auto& layer = model.layers()[l];
    layers.push_back({{"name", model.layer_name(l)},
                      {"inputs", layer.inputs()},
                      {"outputs", layer.outputs()},
                      {"activation", nn::to_string(layer.activation)}});
  }
  const json header = {{"config", to_json(model.config())},
                       {"training", to_json(model.info())},
                       {"layers", layers}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out.write(kMagic, 4);
  io::put<std::uint16_t>(out, kModelFormatVersion);
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& layer : model.layers()) {
    io::put<std::uint64_t>(out, blob_bytes(layer));
    const RowMajor w = layer.weights;
    io::put_array<float>(out, {w.data(), static_cast<std::size_t>(w.size())});
    io::put_array<float>(out, {layer.bias.data(), static_cast<std::size_t>(layer.bias.size())});
  }
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

ModelHeader read_model_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return parse_header(in, path);
}

Autoencoder load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  const ModelHeader header = parse_header(in, path);

  Autoencoder model(header.config);
  model.info() = header.info;
  const auto& declared = header.raw.value("layers", json::array());
  if (declared.size() != model.layers().size()) {
    throw Error(ErrorKind::kCorruptFile,
                path.string() + ": header lists " + std::to_string(declared.size()) +
                    " layers, config implies " + std::to_string(model.layers().size()));
  }

  auto layers = model.mutable_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& layer = layers[l];
    const std::string name = model.layer_name(l);
    const auto& entry = declared[l];
    if (entry.value("inputs", -1) != layer.inputs() ||
        entry.value("outputs", -1) != layer.outputs()) {
      throw Error(ErrorKind::kCorruptFile, path.string() + ": layer '" + name +
                                               "' shape disagrees with the config");
    }
    std::uint64_t bytes = 0;
    if (!io::get(in, bytes)) {
      throw Error(ErrorKind::kCorruptFile,
                  path.string() + ": missing blob for layer '" + name + "'");
    }
    if (bytes != blob_bytes(layer)) {
      throw Error(ErrorKind::kCorruptFile,
                  path.string() + ": layer '" + name + "' blob is " + std::to_string(bytes) +
                      " bytes, expected " + std::to_string(blob_bytes(layer)));
    }
    RowMajor w(layer.outputs(), layer.inputs());
    if (!io::get_array<float>(in, {w.data(), static_cast<std::size_t>(w.size())}) ||
        !io::get_array<float>(in, {layer.bias.data(),
                                   static_cast<std::size_t>(layer.bias.size())})) {
      throw Error(ErrorKind::kCorruptFile,
                  path.string() + ": layer '" + name + "' blob is truncated");
    }
    layer.weights = w;
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
      throw Error(ErrorKind::kCorruptFile,
                  path.string() + ": layer '" + name + "' holds non-finite values");
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorKind::kCorruptFile, path.string() + ": trailing bytes after last layer");
  }
  return model;
}

}  // namespace timbrelab::model
