// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Latent-space characterization: corpus embeddings and exhaustive mesh
// sampling of the decoder with chroma-match scoring.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "json.hpp"
#include "timbrelab/corpus.hpp"
#include "timbrelab/model.hpp"

namespace timbrelab::latent {

struct EmbeddingSet {
  int dim = 0;
  std::vector<float> points;  // size() x dim, row-major
  std::vector<int> note_class;
  std::vector<corpus::Split> split;
  std::vector<float> lo;  // bounding box per dimension
  std::vector<float> hi;

  std::size_t size() const { return note_class.size(); }
  std::span<const float> point(std::size_t i) const {
    return {points.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
};

/// Encodes every non-silent frame of `split` (all splits when empty).
EmbeddingSet embed_corpus(const model::Autoencoder& model, const corpus::Corpus& corpus,
                          std::optional<corpus::Split> split = std::nullopt);

/// dim_0..dim_{d-1},note_class,split
void write_embedding_csv(const EmbeddingSet& set, std::ostream& out);
/// Scatter plot colored by note class; only for d = 2 (kInvalidArgument otherwise).
void write_embedding_svg(const EmbeddingSet& set, std::ostream& out);

/// Coordinates of grid point `index` on the inclusive [0,1]^d mesh; the
/// first dimension varies fastest.
void mesh_point(std::uint64_t index, int dim, int mesh_length, std::span<float> out);

std::uint64_t mesh_size(int dim, int mesh_length);

struct MeshOptions {
  int mesh_length = 350;
  /// 0 picks std::thread::hardware_concurrency().
  int threads = 0;
  std::size_t chunk = 1024;
};

/// Fraction of mesh points whose decoded frame classifies to `note_class`
/// when decoded with that class's one-hot chroma. Silent output never matches.
/// Throws kUnsupportedModel unless the model has a sigmoid bottleneck and the
/// chroma skip connection.
double mesh_sample(const model::Autoencoder& model, int note_class, const MeshOptions& options);

struct MeshReport {
  int dim = 0;
  int mesh_length = 0;
  std::uint64_t samples_per_class = 0;
  /// Empty for classes absent from the training material.
  std::array<std::optional<double>, chroma::kClasses> fractions;

  nlohmann::json to_json() const;
  /// note_class,name,present,match_fraction,samples
  void write_csv(std::ostream& out) const;
};

MeshReport sampling_report(const model::Autoencoder& model, std::span<const int> classes,
                           const MeshOptions& options);

/// Fraction of non-silent frames in `split` whose reconstruction (with the
/// frame's own chroma) classifies back to the frame's class.
double reconstruction_accuracy(const model::Autoencoder& model, const corpus::Corpus& corpus,
                               corpus::Split split);

}  // namespace timbrelab::latent
