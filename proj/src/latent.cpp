// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "timbrelab/latent.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "timbrelab/error.hpp"
#include "timbrelab/trainer.hpp"

namespace timbrelab::latent {
namespace {

// Distinct hues for the 12 pitch classes.
constexpr const char* kPalette[chroma::kClasses] = {
    "#e6194b", "#f58231", "#ffe119", "#bfef45", "#3cb44b", "#42d4f4",
    "#4363d8", "#911eb4", "#f032e6", "#a9a9a9", "#9a6324", "#000075"};

void require_mesh_model(const model::Autoencoder& m) {
  const auto& c = m.config();
  if (!c.use_chroma_skip) {
    throw Error(ErrorKind::kUnsupportedModel,
                "mesh sampling needs a model with the chroma skip connection");
  }
  if (c.bottleneck_activation != nn::Activation::kSigmoid) {
    throw Error(ErrorKind::kUnsupportedModel,
                "mesh sampling needs a sigmoid bottleneck (bounded latent space)");
  }
}

}  // namespace

EmbeddingSet embed_corpus(const model::Autoencoder& m, const corpus::Corpus& corpus,
                          std::optional<corpus::Split> split) {
  trainer::check_compatible(m.config(), corpus);
  std::vector<std::size_t> indices;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!corpus.silent(i) && (!split || corpus.splits[i] == *split)) indices.push_back(i);
  }
  EmbeddingSet set;
  set.dim = m.config().bottleneck_width;
  set.points.reserve(indices.size() * set.dim);
  set.lo.assign(set.dim, std::numeric_limits<float>::infinity());
  set.hi.assign(set.dim, -std::numeric_limits<float>::infinity());
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < indices.size(); start += kChunk) {
    const std::span<const std::size_t> chunk(indices.data() + start,
                                             std::min(kChunk, indices.size() - start));
    const nn::Matrix z = m.encode_batch(trainer::make_batch(m, corpus, chunk).inputs);
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      const std::size_t i = chunk[static_cast<std::size_t>(j)];
      for (int k = 0; k < set.dim; ++k) {
        const float v = z(k, j);
        set.points.push_back(v);
        set.lo[k] = std::min(set.lo[k], v);
        set.hi[k] = std::max(set.hi[k], v);
      }
      set.note_class.push_back(corpus.chroma_class[i]);
      set.split.push_back(corpus.splits[i]);
    }
  }
  if (indices.empty()) {
    set.lo.clear();
    set.hi.clear();
  }
  return set;
}

void write_embedding_csv(const EmbeddingSet& set, std::ostream& out) {
  for (int k = 0; k < set.dim; ++k) out << "dim_" << k << ',';
  out << "note_class,split\n";
  const auto old = out.precision(9);
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (float v : set.point(i)) out << v << ',';
    out << set.note_class[i] << ',' << corpus::to_string(set.split[i]) << '\n';
  }
  out.precision(old);
}

void write_embedding_svg(const EmbeddingSet& set, std::ostream& out) {
  if (set.dim != 2) {
    throw Error(ErrorKind::kInvalidArgument, "scatter plots are only drawn for 2-D embeddings");
  }
  constexpr double kSize = 600.0, kMargin = 40.0;
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  if (set.size() > 0) {
    x0 = std::min<double>(0.0, set.lo[0]);
    x1 = std::max<double>(1.0, set.hi[0]);
    y0 = std::min<double>(0.0, set.lo[1]);
    y1 = std::max<double>(1.0, set.hi[1]);
  }
  const double span = kSize - 2.0 * kMargin;
  auto sx = [&](double v) { return kMargin + (v - x0) / (x1 - x0) * span; };
  auto sy = [&](double v) { return kSize - kMargin - (v - y0) / (y1 - y0) * span; };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize + 90 << "\" height=\""
      << kSize << "\">\n";
  out << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << span
      << "\" height=\"" << span << "\" fill=\"none\" stroke=\"#888\"/>\n";
  out << "<text x=\"" << kMargin << "\" y=\"" << kSize - 12 << "\" font-size=\"12\">dim_0 ["
      << x0 << ", " << x1 << "]</text>\n";
  out << "<text x=\"12\" y=\"" << kMargin - 12 << "\" font-size=\"12\">dim_1 [" << y0 << ", "
      << y1 << "]</text>\n";
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto p = set.point(i);
    out << "<circle cx=\"" << sx(p[0]) << "\" cy=\"" << sy(p[1]) << "\" r=\"2\" fill=\""
        << kPalette[set.note_class[i]] << "\" fill-opacity=\"0.6\"/>\n";
  }
  for (int c = 0; c < static_cast<int>(chroma::kClasses); ++c) {
    const double y = kMargin + 16.0 * c;
    out << "<rect x=\"" << kSize + 10 << "\" y=\"" << y << "\" width=\"10\" height=\"10\" fill=\""
        << kPalette[c] << "\"/><text x=\"" << kSize + 26 << "\" y=\"" << y + 9
        << "\" font-size=\"11\">" << chroma::kClassNames[c] << "</text>\n";
  }
  out << "</svg>\n";
}

std::uint64_t mesh_size(int dim, int mesh_length) {
  if (mesh_length < 2) throw Error(ErrorKind::kInvalidArgument, "mesh length must be at least 2");
  std::uint64_t total = 1;
  for (int k = 0; k < dim; ++k) {
    if (total > (std::uint64_t{1} << 40) / static_cast<std::uint64_t>(mesh_length)) {
      throw Error(ErrorKind::kInvalidArgument, "mesh has too many points");
    }
    total *= static_cast<std::uint64_t>(mesh_length);
  }
  return total;
}

void mesh_point(std::uint64_t index, int dim, int mesh_length, std::span<float> out) {
  const double step = 1.0 / (mesh_length - 1);
  for (int k = 0; k < dim; ++k) {
    const auto q = index % static_cast<std::uint64_t>(mesh_length);
    out[k] = q + 1 == static_cast<std::uint64_t>(mesh_length) ? 1.0f
                                                               : static_cast<float>(q * step);
    index /= static_cast<std::uint64_t>(mesh_length);
  }
}

double mesh_sample(const model::Autoencoder& m, int note_class, const MeshOptions& options) {
  require_mesh_model(m);
  if (note_class < 0 || note_class >= static_cast<int>(chroma::kClasses)) {
    throw Error(ErrorKind::kInvalidArgument, "note class must be in 0..11");
  }
  const int d = m.config().bottleneck_width;
  const int length = options.mesh_length;
  const std::uint64_t total = mesh_size(d, length);
  const std::uint64_t chunk = std::max<std::size_t>(options.chunk, 1);
  const std::uint64_t chunks = (total + chunk - 1) / chunk;
  int threads = options.threads > 0 ? options.threads
                                    : static_cast<int>(std::thread::hardware_concurrency());
  threads = static_cast<int>(std::clamp<std::uint64_t>(threads, 1, chunks));

  std::atomic<std::uint64_t> next{0};
  std::vector<std::uint64_t> matches(static_cast<std::size_t>(threads), 0);
  auto worker = [&](int id) {
    nn::Matrix z(d, static_cast<Eigen::Index>(chunk));
    nn::Matrix onehot = nn::Matrix::Zero(model::kChromaDim, static_cast<Eigen::Index>(chunk));
    onehot.row(note_class).setOnes();
    for (std::uint64_t c = next++; c < chunks; c = next++) {
      const std::uint64_t begin = c * chunk;
      const auto n = static_cast<Eigen::Index>(std::min(chunk, total - begin));
      for (Eigen::Index j = 0; j < n; ++j) {
        mesh_point(begin + static_cast<std::uint64_t>(j), d, length, {z.col(j).data(),
                                                                      static_cast<std::size_t>(d)});
      }
      const nn::Matrix y = m.decode_batch(z.leftCols(n), onehot.leftCols(n));
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto label = chroma::classify({y.col(j).data(), static_cast<std::size_t>(y.rows())});
        if (label.class_index == note_class) ++matches[static_cast<std::size_t>(id)];
      }
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& t : pool) t.join();
  }
  std::uint64_t sum = 0;
  for (auto v : matches) sum += v;
  return static_cast<double>(sum) / static_cast<double>(total);
}

MeshReport sampling_report(const model::Autoencoder& m, std::span<const int> classes,
                           const MeshOptions& options) {
  require_mesh_model(m);
  MeshReport report;
  report.dim = m.config().bottleneck_width;
  report.mesh_length = options.mesh_length;
  report.samples_per_class = mesh_size(report.dim, options.mesh_length);
  for (int c : classes) {
    if (c < 0 || c >= static_cast<int>(chroma::kClasses)) {
      throw Error(ErrorKind::kInvalidArgument, "note class must be in 0..11");
    }
    if (!report.fractions[c]) report.fractions[c] = mesh_sample(m, c, options);
  }
  return report;
}

nlohmann::json MeshReport::to_json() const {
  nlohmann::json classes = nlohmann::json::object();
  for (std::size_t c = 0; c < chroma::kClasses; ++c) {
    classes[std::string(chroma::kClassNames[c])] =
        fractions[c] ? nlohmann::json(*fractions[c]) : nlohmann::json(nullptr);
  }
  return {{"dim", dim},
          {"mesh_length", mesh_length},
          {"samples_per_class", samples_per_class},
          {"match_fraction", classes}};
}

void MeshReport::write_csv(std::ostream& out) const {
  out << "note_class,name,present,match_fraction,samples\n";
  const auto old = out.precision(9);
  for (std::size_t c = 0; c < chroma::kClasses; ++c) {
    out << c << ',' << chroma::kClassNames[c] << ',' << (fractions[c] ? 1 : 0) << ',';
    if (fractions[c]) out << *fractions[c];
    out << ',' << samples_per_class << '\n';
  }
  out.precision(old);
}

double reconstruction_accuracy(const model::Autoencoder& m, const corpus::Corpus& corpus,
                               corpus::Split split) {
  trainer::check_compatible(m.config(), corpus);
  const auto indices = corpus.indices(split, true);
  if (indices.empty()) throw Error(ErrorKind::kEmptyCorpus, "split has no voiced frames");
  std::size_t hits = 0;
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < indices.size(); start += kChunk) {
    const std::span<const std::size_t> chunk(indices.data() + start,
                                             std::min(kChunk, indices.size() - start));
    const auto b = trainer::make_batch(m, corpus, chunk);
    const nn::Matrix y = m.reconstruct(b.inputs, b.chroma);
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      const auto label = chroma::classify({y.col(j).data(), static_cast<std::size_t>(y.rows())});
      if (label.class_index == corpus.chroma_class[chunk[static_cast<std::size_t>(j)]]) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(indices.size());
}

}  // namespace timbrelab::latent
