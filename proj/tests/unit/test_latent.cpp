// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <set>
#include <sstream>
#include <string>

#include "doctest.h"
#include "timbrelab/error.hpp"
#include "timbrelab/latent.hpp"
#include "timbrelab/tones.hpp"

using namespace timbrelab;
using corpus::Split;
using model::Autoencoder;
using model::ModelConfig;
using nn::Activation;

namespace {

ModelConfig tiny(int width, Activation act, bool skip) {
  ModelConfig c;
  c.bottleneck_width = width;
  c.bottleneck_activation = act;
  c.use_chroma_skip = skip;
  c.encoder_widths = {16, 8};
  return c;
}

const corpus::Corpus& small_corpus() {
  static const corpus::Corpus c = [] {
    tones::ToneOptions o;
    o.frames_per_clip = 3;
    auto clips = tones::synthetic_clips(o);
    corpus::ClipAudio quiet;
    quiet.spec = {"zz.wav", Split::kTrain, "zz_silence"};
    quiet.audio.samples.assign(8192, 0.0f);
    clips.push_back(quiet);
    return corpus::build_corpus(std::move(clips));
  }();
  return c;
}

/// Decoder that ignores the latent and emits one spectral line per chroma
/// class, placed on a bin that belongs to that class.
Autoencoder chroma_only_model(int width) {
  ModelConfig c;
  c.bottleneck_width = width;
  c.encoder_widths = {12};
  Autoencoder m(c);
  auto layers = m.mutable_layers();
  auto& hidden = layers[m.encoder_layer_count()];
  hidden.weights.setZero();
  hidden.weights.rightCols(12).setIdentity();
  auto& out = layers.back();
  out.weights.setZero();
  const auto table = chroma::bin_note_table();
  for (int cls = 0; cls < 12; ++cls) {
    for (std::size_t k = 100; k < table.size(); ++k) {
      if (table[k] >= 0 && chroma::note_pitch_class(table[k]) == cls) {
        out.weights(static_cast<Eigen::Index>(k), cls) = 1.0f;
        break;
      }
    }
  }
  return m;
}

}  // namespace

TEST_CASE("embedding of a sigmoid model stays in the open unit box") {
  const auto& c = small_corpus();
  const auto m = Autoencoder::build(tiny(3, Activation::kSigmoid, true), 2);
  const auto set = latent::embed_corpus(m, c, Split::kTrain);
  CHECK(set.dim == 3);
  CHECK(set.size() == c.indices(Split::kTrain, true).size());
  CHECK(set.size() < c.indices(Split::kTrain).size());
  CHECK(set.points.size() == set.size() * 3);
  for (float v : set.points) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }
  for (auto s : set.split) CHECK(s == Split::kTrain);
  CHECK(std::set<int>(set.note_class.begin(), set.note_class.end()) ==
        std::set<int>{0, 2, 4, 5, 7, 9, 11});

  const auto all = latent::embed_corpus(m, c);
  CHECK(all.size() == c.size() - c.silent_count());
}

TEST_CASE("lrelu embedding records its bounding box") {
  const auto m = Autoencoder::build(tiny(2, Activation::kLeakyRelu, false), 5);
  const auto set = latent::embed_corpus(m, small_corpus(), Split::kTrain);
  REQUIRE(set.lo.size() == 2);
  REQUIRE(set.hi.size() == 2);
  for (int k = 0; k < 2; ++k) CHECK(set.lo[k] <= set.hi[k]);
}

TEST_CASE("embedding rejects an incompatible model") {
  auto cfg = tiny(2, Activation::kSigmoid, true);
  cfg.use_chroma_input = false;
  CHECK_THROWS_AS(latent::embed_corpus(Autoencoder::build(cfg, 1), small_corpus()), Error);
}

TEST_CASE("embedding csv and svg") {
  const auto m = Autoencoder::build(tiny(2, Activation::kSigmoid, true), 2);
  const auto set = latent::embed_corpus(m, small_corpus(), Split::kValidation);
  std::ostringstream csv;
  latent::write_embedding_csv(set, csv);
  std::istringstream lines(csv.str());
  std::string header;
  std::getline(lines, header);
  CHECK(header == "dim_0,dim_1,note_class,split");
  std::size_t rows = 0;
  for (std::string line; std::getline(lines, line);) {
    ++rows;
    CHECK(line.substr(line.rfind(',') + 1) == "validation");
  }
  CHECK(rows == set.size());

  std::ostringstream svg;
  latent::write_embedding_svg(set, svg);
  CHECK(svg.str().find("<svg") == 0);
  std::size_t circles = 0;
  for (auto pos = svg.str().find("<circle"); pos != std::string::npos;
       pos = svg.str().find("<circle", pos + 1)) {
    ++circles;
  }
  CHECK(circles == set.size());

  const auto m3 = Autoencoder::build(tiny(3, Activation::kSigmoid, true), 2);
  const auto set3 = latent::embed_corpus(m3, small_corpus(), Split::kValidation);
  std::ostringstream csv3, svg3;
  latent::write_embedding_csv(set3, csv3);
  CHECK(csv3.str().rfind("dim_0,dim_1,dim_2,note_class,split\n", 0) == 0);
  CHECK_THROWS_AS(latent::write_embedding_svg(set3, svg3), Error);
}

TEST_CASE("mesh grid covers the inclusive unit cube") {
  CHECK(latent::mesh_size(2, 350) == 122500);
  CHECK(latent::mesh_size(3, 50) == 125000);
  CHECK(latent::mesh_size(8, 5) == 390625);
  CHECK_THROWS_AS(latent::mesh_size(2, 1), Error);
  CHECK_THROWS_AS(latent::mesh_size(64, 350), Error);

  for (auto [d, length] : {std::pair{2, 5}, std::pair{3, 4}, std::pair{1, 7}}) {
    const auto total = latent::mesh_size(d, length);
    std::set<std::vector<float>> points;
    std::vector<float> lo(d, 1.0f), hi(d, 0.0f), p(d);
    for (std::uint64_t i = 0; i < total; ++i) {
      latent::mesh_point(i, d, length, p);
      points.insert(p);
      for (int k = 0; k < d; ++k) {
        lo[k] = std::min(lo[k], p[k]);
        hi[k] = std::max(hi[k], p[k]);
      }
    }
    CHECK(points.size() == total);
    for (int k = 0; k < d; ++k) {
      CHECK(lo[k] == 0.0f);
      CHECK(hi[k] == 1.0f);
    }
  }
}

TEST_CASE("mesh sampling needs a bounded skip model") {
  latent::MeshOptions o;
  o.mesh_length = 3;
  auto kind = [&](const Autoencoder& m) {
    try {
      latent::mesh_sample(m, 0, o);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::kIo;
  };
  CHECK(kind(Autoencoder::build(tiny(2, Activation::kSigmoid, false), 1)) ==
        ErrorKind::kUnsupportedModel);
  CHECK(kind(Autoencoder::build(tiny(2, Activation::kLeakyRelu, true), 1)) ==
        ErrorKind::kUnsupportedModel);
  o.mesh_length = 1;
  CHECK(kind(Autoencoder::build(tiny(2, Activation::kSigmoid, true), 1)) ==
        ErrorKind::kInvalidArgument);
}

TEST_CASE("silent decoded output never matches") {
  const Autoencoder zero(tiny(2, Activation::kSigmoid, true));
  latent::MeshOptions o;
  o.mesh_length = 4;
  for (int c = 0; c < 12; ++c) CHECK(latent::mesh_sample(zero, c, o) == 0.0);
}

TEST_CASE("chroma-only decoder matches everywhere") {
  latent::MeshOptions o;
  o.mesh_length = 6;
  o.chunk = 7;
  for (int d : {2, 3}) {
    const auto m = chroma_only_model(d);
    for (int c = 0; c < 12; ++c) CHECK(latent::mesh_sample(m, c, o) == 1.0);
  }
}

TEST_CASE("sampling report lists only present classes") {
  const auto m = chroma_only_model(2);
  latent::MeshOptions o;
  o.mesh_length = 5;
  const std::vector<int> ceg = {0, 4, 7};
  const auto r = latent::sampling_report(m, ceg, o);
  int populated = 0;
  for (int c = 0; c < 12; ++c) {
    if (r.fractions[c]) {
      ++populated;
      CHECK(*r.fractions[c] >= 0.0);
      CHECK(*r.fractions[c] <= 1.0);
    }
  }
  CHECK(populated == 3);
  CHECK(r.samples_per_class == 25);

  std::ostringstream csv;
  r.write_csv(csv);
  CHECK(csv.str().rfind("note_class,name,present,match_fraction,samples\n0,C,1,1,25\n1,C#,0,,25\n",
                        0) == 0);
  const auto j = r.to_json();
  CHECK(j["match_fraction"]["E"] == 1.0);
  CHECK(j["match_fraction"]["F"].is_null());
  CHECK(j["mesh_length"] == 5);
}

TEST_CASE("mesh results do not depend on thread count or chunking") {
  auto m = Autoencoder::build(tiny(2, Activation::kSigmoid, true), 13);
  Xorshift64Star rng(4);
  for (auto& layer : m.mutable_layers()) {
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
      layer.bias(i) = static_cast<float>(rng.uniform(0.0, 0.2));
    }
  }
  latent::MeshOptions a{.mesh_length = 20, .threads = 1, .chunk = 1024};
  latent::MeshOptions b{.mesh_length = 20, .threads = 3, .chunk = 17};
  for (int c : {0, 5, 9}) CHECK(latent::mesh_sample(m, c, a) == latent::mesh_sample(m, c, b));
}

TEST_CASE("reconstruction accuracy of the chroma-only decoder") {
  // Encoder output is irrelevant to this decoder: every voiced frame comes back
  // as its own class.
  const auto& c = small_corpus();
  auto m = chroma_only_model(2);
  CHECK(latent::reconstruction_accuracy(m, c, Split::kTrain) == 1.0);
}
