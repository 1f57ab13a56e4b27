// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "timbrelab/chroma.hpp"
#include "timbrelab/corpus.hpp"
#include "timbrelab/error.hpp"
#include "timbrelab/latent.hpp"
#include "timbrelab/model.hpp"
#include "timbrelab/synth.hpp"
#include "timbrelab/tones.hpp"
#include "timbrelab/trainer.hpp"
#include "timbrelab/wav.hpp"

namespace py = pybind11;
using namespace timbrelab;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_python(const py::handle& obj) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

std::span<const float> as_span(const FloatArray& a) {
  return {a.data(), static_cast<std::size_t>(a.size())};
}

FloatArray to_array(std::span<const float> v) {
  FloatArray out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

FloatArray to_array(const nn::Vector& v) {
  return to_array(std::span<const float>(v.data(), static_cast<std::size_t>(v.size())));
}

chroma::ChromaVector chroma_of(std::optional<int> cls) {
  return cls ? chroma::ChromaVector::of_class(*cls) : chroma::ChromaVector::silence();
}

std::optional<corpus::Split> split_of(const std::string& name) {
  if (name == "all") return std::nullopt;
  return corpus::parse_split(name);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "TimbreLab native core";

  static py::exception<Error> error_type(m, "TimbreLabError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      // args = (kind, message)
      PyErr_SetObject(error_type.ptr(), py::make_tuple(std::string(to_string(e.kind())), e.what()).ptr());
    }
  });

  m.attr("SAMPLE_RATE") = dsp::kSampleRate;
  m.attr("FFT_SIZE") = dsp::kFftSize;
  m.attr("HOP") = dsp::kHop;
  m.attr("BINS") = dsp::kBins;

  // dsp / chroma / wav
  m.def("stft_magnitudes", [](const FloatArray& samples) {
    dsp::AudioBuffer audio;
    audio.samples.assign(samples.data(), samples.data() + samples.size());
    const auto spec = dsp::stft(audio);
    py::array_t<double> out({static_cast<py::ssize_t>(spec.frames), static_cast<py::ssize_t>(spec.bins)});
    std::copy(spec.magnitudes.begin(), spec.magnitudes.end(), out.mutable_data());
    return out;
  }, py::arg("samples"), "Magnitude STFT (frames x 2049), Hann 4096 / hop 1024.");
  m.def("classify", [](const FloatArray& frame) { return chroma::classify(as_span(frame)).class_index; },
        py::arg("frame"), "Dominant pitch class (0 = C) of a 2049-bin frame, None if silent.");
  m.def("read_wav", [](const std::filesystem::path& p) { return to_array(wav::read(p).samples); });
  m.def("write_wav", [](const std::filesystem::path& p, const FloatArray& samples) {
    dsp::AudioBuffer audio;
    audio.samples.assign(samples.data(), samples.data() + samples.size());
    wav::write(p, audio);
  });
  m.def("write_demo_clips", [](const std::filesystem::path& dir, std::size_t frames_per_clip, std::uint64_t seed) {
    tones::ToneOptions o;
    o.frames_per_clip = frames_per_clip;
    o.seed = seed;
    return tones::write_demo_clips(dir, o);
  }, py::arg("dir"), py::arg("frames_per_clip") = 36, py::arg("seed") = 1);

  // corpus
  py::class_<corpus::Corpus>(m, "Corpus")
      .def_static("build", [](const std::filesystem::path& manifest, const std::string& augment,
                              bool drop_silent, std::uint64_t seed) {
        corpus::BuildOptions o;
        o.augmentation = corpus::parse_augmentation(augment);
        o.drop_silent = drop_silent;
        o.seed = seed;
        return corpus::build_corpus(corpus::read_manifest(manifest), o);
      }, py::arg("manifest"), py::arg("augment") = "chroma", py::arg("drop_silent") = false, py::arg("seed") = 0)
      .def_static("load", [](const std::filesystem::path& p) { return corpus::load_corpus(p); })
      .def("save", [](const corpus::Corpus& c, const std::filesystem::path& p) { corpus::save_corpus(c, p); })
      .def("__len__", &corpus::Corpus::size)
      .def_property_readonly("frames", [](const corpus::Corpus& c) {
        py::array_t<float> out({static_cast<py::ssize_t>(c.size()), static_cast<py::ssize_t>(c.bins)});
        std::copy(c.frames.begin(), c.frames.end(), out.mutable_data());
        return out;
      })
      .def_property_readonly("chroma_class", [](const corpus::Corpus& c) {
        py::array_t<std::int8_t> out(static_cast<py::ssize_t>(c.size()));
        std::copy(c.chroma_class.begin(), c.chroma_class.end(), out.mutable_data());
        return out;
      })
      .def("indices", [](const corpus::Corpus& c, const std::string& split, bool skip_silent) {
        return c.indices(corpus::parse_split(split), skip_silent);
      }, py::arg("split"), py::arg("skip_silent") = false)
      .def_property_readonly("metadata", [](const corpus::Corpus& c) { return to_python(corpus::metadata(c)); })
      .def_property_readonly("hash", [](const corpus::Corpus& c) { return corpus::corpus_hash(c); });

  // model
  py::class_<model::Autoencoder>(m, "Autoencoder")
      .def_static("build", [](const py::dict& config, std::uint64_t seed) {
        auto j = model::to_json(model::ModelConfig{});
        j.update(from_python(config));
        return model::Autoencoder::build(model::config_from_json(j), seed);
      }, py::arg("config") = py::dict(), py::arg("seed") = 0,
         "Glorot-initialized model; `config` keys as in model_config().")
      .def_static("load", [](const std::filesystem::path& p) { return model::load_model(p); })
      .def("save", [](const model::Autoencoder& a, const std::filesystem::path& p) { model::save_model(a, p); })
      .def_property_readonly("config", [](const model::Autoencoder& a) { return to_python(model::to_json(a.config())); })
      .def_property_readonly("info", [](const model::Autoencoder& a) { return to_python(model::to_json(a.info())); })
      .def("encode", [](const model::Autoencoder& a, const FloatArray& frame, std::optional<int> cls) {
        return to_array(a.encode(as_span(frame), chroma_of(cls)));
      }, py::arg("frame"), py::arg("chroma_class") = py::none())
      .def("decode", [](const model::Autoencoder& a, const FloatArray& latent, std::optional<int> cls) {
        return to_array(a.decode(as_span(latent), chroma_of(cls)));
      }, py::arg("latent"), py::arg("chroma_class") = py::none());

  m.def("model_config", [] { return to_python(model::to_json(model::ModelConfig{})); },
        "Default configuration as a dict.");

  // training
  m.def("train", [](const model::Autoencoder& start, const corpus::Corpus& c, int epochs, float lr,
                    float l2, int batch, std::uint64_t seed, bool drop_silent) {
    trainer::TrainConfig tc;
    tc.epochs = epochs;
    tc.learning_rate = lr;
    tc.l2_lambda = l2;
    tc.batch_size = batch;
    tc.seed = seed;
    tc.drop_silent = drop_silent;
    trainer::TrainResult r = [&] {
      py::gil_scoped_release release;
      return trainer::train(start, c, tc);
    }();
    py::list history;
    for (const auto& e : r.history.epochs) {
      history.append(py::dict(py::arg("epoch") = e.epoch, py::arg("train_mse") = e.train_mse,
                              py::arg("val_mse") = e.val_mse, py::arg("seconds") = e.seconds));
    }
    return py::make_tuple(std::move(r.model), std::move(r.best), history);
  }, py::arg("model"), py::arg("corpus"), py::arg("epochs") = 300, py::arg("lr") = 5e-4f,
     py::arg("l2") = 1e-7f, py::arg("batch") = 64, py::arg("seed") = 0, py::arg("drop_silent") = false,
     "Returns (final_model, best_model, history).");
  m.def("evaluate_mse", [](const model::Autoencoder& a, const corpus::Corpus& c, const std::string& split) {
    return trainer::evaluate_mse(a, c, corpus::parse_split(split));
  }, py::arg("model"), py::arg("corpus"), py::arg("split") = "test");

  // latent space
  m.def("mesh_report", [](const model::Autoencoder& a, int mesh_length, std::vector<int> classes, int threads) {
    if (classes.empty()) classes = a.info().note_classes;
    latent::MeshReport r;
    {
      py::gil_scoped_release release;
      r = latent::sampling_report(a, classes, {.mesh_length = mesh_length, .threads = threads, .chunk = 1024});
    }
    return to_python(r.to_json());
  }, py::arg("model"), py::arg("mesh_length") = 350, py::arg("classes") = std::vector<int>{},
     py::arg("threads") = 0);
  m.def("embed", [](const model::Autoencoder& a, const corpus::Corpus& c, const std::string& split) {
    const auto set = latent::embed_corpus(a, c, split_of(split));
    py::array_t<float> points({static_cast<py::ssize_t>(set.size()), static_cast<py::ssize_t>(set.dim)});
    std::copy(set.points.begin(), set.points.end(), points.mutable_data());
    return py::make_tuple(points, set.note_class);
  }, py::arg("model"), py::arg("corpus"), py::arg("split") = "train",
     "Returns (points[n, d], note_classes[n]).");

  // synthesis
  m.def("render", [](const model::Autoencoder& a, const py::object& events, double seconds,
                     std::uint64_t seed, double smooth_ms) {
    auto parsed = synth::parse_automation(from_python(events));
    dsp::AudioBuffer audio;
    {
      py::gil_scoped_release release;
      audio = synth::render_offline(a, std::move(parsed), seconds, {.phase_seed = seed, .smooth_ms = smooth_ms});
    }
    return to_array(audio.samples);
  }, py::arg("model"), py::arg("events"), py::arg("seconds"), py::arg("seed") = 0, py::arg("smooth_ms") = 0.0,
     "Offline render of automation events [{time, latent?, chroma?, gain?}].");
}
