// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// timbrelab: corpus building, training, latent analysis and synthesis from
// the command line. Exit codes: 0 ok, 1 operational error, 2 usage error.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "timbrelab/corpus.hpp"
#include "timbrelab/error.hpp"
#include "timbrelab/latent.hpp"
#include "timbrelab/model.hpp"
#include "timbrelab/server.hpp"
#include "timbrelab/synth.hpp"
#include "timbrelab/tones.hpp"
#include "timbrelab/trainer.hpp"
#include "timbrelab/wav.hpp"

using namespace timbrelab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

struct Globals {
  bool json = false;
  bool quiet = false;
};

void emit(const Globals& g, const json& result) {
  if (g.json) {
    std::cout << result.dump() << '\n';
    return;
  }
  for (const auto& [key, value] : result.items()) {
    std::cout << key << ": " << (value.is_string() ? value.get<std::string>() : value.dump()) << '\n';
  }
}

void progress(const Globals& g, const std::string& line) {
  if (!g.json && !g.quiet) std::cerr << line << '\n';
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  return out;
}

fs::path sibling(const fs::path& path, const std::string& suffix) {
  return path.parent_path() / (path.stem().string() + suffix);
}

// corpus ---------------------------------------------------------------------

struct CorpusBuildArgs {
  std::string clips, out, augment = "chroma";
  bool drop_silent = false, resample = false;
  std::uint64_t seed = 0;
};

json corpus_summary(const corpus::Corpus& c) {
  auto meta = corpus::metadata(c);
  meta.erase("clips");
  json per_split;
  for (auto s : {corpus::Split::kTrain, corpus::Split::kValidation, corpus::Split::kTest}) {
    per_split[std::string(corpus::to_string(s))] = c.indices(s).size();
  }
  meta["split_frames"] = per_split;
  meta["clip_count"] = c.clips.size();
  meta["hash"] = corpus::corpus_hash(c);
  return meta;
}

json run_corpus_build(const CorpusBuildArgs& a) {
  corpus::BuildOptions o;
  o.augmentation = corpus::parse_augmentation(a.augment);
  o.drop_silent = a.drop_silent;
  o.resample = a.resample;
  o.seed = a.seed;
  const auto c = corpus::build_corpus(corpus::read_manifest(a.clips), o);
  corpus::save_corpus(c, a.out);
  auto r = corpus_summary(c);
  r["out"] = a.out;
  return r;
}

// train ----------------------------------------------------------------------

struct TrainArgs {
  std::string corpus, out, best_out, history;
  int bottleneck = 2;
  std::string bn_act = "sigmoid";
  bool skip = true;
  std::vector<int> encoder = {512, 256, 128, 64};
  int epochs = 300;
  float lr = 5e-4f, l2 = 1e-7f;
  int batch = 64;
  std::uint64_t seed = 0;
  bool drop_silent = false;
};

json run_train(const TrainArgs& a, const Globals& g) {
  const auto c = corpus::load_corpus(a.corpus);
  model::ModelConfig mc;
  mc.bottleneck_width = a.bottleneck;
  mc.bottleneck_activation = nn::parse_activation(a.bn_act);
  mc.use_chroma_skip = a.skip;
  mc.encoder_widths = a.encoder;
  // The input layout follows the corpus augmentation.
  mc.use_chroma_input = c.augmentation == corpus::Augmentation::kChroma;
  mc.use_diff_input = c.augmentation == corpus::Augmentation::kFirstOrderDiff;
  mc.frame_bins = static_cast<int>(c.bins);

  trainer::TrainConfig tc;
  tc.epochs = a.epochs;
  tc.learning_rate = a.lr;
  tc.l2_lambda = a.l2;
  tc.batch_size = a.batch;
  tc.seed = a.seed;
  tc.drop_silent = a.drop_silent;
  tc.on_epoch = [&](const trainer::EpochStats& s) {
    char line[160];
    std::snprintf(line, sizeof line, "epoch %d/%d  train %.6g  val %.6g  (%.2fs)", s.epoch,
                  a.epochs, s.train_mse, s.val_mse, s.seconds);
    progress(g, line);
  };
  const auto result = trainer::train(model::Autoencoder::build(mc, a.seed), c, tc);

  const fs::path out = a.out;
  const fs::path best_out = a.best_out.empty() ? sibling(out, ".best.mann") : fs::path(a.best_out);
  model::save_model(result.model, out);
  model::save_model(result.best, best_out);
  if (!a.history.empty()) {
    auto h = open_out(a.history);
    result.history.write_csv(h);
  }
  const auto& info = result.model.info();
  json r = {{"out", out.string()},
            {"best_out", best_out.string()},
            {"best_epoch", result.best_epoch},
            {"epochs", info.epochs},
            {"first_val_mse", result.history.epochs.front().val_mse},
            {"final_train_mse", *info.final_train_mse},
            {"final_val_mse", *info.final_val_mse},
            {"best_val_mse", *result.best.info().final_val_mse},
            {"corpus_hash", info.corpus_hash},
            {"seed", a.seed}};
  r["test_mse"] = info.test_mse ? json(*info.test_mse) : json(nullptr);
  return r;
}

// eval / embed / mesh --------------------------------------------------------

json run_eval(const std::string& model_path, const std::string& corpus_path,
              const std::string& split_name) {
  const auto m = model::load_model(model_path);
  const auto c = corpus::load_corpus(corpus_path);
  trainer::check_compatible(m.config(), c);
  const auto split = corpus::parse_split(split_name);
  return {{"split", corpus::to_string(split)},
          {"frames", c.indices(split).size()},
          {"mse", trainer::evaluate_mse(m, c, split)},
          {"chroma_accuracy", latent::reconstruction_accuracy(m, c, split)}};
}

struct EmbedArgs {
  std::string model, corpus, split = "train", out, svg;
};

json run_embed(const EmbedArgs& a) {
  const auto m = model::load_model(a.model);
  const auto c = corpus::load_corpus(a.corpus);
  std::optional<corpus::Split> split;
  if (a.split != "all") split = corpus::parse_split(a.split);
  const auto set = latent::embed_corpus(m, c, split);
  {
    auto out = open_out(a.out);
    latent::write_embedding_csv(set, out);
  }
  json r = {{"points", set.size()}, {"dim", set.dim}, {"out", a.out}};
  if (!a.svg.empty()) {
    if (set.dim != 2) throw Error(ErrorKind::kInvalidArgument, "scatter images need a 2-d latent space");
    auto out = open_out(a.svg);
    latent::write_embedding_svg(set, out);
    r["svg"] = a.svg;
  }
  return r;
}

struct MeshArgs {
  std::string model, out, report_json, corpus;
  int mesh_length = 350;
  int threads = 0;
  std::vector<int> classes;
};

json run_mesh(const MeshArgs& a, const Globals& g) {
  const auto m = model::load_model(a.model);
  std::vector<int> classes = a.classes;
  std::string source = "--classes";
  if (classes.empty() && !a.corpus.empty()) {
    classes = corpus::load_corpus(a.corpus).classes(corpus::Split::kTrain);
    source = "corpus";
  }
  if (classes.empty() && !m.info().note_classes.empty()) {
    classes = m.info().note_classes;
    source = "model";
  }
  if (classes.empty()) {
    for (int k = 0; k < 12; ++k) classes.push_back(k);
    source = "all";
  }
  for (int k : classes) {
    if (k < 0 || k > 11) throw Error(ErrorKind::kInvalidArgument, "note classes must be 0-11");
  }
  progress(g, "sampling " + std::to_string(latent::mesh_size(m.config().bottleneck_width, a.mesh_length)) +
                  " points for " + std::to_string(classes.size()) + " classes");
  const auto report = latent::sampling_report(
      m, classes, {.mesh_length = a.mesh_length, .threads = a.threads, .chunk = 1024});
  if (!a.out.empty()) {
    auto out = open_out(a.out);
    report.write_csv(out);
  }
  auto r = report.to_json();
  if (!a.report_json.empty()) open_out(a.report_json) << r.dump(2) << '\n';
  r["class_source"] = source;
  if (!a.out.empty()) r["out"] = a.out;
  return r;
}

// synth / render -------------------------------------------------------------

struct SynthArgs {
  std::string model, device = "null", bind = "127.0.0.1";
  int port = 8765;
  std::uint64_t seed = 0;
  double smooth_ms = 0.0;
  double seconds = 0.0;
  bool no_server = false;
};

json run_synth(const SynthArgs& a, const Globals& g) {
  auto m = std::make_shared<const model::Autoencoder>(model::load_model(a.model));
  synth::StreamConfig sc;
  sc.device = a.device;
  sc.render.phase_seed = a.seed;
  sc.render.smooth_ms = a.smooth_ms;
  if (a.seconds > 0.0) {
    sc.max_frames = static_cast<std::uint64_t>(std::ceil(a.seconds * dsp::kSampleRate / dsp::kHop));
  }
  synth::Engine engine(m, sc);
  std::unique_ptr<server::ControlServer> srv;
  if (!a.no_server) {
    if (a.port < 0 || a.port > 65535) throw Error(ErrorKind::kInvalidArgument, "port must be 0-65535");
    srv = std::make_unique<server::ControlServer>(
        engine, server::ServerOptions{.address = a.bind, .port = static_cast<std::uint16_t>(a.port)});
  }
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  engine.start();
  if (srv) {
    srv->start();
    // Announced even in --json mode so scripts can find an ephemeral port.
    std::cerr << "control page: http://" << a.bind << ':' << srv->port() << "/\n";
  }
  progress(g, "streaming to '" + a.device + "' (Ctrl-C to stop)");
  while (engine.running() && !g_interrupted.load()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  if (srv) srv->stop();
  engine.stop();
  const auto st = engine.stats();
  return {{"frames", st.frames_played},
          {"seconds", static_cast<double>(st.frames_played * dsp::kHop) / dsp::kSampleRate},
          {"underruns", st.underruns},
          {"clipped_samples", st.clipped_samples},
          {"max_render_ms", st.max_render_ms},
          {"device", a.device}};
}

struct RenderArgs {
  std::string model, automation, out;
  double seconds = 0.0;
  std::uint64_t seed = 0;
  double smooth_ms = 0.0;
};

json run_render(const RenderArgs& a) {
  const auto m = model::load_model(a.model);
  const auto events = synth::read_automation(a.automation);
  const synth::RenderOptions o{.phase_seed = a.seed, .smooth_ms = a.smooth_ms};
  const auto audio = synth::render_offline(m, events, a.seconds, o);
  wav::write(a.out, audio);
  float peak = 0.0f;
  for (float s : audio.samples) peak = std::max(peak, std::abs(s));
  return {{"out", a.out}, {"samples", audio.samples.size()}, {"seconds", audio.seconds()}, {"peak", peak}};
}

// misc -----------------------------------------------------------------------

json run_inspect(const std::string& path) {
  const auto header = model::read_model_header(path);
  json r = header.raw;
  r["format_version"] = header.version;
  r["parameters"] = [&] {
    // Parameter count from the topology; weights are not read.
    const auto& c = header.config;
    std::vector<int> widths = {c.input_dim()};
    widths.insert(widths.end(), c.encoder_widths.begin(), c.encoder_widths.end());
    widths.push_back(c.bottleneck_width);
    std::uint64_t n = 0;
    for (std::size_t i = 1; i < widths.size(); ++i) n += std::uint64_t(widths[i - 1] + 1) * widths[i];
    std::vector<int> dec = {c.decoder_input_dim()};
    dec.insert(dec.end(), c.encoder_widths.rbegin(), c.encoder_widths.rend());
    dec.push_back(c.frame_bins);
    for (std::size_t i = 1; i < dec.size(); ++i) n += std::uint64_t(dec[i - 1] + 1) * dec[i];
    return n;
  }();
  return r;
}

json run_chroma_table(const std::string& out) {
  if (out.empty() || out == "-") {
    chroma::write_bin_note_csv(std::cout);
    return nullptr;
  }
  auto f = open_out(out);
  chroma::write_bin_note_csv(f);
  return {{"out", out}, {"bins", dsp::kBins}};
}

json run_demo_clips(const std::string& dir, std::size_t frames, std::uint64_t seed) {
  tones::ToneOptions o;
  o.frames_per_clip = frames;
  o.seed = seed;
  const auto manifest = tones::write_demo_clips(dir, o);
  return {{"manifest", manifest.string()}, {"clips", corpus::read_manifest(manifest).size()}};
}

bool wants_json(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--json") == 0) return true;
  }
  return false;
}

void report_error(bool as_json, std::string_view kind, const std::string& message) {
  if (as_json) {
    std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
  } else {
    std::cerr << "error: " << message << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TimbreLab: timbre autoencoder toolkit", "timbrelab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "timbrelab 0.1.0");
  Globals g;
  app.add_flag("--json", g.json, "Machine-readable output; errors as one JSON line on stderr");
  app.add_flag("-q,--quiet", g.quiet, "No progress output");
  std::function<json()> action;

  auto add_seed = [](CLI::App* cmd, std::uint64_t& seed) {
    cmd->add_option("--seed", seed, "Random seed")->envname("TIMBRELAB_SEED")->capture_default_str();
  };

  // corpus build | info
  auto* corpus_cmd = app.add_subcommand("corpus", "Build or inspect a spectral corpus");
  corpus_cmd->require_subcommand(1);
  CorpusBuildArgs cb;
  auto* build = corpus_cmd->add_subcommand("build", "Frame, normalize and label clips from a manifest");
  build->add_option("--clips", cb.clips, "Manifest: JSON array of {path, split, clip_id}")->required();
  build->add_option("--out", cb.out, "Output corpus file (.tcv)")->required();
  build->add_option("--augment", cb.augment, "chroma | none | first_order_diff")->capture_default_str();
  build->add_flag("--drop-silent", cb.drop_silent, "Mark silent frames for exclusion from training");
  build->add_flag("--resample", cb.resample, "Resample clips that are not 44.1 kHz");
  add_seed(build, cb.seed);
  build->callback([&] { action = [&] { return run_corpus_build(cb); }; });
  std::string info_path;
  auto* info = corpus_cmd->add_subcommand("info", "Print corpus metadata");
  info->add_option("corpus", info_path, "Corpus file")->required();
  info->callback([&] { action = [&] { return corpus_summary(corpus::load_corpus(info_path)); }; });

  // train
  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train an autoencoder on a corpus");
  train->add_option("--corpus", ta.corpus, "Corpus file")->required();
  train->add_option("--out", ta.out, "Final model (.mann)")->required();
  train->add_option("--best-out", ta.best_out, "Best-validation model (default: <out>.best.mann)");
  train->add_option("--history", ta.history, "Per-epoch CSV");
  train->add_option("--bottleneck", ta.bottleneck, "Latent width")->capture_default_str();
  train->add_option("--bn-act", ta.bn_act, "Bottleneck activation: sigmoid | lrelu | relu | linear")
      ->capture_default_str();
  train->add_flag("--skip,!--no-skip", ta.skip, "Chroma skip connection into the decoder (default on)");
  train->add_option("--encoder", ta.encoder, "Encoder hidden widths")->delimiter(',')->capture_default_str();
  train->add_option("--epochs", ta.epochs)->capture_default_str();
  train->add_option("--lr", ta.lr, "Adam learning rate")->capture_default_str();
  train->add_option("--l2", ta.l2, "L2 weight penalty")->capture_default_str();
  train->add_option("--batch", ta.batch)->capture_default_str();
  train->add_flag("--drop-silent", ta.drop_silent, "Skip silent frames");
  add_seed(train, ta.seed);
  train->callback([&] { action = [&] { return run_train(ta, g); }; });

  // eval
  std::string ev_model, ev_corpus, ev_split = "test";
  auto* eval = app.add_subcommand("eval", "Reconstruction MSE and chroma accuracy on a split");
  eval->add_option("--model", ev_model)->required();
  eval->add_option("--corpus", ev_corpus)->required();
  eval->add_option("--split", ev_split, "train | validation | test")->capture_default_str();
  eval->callback([&] { action = [&] { return run_eval(ev_model, ev_corpus, ev_split); }; });

  // mesh
  MeshArgs ma;
  auto* mesh = app.add_subcommand("mesh", "Decode a latent grid per note class and score the chroma match");
  mesh->add_option("--model", ma.model)->required();
  mesh->add_option("--mesh-length", ma.mesh_length, "Grid points per dimension")->capture_default_str();
  mesh->add_option("--out", ma.out, "CSV report");
  mesh->add_option("--report-json", ma.report_json, "JSON report");
  mesh->add_option("--classes", ma.classes, "Note classes 0-11 (default: the model's training classes)")
      ->delimiter(',');
  mesh->add_option("--corpus", ma.corpus, "Take the classes from this corpus's train split");
  mesh->add_option("--threads", ma.threads, "Worker threads (0: all cores)")->capture_default_str();
  mesh->callback([&] { action = [&] { return run_mesh(ma, g); }; });

  // embed
  EmbedArgs ea;
  auto* embed = app.add_subcommand("embed", "Export the latent embedding of a corpus");
  embed->add_option("--model", ea.model)->required();
  embed->add_option("--corpus", ea.corpus)->required();
  embed->add_option("--split", ea.split, "train | validation | test | all")->capture_default_str();
  embed->add_option("--out", ea.out, "CSV output")->required();
  embed->add_option("--svg", ea.svg, "Scatter image (2-d latents only)");
  embed->callback([&] { action = [&] { return run_embed(ea); }; });

  // synth
  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "Stream audio from the decoder with a control server");
  synth_cmd->add_option("--model", sa.model)->required();
  synth_cmd->add_option("--port", sa.port, "Control port (0: any free port)")->capture_default_str();
  synth_cmd->add_option("--bind", sa.bind, "Control address")->capture_default_str();
  synth_cmd->add_option("--device", sa.device, "null | stdout | wav:<path>")
      ->envname("TIMBRELAB_DEVICE")
      ->capture_default_str();
  synth_cmd->add_option("--smooth", sa.smooth_ms, "Latent glide time in ms (0: off)")->capture_default_str();
  synth_cmd->add_option("--seconds", sa.seconds, "Stop after this long (0: until interrupted)");
  synth_cmd->add_flag("--no-server", sa.no_server, "Stream the initial state without a control server");
  add_seed(synth_cmd, sa.seed);
  synth_cmd->callback([&] { action = [&] { return run_synth(sa, g); }; });

  // render
  RenderArgs ra;
  auto* render = app.add_subcommand("render", "Render an automation script to a WAV file");
  render->add_option("--model", ra.model)->required();
  render->add_option("--automation", ra.automation, "JSON events {time, latent, chroma, gain}")->required();
  render->add_option("--seconds", ra.seconds, "Duration")->required();
  render->add_option("--out", ra.out, "Output WAV")->required();
  render->add_option("--smooth", ra.smooth_ms, "Latent glide time in ms (0: off)")->capture_default_str();
  add_seed(render, ra.seed);
  render->callback([&] { action = [&] { return run_render(ra); }; });

  // model-inspect and model inspect
  std::string inspect_path;
  auto* inspect = app.add_subcommand("model-inspect", "Print a model's configuration and provenance");
  inspect->add_option("model", inspect_path, "Model file")->required();
  inspect->callback([&] { action = [&] { return run_inspect(inspect_path); }; });
  auto* model_cmd = app.add_subcommand("model", "Model file utilities");
  model_cmd->require_subcommand(1);
  auto* inspect2 = model_cmd->add_subcommand("inspect", "Same as model-inspect");
  inspect2->add_option("model", inspect_path, "Model file")->required();
  inspect2->callback([&] { action = [&] { return run_inspect(inspect_path); }; });

  // chroma-table, demo-clips
  std::string table_out;
  auto* table = app.add_subcommand("chroma-table", "FFT bin to piano note table as CSV");
  table->add_option("--out", table_out, "Output file (default stdout)");
  table->callback([&] { action = [&] { return run_chroma_table(table_out); }; });

  std::string demo_dir;
  std::size_t demo_frames = 36;
  std::uint64_t demo_seed = 1;
  auto* demo = app.add_subcommand("demo-clips", "Write the synthetic C-major tone clips and a manifest");
  demo->add_option("--out", demo_dir, "Output directory")->required();
  demo->add_option("--frames-per-clip", demo_frames)->capture_default_str();
  demo->add_option("--seed", demo_seed)->envname("TIMBRELAB_SEED")->capture_default_str();
  demo->callback([&] { action = [&] { return run_demo_clips(demo_dir, demo_frames, demo_seed); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error(wants_json(argc, argv), "usage", e.what());
    if (!wants_json(argc, argv)) std::cerr << "Run with --help for usage.\n";
    return kExitUsage;
  }

  try {
    const json result = action();
    if (!result.is_null()) emit(g, result);
    return kExitOk;
  } catch (const Error& e) {
    report_error(g.json, to_string(e.kind()), e.what());
    return kExitFailure;
  } catch (const std::exception& e) {
    report_error(g.json, "internal", e.what());
    return kExitFailure;
  }
}
