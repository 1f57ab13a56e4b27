// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "timbrelab/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "timbrelab/error.hpp"
#include "timbrelab/wav.hpp"

namespace timbrelab::synth {

namespace {

using Clock = std::chrono::steady_clock;

bool is_sigmoid(const model::Autoencoder& m) {
  return m.config().bottleneck_activation == nn::Activation::kSigmoid;
}

std::uint64_t frame_for_time(double seconds) {
  const double frames = seconds * dsp::kSampleRate / static_cast<double>(dsp::kHop);
  return static_cast<std::uint64_t>(std::ceil(frames - 1e-9));
}

}  // namespace

void ControlState::set_latent(std::span<const float> values) {
  if (values.size() > kMaxLatent) {
    throw Error(ErrorKind::kInvalidArgument,
                "latent has " + std::to_string(values.size()) + " values, at most " +
                    std::to_string(kMaxLatent) + " supported");
  }
  std::copy(values.begin(), values.end(), latent.begin());
  std::fill(latent.begin() + static_cast<std::ptrdiff_t>(values.size()), latent.end(), 0.0f);
  dim = static_cast<int>(values.size());
}

chroma::ChromaVector ControlState::chroma() const {
  return chroma_class < 0 ? chroma::ChromaVector::silence()
                          : chroma::ChromaVector::of_class(chroma_class);
}

ControlState initial_state(const model::Autoencoder& model) {
  const int d = model.config().bottleneck_width;
  const auto& info = model.info();
  ControlState s;
  s.dim = d;
  for (int k = 0; k < d; ++k) {
    if (is_sigmoid(model)) {
      s.latent[k] = 0.5f;
    } else if (info.latent_min.size() == static_cast<std::size_t>(d) &&
               info.latent_max.size() == static_cast<std::size_t>(d)) {
      s.latent[k] = 0.5f * (info.latent_min[k] + info.latent_max[k]);
    }
  }
  if (model.config().use_chroma_skip && !info.note_classes.empty()) {
    s.chroma_class = info.note_classes.front();
  }
  return s;
}

void validate_state(const model::Autoencoder& model, const ControlState& state) {
  const int d = model.config().bottleneck_width;
  if (state.dim != d) {
    throw Error(ErrorKind::kInvalidArgument, "latent has " + std::to_string(state.dim) +
                                                 " values, expected " + std::to_string(d));
  }
  for (int k = 0; k < d; ++k) {
    if (!std::isfinite(state.latent[k])) {
      throw Error(ErrorKind::kInvalidArgument, "latent value " + std::to_string(k) + " is not finite");
    }
  }
  if (state.chroma_class < -1 || state.chroma_class > 11) {
    throw Error(ErrorKind::kInvalidArgument,
                "chroma class must be 0-11 or none, got " + std::to_string(state.chroma_class));
  }
  if (!std::isfinite(state.gain) || state.gain < 0.0f) {
    throw Error(ErrorKind::kInvalidArgument, "gain must be a finite value >= 0");
  }
}

ControlChannel::ControlChannel(ControlState initial) : last_(initial) {
  slots_.fill(initial);
}

std::uint64_t ControlChannel::publish(ControlState state) {
  std::lock_guard lock(producer_mutex_);
  return publish_locked(state);
}

std::uint64_t ControlChannel::update(const std::function<void(ControlState&)>& edit) {
  std::lock_guard lock(producer_mutex_);
  ControlState state = last_;
  edit(state);
  return publish_locked(state);
}

std::uint64_t ControlChannel::publish_locked(ControlState state) {
  state.generation = last_.generation + 1;
  last_ = state;
  slots_[back_] = state;
  back_ = middle_.exchange(static_cast<std::uint8_t>(back_ | kFresh), std::memory_order_acq_rel) & 3;
  return state.generation;
}

ControlState ControlChannel::current() const {
  std::lock_guard lock(producer_mutex_);
  return last_;
}

const ControlState& ControlChannel::state_for_frame(std::uint64_t) {
  if (middle_.load(std::memory_order_acquire) & kFresh) {
    front_ = middle_.exchange(front_, std::memory_order_acq_rel) & 3;
  }
  return slots_[front_];
}

Automation::Automation(const model::Autoencoder& model, std::vector<AutomationEvent> events,
                       ControlState initial)
    : current_(initial) {
  validate_state(model, current_);
  ControlState state = initial;
  double previous = -std::numeric_limits<double>::infinity();
  for (const auto& e : events) {
    if (!std::isfinite(e.time) || e.time < 0.0) {
      throw Error(ErrorKind::kInvalidArgument, "automation time must be finite and >= 0");
    }
    if (e.time < previous) {
      throw Error(ErrorKind::kInvalidArgument, "automation events must be sorted by time");
    }
    previous = e.time;
    if (e.latent) state.set_latent(*e.latent);
    if (e.chroma_class) state.chroma_class = *e.chroma_class;
    if (e.gain) state.gain = *e.gain;
    ++state.generation;
    validate_state(model, state);
    schedule_.emplace_back(frame_for_time(e.time), state);
  }
}

const ControlState& Automation::state_for_frame(std::uint64_t frame) {
  while (next_ < schedule_.size() && schedule_[next_].first <= frame) {
    current_ = schedule_[next_++].second;
  }
  return current_;
}

std::vector<AutomationEvent> parse_automation(const nlohmann::json& j) {
  const nlohmann::json* list = &j;
  if (j.is_object()) {
    if (!j.contains("events")) throw Error(ErrorKind::kInvalidArgument, "automation needs \"events\"");
    list = &j.at("events");
  }
  if (!list->is_array()) throw Error(ErrorKind::kInvalidArgument, "automation events must be an array");
  std::vector<AutomationEvent> events;
  try {
    for (const auto& item : *list) {
      AutomationEvent e;
      e.time = item.at("time").get<double>();
      if (item.contains("latent")) e.latent = item.at("latent").get<std::vector<float>>();
      if (item.contains("chroma")) {
        e.chroma_class = item.at("chroma").is_null() ? -1 : item.at("chroma").get<int>();
      }
      if (item.contains("gain")) e.gain = item.at("gain").get<float>();
      events.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::kInvalidArgument, std::string("bad automation event: ") + ex.what());
  }
  return events;
}

std::vector<AutomationEvent> read_automation(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  try {
    return parse_automation(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& ex) {
    throw Error(ErrorKind::kInvalidArgument, path.string() + ": " + ex.what());
  }
}

FrameRenderer::FrameRenderer(const model::Autoencoder& model, const RenderOptions& options)
    : FrameRenderer(model, dsp::noise_phase_bank(options.bank_frames, options.phase_seed),
                    options.smooth_ms) {}

FrameRenderer::FrameRenderer(const model::Autoencoder& model, dsp::PhaseBank bank,
                             double smooth_ms)
    : model_(model), bank_(std::move(bank)) {
  if (model.config().frame_bins != static_cast<int>(dsp::kBins)) {
    throw Error(ErrorKind::kUnsupportedModel, "model does not produce " +
                                                  std::to_string(dsp::kBins) + "-bin frames");
  }
  if (bank_.frames == 0) throw Error(ErrorKind::kInvalidArgument, "phase bank is empty");
  if (!std::isfinite(smooth_ms) || smooth_ms < 0.0) {
    throw Error(ErrorKind::kInvalidArgument, "smoothing time must be >= 0");
  }
  smooth_frames_ = static_cast<std::size_t>(
      std::lround(smooth_ms * 1e-3 * dsp::kSampleRate / static_cast<double>(dsp::kHop)));
  decoder_input_ = nn::Vector::Zero(model.config().decoder_input_dim());
  for (const auto& layer : model.decoder()) activations_.emplace_back(nn::Vector::Zero(layer.bias.size()));
}

std::span<const float> FrameRenderer::magnitudes() const {
  const auto& out = activations_.back();
  return {out.data(), static_cast<std::size_t>(out.size())};
}

void FrameRenderer::decode(std::span<const float> latent, int chroma_class) {
  const bool sigmoid = is_sigmoid(model_);
  for (std::size_t k = 0; k < latent.size(); ++k) {
    decoder_input_(static_cast<Eigen::Index>(k)) = sigmoid ? std::clamp(latent[k], 0.0f, 1.0f) : latent[k];
  }
  if (model_.config().use_chroma_skip) {
    auto onehot = decoder_input_.tail(model::kChromaDim);
    onehot.setZero();
    if (chroma_class >= 0) onehot(chroma_class) = 1.0f;
  }
  const nn::Vector* x = &decoder_input_;
  const auto layers = model_.decoder();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& y = activations_[l];
    y.noalias() = layers[l].weights * *x;
    y += layers[l].bias;
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = nn::activate(layers[l].activation, y(i));
    x = &y;
  }
}

void FrameRenderer::render(const ControlState& state, std::span<float> out) {
  const std::size_t d = static_cast<std::size_t>(state.dim);
  if (state.generation != seen_generation_) {
    if (seen_generation_ == ~std::uint64_t{0} || smooth_frames_ == 0) {
      std::copy_n(state.latent.begin(), d, effective_.begin());
      glide_step_ = smooth_frames_;
    } else {
      glide_from_ = effective_;
      glide_step_ = 0;
    }
    seen_generation_ = state.generation;
  }
  if (glide_step_ < smooth_frames_) {
    ++glide_step_;
    const float t = static_cast<float>(glide_step_) / static_cast<float>(smooth_frames_);
    for (std::size_t k = 0; k < d; ++k) {
      effective_[k] = glide_from_[k] + (state.latent[k] - glide_from_[k]) * t;
    }
  } else {
    std::copy_n(state.latent.begin(), d, effective_.begin());
  }

  decode({effective_.data(), d}, state.chroma_class);
  ola_.render(magnitudes(), bank_.frame(frame_index_), kMagnitudeScale, out);
  // Gain after the overlap-add: a zero gain is exact silence at once.
  for (float& s : out) {
    s *= state.gain;
    if (s > 1.0f || s < -1.0f) {
      s = std::clamp(s, -1.0f, 1.0f);
      ++clipped_;
    }
  }
  ++frame_index_;
}

std::array<float, kSpectrumBins> display_spectrum(std::span<const float> magnitudes) {
  std::array<float, kSpectrumBins> out{};
  if (magnitudes.empty()) return out;
  const std::size_t group = std::max<std::size_t>(1, magnitudes.size() / kSpectrumBins);
  for (std::size_t k = 0; k < magnitudes.size(); ++k) {
    const std::size_t b = std::min(k / group, kSpectrumBins - 1);
    out[b] = std::max(out[b], magnitudes[k]);
  }
  return out;
}

dsp::AudioBuffer render_offline(const model::Autoencoder& model,
                                std::vector<AutomationEvent> automation, double seconds,
                                const RenderOptions& options) {
  if (!std::isfinite(seconds) || seconds < 0.0) {
    throw Error(ErrorKind::kInvalidArgument, "duration must be finite and >= 0");
  }
  Automation source(model, std::move(automation), initial_state(model));
  FrameRenderer renderer(model, options);
  const auto total = static_cast<std::size_t>(std::llround(seconds * dsp::kSampleRate));
  const std::size_t frames = (total + dsp::kHop - 1) / dsp::kHop;
  dsp::AudioBuffer audio;
  audio.samples.resize(frames * dsp::kHop);
  for (std::size_t f = 0; f < frames; ++f) {
    renderer.render(source.state_for_frame(f),
                    std::span<float>(audio.samples).subspan(f * dsp::kHop, dsp::kHop));
  }
  audio.samples.resize(total);
  return audio;
}

void render_to_wav(const model::Autoencoder& model, std::vector<AutomationEvent> automation,
                   double seconds, const std::filesystem::path& path,
                   const RenderOptions& options) {
  wav::write(path, render_offline(model, std::move(automation), seconds, options));
}

class AudioSink {
 public:
  virtual ~AudioSink() = default;
  /// Paced sinks consume one hop per real-time deadline.
  virtual bool paced() const = 0;
  virtual void write(std::span<const float> hop) = 0;
  virtual void close() {}
};

namespace {

class NullSink final : public AudioSink {
 public:
  bool paced() const override { return true; }
  void write(std::span<const float>) override {}
};

class StdoutSink final : public AudioSink {
 public:
  bool paced() const override { return true; }
  void write(std::span<const float> hop) override {
    std::array<std::int16_t, dsp::kHop> pcm;
    for (std::size_t i = 0; i < hop.size(); ++i) pcm[i] = wav::to_pcm16(hop[i]);
    std::fwrite(pcm.data(), sizeof(std::int16_t), hop.size(), stdout);
    std::fflush(stdout);
  }
};

class WavSink final : public AudioSink {
 public:
  explicit WavSink(std::filesystem::path path) : path_(std::move(path)) {
    std::ofstream probe(path_, std::ios::binary);
    if (!probe) throw Error(ErrorKind::kDevice, "cannot open " + path_.string() + " for writing");
  }
  bool paced() const override { return false; }
  void write(std::span<const float> hop) override {
    audio_.samples.insert(audio_.samples.end(), hop.begin(), hop.end());
  }
  void close() override { wav::write(path_, audio_); }

 private:
  std::filesystem::path path_;
  dsp::AudioBuffer audio_;
};

std::unique_ptr<AudioSink> open_sink(const std::string& device) {
  if (device == "null") return std::make_unique<NullSink>();
  if (device == "stdout") return std::make_unique<StdoutSink>();
  if (device.rfind("wav:", 0) == 0 && device.size() > 4) {
    return std::make_unique<WavSink>(device.substr(4));
  }
  throw Error(ErrorKind::kDevice,
              "unknown audio device '" + device + "' (available: null, stdout, wav:<path>)");
}

}  // namespace

Engine::Engine(std::shared_ptr<const model::Autoencoder> model, StreamConfig config)
    : model_(std::move(model)), config_(std::move(config)), control_(initial_state(*model_)) {
  if (config_.ring_frames == 0) throw Error(ErrorKind::kInvalidArgument, "ring needs at least one frame");
  validate_state(*model_, control_.current());
  FrameRenderer probe(*model_, dsp::PhaseBank{1, 0, std::vector<float>(dsp::kBins)},
                      config_.render.smooth_ms);
  sink_ = open_sink(config_.device);
  ring_.assign(config_.ring_frames * dsp::kHop, 0.0f);
  last_frame_.assign(dsp::kHop, 0.0f);
  hop_buffer_.assign(dsp::kHop, 0.0f);
}

Engine::~Engine() { stop(); }

void Engine::start(ControlSource* source) {
  if (filled_) {
    throw Error(ErrorKind::kInvalidArgument, "a stream can only be started once");
  }
  filled_ = std::make_unique<std::counting_semaphore<>>(0);
  space_ = std::make_unique<std::counting_semaphore<>>(static_cast<std::ptrdiff_t>(config_.ring_frames));
  stop_requested_ = false;
  running_ = true;
  render_thread_ = std::thread([this, source] { render_loop(source ? source : &control_); });
  // Prefill so the first deadlines do not underrun.
  const std::uint64_t want = std::min<std::uint64_t>(config_.ring_frames,
                                                     config_.max_frames.value_or(UINT64_MAX));
  for (std::uint64_t have = produced_.load(); have < want && !stop_requested_.load();
       have = produced_.load()) {
    produced_.wait(have);
  }
  sink_thread_ = std::thread([this] { sink_loop(); });
}

void Engine::render_loop(ControlSource* source) {
  FrameRenderer renderer(*model_, config_.render);
  const std::size_t slots = config_.ring_frames;
  const std::uint64_t limit = config_.max_frames.value_or(UINT64_MAX);
  for (std::uint64_t f = 0; f < limit; ++f) {
    space_->acquire();
    if (stop_requested_.load()) break;
    const auto t0 = Clock::now();
    renderer.render(source->state_for_frame(f),
                    std::span<float>(ring_).subspan((f % slots) * dsp::kHop, dsp::kHop));
    const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    for (double seen = max_render_ms_.load(); ms > seen && !max_render_ms_.compare_exchange_weak(seen, ms);) {
    }
    clipped_.store(renderer.clipped_samples());
    filled_->release();
    produced_.fetch_add(1);
    produced_.notify_all();
  }
  // Wakes start() when a stop arrives before the prefill completes.
  produced_.notify_all();
}

bool Engine::pull(std::span<float> out, bool wait_for_data) {
  bool have = filled_->try_acquire();
  if (!have && wait_for_data) {
    while (!(have = filled_->try_acquire_for(std::chrono::milliseconds(50))) &&
           !stop_requested_.load()) {
    }
  }
  if (have) {
    const auto slot = std::span<const float>(ring_).subspan((consumed_ % config_.ring_frames) * dsp::kHop, dsp::kHop);
    std::copy(slot.begin(), slot.end(), last_frame_.begin());
    ++consumed_;
    space_->release();
  } else if (!wait_for_data) {
    underruns_.fetch_add(1);
  }
  std::copy(last_frame_.begin(), last_frame_.end(), out.begin());
  return have;
}

void Engine::sink_loop() {
  const bool paced = sink_->paced();
  const std::uint64_t limit = config_.max_frames.value_or(UINT64_MAX);
  const auto period = std::chrono::duration<double>(static_cast<double>(dsp::kHop) / dsp::kSampleRate);
  const auto t0 = Clock::now();
  for (std::uint64_t f = 0; f < limit && !stop_requested_.load(); ++f) {
    if (paced) {
      std::this_thread::sleep_until(t0 + std::chrono::duration_cast<Clock::duration>(period * static_cast<double>(f)));
    }
    // Unpaced sinks wait for data; they only come back empty on stop.
    if (!pull(hop_buffer_, !paced) && !paced) break;
    sink_->write(hop_buffer_);
    played_.fetch_add(1);
  }
  try {
    sink_->close();
  } catch (const Error& e) {
    std::fprintf(stderr, "audio sink: %s\n", e.what());
  }
  {
    std::lock_guard lock(done_mutex_);
    running_ = false;
  }
  done_cv_.notify_all();
}

void Engine::wait() {
  std::unique_lock lock(done_mutex_);
  done_cv_.wait(lock, [this] { return !running_.load(); });
}

void Engine::stop() {
  stop_requested_ = true;
  if (space_) space_->release();
  if (render_thread_.joinable()) render_thread_.join();
  if (sink_thread_.joinable()) sink_thread_.join();
  {
    std::lock_guard lock(done_mutex_);
    running_ = false;
  }
  done_cv_.notify_all();
}

StreamStats Engine::stats() const {
  return {played_.load(), underruns_.load(), clipped_.load(), max_render_ms_.load()};
}

}  // namespace timbrelab::synth
