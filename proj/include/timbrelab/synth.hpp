// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Decoder-driven synthesis: control state handoff, per-hop frame rendering
// with the noise phase bank, the streaming engine with its audio sinks, and
// offline rendering from an automation script.

#pragma once

#include <array>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "timbrelab/dsp.hpp"
#include "timbrelab/model.hpp"

namespace timbrelab::synth {

inline constexpr std::size_t kMaxLatent = static_cast<std::size_t>(model::kMaxBottleneck);
inline constexpr std::size_t kPhaseBankFrames = 256;
inline constexpr std::size_t kSpectrumBins = 64;
/// Magnitude 1.0 maps to a partial of amplitude `gain`.
inline constexpr double kMagnitudeScale = dsp::kFftSize / 4.0;

/// Fixed-capacity so snapshots copy without allocating.
struct ControlState {
  std::array<float, kMaxLatent> latent{};
  int dim = 0;
  int chroma_class = -1;  // -1: no class
  float gain = 0.5f;
  std::uint64_t generation = 0;

  std::span<const float> values() const { return {latent.data(), static_cast<std::size_t>(dim)}; }
  void set_latent(std::span<const float> values);
  chroma::ChromaVector chroma() const;
};

/// Center of the latent box: 0.5 for sigmoid models, the midpoint of the
/// recorded training bounds (or 0) otherwise. Chroma starts at the first
/// trained note class.
ControlState initial_state(const model::Autoencoder& model);

/// Throws kInvalidArgument when the state cannot drive `model`.
void validate_state(const model::Autoencoder& model, const ControlState& state);

/// Where the renderer reads the state for each frame.
class ControlSource {
 public:
  virtual ~ControlSource() = default;
  /// Called once per frame from the render thread, in frame order.
  virtual const ControlState& state_for_frame(std::uint64_t frame) = 0;
};

/// Live control: producers publish whole states; the single render thread
/// takes the newest one without locking (triple buffer).
class ControlChannel final : public ControlSource {
 public:
  explicit ControlChannel(ControlState initial);

  /// Stamps the next generation and publishes. Producers are serialized.
  std::uint64_t publish(ControlState state);
  /// Read-modify-write of the last published state as one update. Nothing
  /// is published if `edit` throws.
  std::uint64_t update(const std::function<void(ControlState&)>& edit);
  /// Last published state (producer side).
  ControlState current() const;

  const ControlState& state_for_frame(std::uint64_t frame) override;

 private:
  static constexpr std::uint8_t kFresh = 4;
  std::uint64_t publish_locked(ControlState state);

  mutable std::mutex producer_mutex_;
  ControlState last_;
  std::array<ControlState, 3> slots_;
  std::atomic<std::uint8_t> middle_{1};
  std::uint8_t back_ = 2;   // producer-owned
  std::uint8_t front_ = 0;  // consumer-owned
};

/// Timed state changes applied at frame boundaries.
struct AutomationEvent {
  double time = 0.0;  // seconds
  std::optional<std::vector<float>> latent;
  std::optional<int> chroma_class;  // -1 clears the class
  std::optional<float> gain;
};

class Automation final : public ControlSource {
 public:
  /// Events must be sorted by time; each one is merged into the running state.
  Automation(const model::Autoencoder& model, std::vector<AutomationEvent> events,
             ControlState initial);

  const ControlState& state_for_frame(std::uint64_t frame) override;

 private:
  std::vector<std::pair<std::uint64_t, ControlState>> schedule_;
  std::size_t next_ = 0;
  ControlState current_;
};

/// {"events":[{"time":s,"latent":[...],"chroma":c|null,"gain":g}, ...]} or a
/// bare array of events.
std::vector<AutomationEvent> parse_automation(const nlohmann::json& j);
std::vector<AutomationEvent> read_automation(const std::filesystem::path& path);

struct RenderOptions {
  std::uint64_t phase_seed = 0;
  std::size_t bank_frames = kPhaseBankFrames;
  /// Linear latent glide after each state change; 0 switches instantly.
  double smooth_ms = 0.0;
};

/// One hop of audio per call: decode, phase-bank inversion, overlap-add,
/// gain, hard clip. No allocation after construction.
class FrameRenderer {
 public:
  FrameRenderer(const model::Autoencoder& model, const RenderOptions& options);
  FrameRenderer(const model::Autoencoder& model, dsp::PhaseBank bank, double smooth_ms = 0.0);

  void render(const ControlState& state, std::span<float> out);

  std::uint64_t frame_index() const { return frame_index_; }
  std::uint64_t clipped_samples() const { return clipped_; }
  /// Decoded magnitudes of the last rendered frame.
  std::span<const float> magnitudes() const;
  const dsp::PhaseBank& bank() const { return bank_; }

 private:
  void decode(std::span<const float> latent, int chroma_class);

  const model::Autoencoder& model_;
  dsp::PhaseBank bank_;
  dsp::OverlapAddSynth ola_;
  std::vector<nn::Vector> activations_;
  nn::Vector decoder_input_;
  std::uint64_t frame_index_ = 0;
  std::uint64_t clipped_ = 0;

  std::size_t smooth_frames_ = 0;
  std::size_t glide_step_ = 0;
  std::uint64_t seen_generation_ = ~std::uint64_t{0};
  std::array<float, kMaxLatent> glide_from_{};
  std::array<float, kMaxLatent> effective_{};
};

/// Max-pooled display spectrum (64 bins) of a decoded frame.
std::array<float, kSpectrumBins> display_spectrum(std::span<const float> magnitudes);

/// Deterministic offline rendering; exactly round(seconds * 44100) samples.
dsp::AudioBuffer render_offline(const model::Autoencoder& model,
                                std::vector<AutomationEvent> automation, double seconds,
                                const RenderOptions& options = {});
void render_to_wav(const model::Autoencoder& model, std::vector<AutomationEvent> automation,
                   double seconds, const std::filesystem::path& path,
                   const RenderOptions& options = {});

struct StreamConfig {
  /// "null" (real-time paced, discarded), "wav:<path>" (unpaced file
  /// capture), "stdout" (raw s16le mono, real-time paced).
  std::string device = "null";
  RenderOptions render;
  /// Frames rendered ahead of the audio callback.
  std::size_t ring_frames = 4;
  /// Stop after this many played frames (unbounded when empty).
  std::optional<std::uint64_t> max_frames;
};

struct StreamStats {
  std::uint64_t frames_played = 0;
  std::uint64_t underruns = 0;
  std::uint64_t clipped_samples = 0;
  double max_render_ms = 0.0;
};

class AudioSink;

/// Render thread feeding a lock-free frame ring; the sink's callback thread
/// pops one hop per deadline and repeats the previous hop on underrun.
class Engine {
 public:
  /// Throws kDevice for an unknown or unopenable device.
  Engine(std::shared_ptr<const model::Autoencoder> model, StreamConfig config);
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  const model::Autoencoder& model() const { return *model_; }
  const StreamConfig& config() const { return config_; }
  ControlChannel& control() { return control_; }

  /// Uses the live control channel unless `source` is given (it must
  /// outlive the stream).
  void start(ControlSource* source = nullptr);
  /// Blocks until max_frames were played or stop() is called.
  void wait();
  void stop();
  bool running() const { return running_.load(); }

  StreamStats stats() const;

  /// Audio-side pull of one hop; false when the previous hop was repeated.
  /// Never blocks unless `wait_for_data`.
  bool pull(std::span<float> out, bool wait_for_data);

 private:
  void render_loop(ControlSource* source);
  void sink_loop();

  std::shared_ptr<const model::Autoencoder> model_;
  StreamConfig config_;
  ControlChannel control_;
  std::unique_ptr<AudioSink> sink_;

  // Single-producer single-consumer frame ring.
  std::vector<float> ring_;
  std::unique_ptr<std::counting_semaphore<>> filled_;
  std::unique_ptr<std::counting_semaphore<>> space_;
  std::atomic<std::uint64_t> produced_{0};
  std::uint64_t consumed_ = 0;  // audio side only
  std::vector<float> last_frame_;
  std::vector<float> hop_buffer_;

  std::atomic<bool> running_{false};
  std::atomic<bool> stop_requested_{false};
  std::thread render_thread_;
  std::thread sink_thread_;

  std::atomic<std::uint64_t> played_{0};
  std::atomic<std::uint64_t> underruns_{0};
  std::atomic<std::uint64_t> clipped_{0};
  std::atomic<double> max_render_ms_{0.0};
  std::mutex done_mutex_;
  std::condition_variable done_cv_;
};

}  // namespace timbrelab::synth
