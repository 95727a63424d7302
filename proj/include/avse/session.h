// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Live session: an ingest thread turns an audio source plus an embedding
// provider into per-video-frame chunks, and a processor thread runs the
// StreamEngine against them. The processor owns all pipeline state; other
// threads only flip the atomic enhancement flag, read telemetry snapshots,
// and receive events through non-blocking listeners.

#ifndef AVSE_SESSION_H_
#define AVSE_SESSION_H_

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "avse/bounded_queue.h"
#include "avse/stream.h"

namespace avse {

struct AudioSourceSpec {
  enum class Kind { kWav, kPcmStdin, kPcmSocket, kSynthetic };
  Kind kind = Kind::kSynthetic;
  std::string path;   // kWav
  std::string bind;   // kPcmSocket, host:port
  bool loop = false;  // kWav: restart at end of file
  bool realtime = true;  // kWav / kSynthetic: pace at 40 ms per frame
  uint64_t seed = 0;  // kSynthetic
};

struct EmbeddingSourceSpec {
  enum class Kind { kFile, kSynthetic };
  Kind kind = Kind::kSynthetic;
  std::string path;
  int64_t seed = 0;
  int dim = kDefaultEmbeddingDim;
};

struct OutputSpec {
  enum class Kind { kNone, kWav, kPcmStdout };
  Kind kind = Kind::kNone;
  std::string path;
};

struct SessionConfig {
  std::string model_path;           // RVW1 file; empty uses weights_preset
  std::string weights_preset = "zero";
  EmbeddingSourceSpec embeddings;
  AudioSourceSpec audio;
  OutputSpec output;
  bool enhancement_enabled = true;
  int chunk_frames = 4;  // audio frames per processing wake; multiple of 4
  int telemetry_period_ms = 200;
  int watchdog_ms = 500;
};

// Builds a config from a set_session payload on top of `base`. Recognized
// keys: audio ("synthetic" | "stdin" | "tcp:host:port" | WAV path), loop,
// realtime, embeddings ("synthetic:<seed>" | RVE1 path), model (RVW1 path
// or "preset:<name>"), chunk_frames.
SessionConfig ConfigFromJson(const nlohmann::json& payload,
                             const SessionConfig& base);

// 64 log-spaced bands over the 257 bins. Band b covers
// [edges[b], edges[b + 1]).
std::vector<int> DisplayBandEdges();
// Mean power per band in dB re a full-scale sine, clamped to [-80, 0].
std::vector<float> DownsampleSpectrumDb(std::span<const Complex> frame);
std::vector<float> DownsampleMask(std::span<const float> mask);
// Per-bin power in the same dB scale as DownsampleSpectrumDb.
std::vector<float> SpectrumDb(std::span<const Complex> frame);

struct SessionEvent {
  enum class Type { kSpectrum, kMask, kStall };
  Type type;
  int64_t frame = 0;        // audio frame (10 ms) index
  int64_t video_frame = 0;
  std::vector<float> bins;  // 64 values for spectrum / mask
  std::vector<float> full;  // all 257 bins, same units
};

class Session {
 public:
  using Listener = std::function<void(const SessionEvent&)>;

  explicit Session(SessionConfig config);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  void Start();
  void Stop();
  // Stops, swaps the configuration, and restarts if it was running. The old
  // configuration stays in place when the new one fails to load.
  void Reconfigure(SessionConfig config);

  void SetEnhancement(bool enabled) { enhancement_.store(enabled); }
  bool enhancement_enabled() const { return enhancement_.load(); }

  // Point-in-time copy; never waits on the processor.
  Telemetry Snapshot() const;
  bool running() const { return running_.load(); }
  // Blocks until the processor exits (finite sources) or Stop() is called.
  void WaitFinished();

  // Listeners run on the processor thread and must not block.
  int AddListener(Listener listener);
  void RemoveListener(int id);

  SessionConfig config() const;

 private:
  struct Runtime;
  void IngestLoop(Runtime& rt);
  void ProcessLoop(Runtime& rt);
  void Publish(const TickStats& stats, bool stopped);
  void Emit(const SessionEvent& ev);

  mutable std::mutex control_mu_;
  SessionConfig config_;
  std::shared_ptr<const ModelWeights> weights_;
  std::unique_ptr<EmbeddingProvider> provider_;
  std::unique_ptr<Runtime> runtime_;

  std::atomic<bool> enhancement_;
  std::atomic<bool> running_{false};

  mutable std::mutex snapshot_mu_;
  std::shared_ptr<const Telemetry> snapshot_;

  std::mutex listeners_mu_;
  std::map<int, Listener> listeners_;
  int next_listener_ = 0;

  std::mutex finished_mu_;
  std::condition_variable finished_cv_;
};

}  // namespace avse

#endif  // AVSE_SESSION_H_
