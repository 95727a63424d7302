// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Per-video-frame enhancement pipeline. One tick consumes one video frame's
// embedding plus the 640 audio samples (4 STFT hops) that share its 40 ms
// slot, and emits 640 output samples. The output timeline lags the input by
// the algorithmic latency, (lookahead + 1) * 640 samples, in both enhanced
// and bypass modes.

#ifndef AVSE_STREAM_H_
#define AVSE_STREAM_H_

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "avse/avsync.h"
#include "avse/dsp.h"
#include "avse/embeddings.h"
#include "avse/masknet.h"

namespace avse {

inline constexpr int kTickSamples = 640;
inline constexpr double kDeadlineMs = 40.0;

// Produces one mask frame per audio frame, strictly in frame order.
class MaskEstimator {
 public:
  virtual ~MaskEstimator() = default;
  virtual int visual_dim() const = 0;
  virtual void Reset() = 0;
  virtual void Estimate(int64_t frame, std::span<const Complex> noisy,
                        std::span<const float> compressed,
                        std::span<const float> visual,
                        std::span<float> mask) = 0;
};

class NetworkMaskEstimator : public MaskEstimator {
 public:
  explicit NetworkMaskEstimator(std::shared_ptr<const ModelWeights> weights);

  int visual_dim() const override { return net_.config().visual_dim; }
  void Reset() override { state_ = net_.NewState(); }
  void Estimate(int64_t frame, std::span<const Complex> noisy,
                std::span<const float> compressed,
                std::span<const float> visual, std::span<float> mask) override;

 private:
  MaskNet net_;
  NetState state_;
};

struct EngineOptions {
  int lookahead = kDefaultLookahead;
  double compression = 0.3;
  bool enhancement_enabled = true;
  StftParams stft;
};

struct MaskFrameRecord {
  int64_t frame;
  std::vector<float> mask;
  std::vector<Complex> noisy;
};

struct TickOutput {
  std::vector<double> samples;  // kTickSamples values
  // Masks computed during this tick, in frame order.
  std::vector<MaskFrameRecord> masks;
  bool enhanced = true;
};

// Streaming processor. Owns all mutable pipeline state; single-threaded.
class StreamEngine {
 public:
  StreamEngine(std::unique_ptr<MaskEstimator> estimator, EngineOptions options);

  // Video frame indices must run 0, 1, 2, ...
  TickOutput Push(std::span<const double> audio,
                  std::span<const float> embedding);

  // Takes effect at the next Push.
  void set_enhancement_enabled(bool enabled) { pending_enabled_ = enabled; }
  bool enhancement_enabled() const { return pending_enabled_; }

  int64_t ticks() const { return next_video_; }
  int64_t latency_samples() const { return latency_samples_; }
  const EngineOptions& options() const { return options_; }
  void Reset();

 private:
  struct PendingFrame {
    std::vector<Complex> spec;
    std::vector<float> compressed;
  };
  double InputAt(int64_t n) const;
  void AnalyzeAvailable();
  void SynthesizeReady(TickOutput& out);
  void Trim();

  std::unique_ptr<MaskEstimator> estimator_;
  EngineOptions options_;
  FrameTransform transform_;
  LookaheadBuffer lookahead_;
  int64_t latency_samples_;
  bool pending_enabled_;

  // Input samples [input_base_, input_base_ + input_.size()).
  std::deque<double> input_;
  int64_t input_base_ = 0;
  int64_t received_ = 0;

  int64_t next_analysis_ = 0;     // next STFT frame to analyze
  std::deque<PendingFrame> pending_;  // analyzed, awaiting visual
  int64_t next_synthesis_ = 0;    // next STFT frame to mask + synthesize
  std::deque<std::vector<float>> visual_;  // emitted embeddings, by index
  int64_t visual_base_ = 0;
  int64_t visual_ready_ = 0;      // video frames with a released embedding

  // WOLA accumulators for input samples [ola_base_, ...).
  std::deque<double> ola_num_;
  std::deque<double> ola_den_;
  int64_t ola_base_ = 0;

  int64_t next_video_ = 0;
  int64_t next_output_ = 0;  // next output sample index
};

// ---------------------------------------------------------------------------
// Offline reference path

struct OfflineResult {
  Waveform enhanced;  // same length as the input, delayed by the latency
  RealMatrix masks;   // frames x bins (empty in bypass)
};

// Whole-signal STFT, per-frame masks with the same causal alignment as the
// streaming path, whole-signal ISTFT, then the algorithmic delay. Requires
// ceil(duration * 25) embeddings.
OfflineResult RunOffline(const Waveform& mixture,
                         const VisualEmbeddingSequence& embeddings,
                         MaskEstimator& estimator,
                         const EngineOptions& options = {});

int64_t RequiredVideoFrames(size_t num_samples);

// ---------------------------------------------------------------------------
// Telemetry

struct Telemetry {
  int64_t ticks_processed = 0;
  double audio_seconds = 0.0;
  double rtf = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double max_ms = 0.0;
  int64_t deadline_misses = 0;
  int64_t stalls = 0;
  double mask_mean = 0.0;
  double mask_min = 0.0;
  double mask_max = 0.0;
  double algorithmic_latency_ms = 120.0;
  bool enhancement_enabled = true;
  bool running = false;
  bool stopped = false;
};

// Rolling per-tick timing. Percentiles cover the most recent `window` ticks;
// totals and max cover everything.
class TickStats {
 public:
  explicit TickStats(size_t window = 1500, double deadline_ms = kDeadlineMs);

  void Record(double processing_ms);
  void RecordMasks(std::span<const MaskFrameRecord> masks);
  void RecordStall() { ++stalls_; }
  void Fill(Telemetry& t) const;

 private:
  size_t window_;
  double deadline_ms_;
  std::vector<double> recent_;
  size_t next_ = 0;
  int64_t ticks_ = 0;
  double total_ms_ = 0.0;
  double max_ms_ = 0.0;
  int64_t misses_ = 0;
  int64_t stalls_ = 0;
  double mask_mean_ = 0.0, mask_min_ = 0.0, mask_max_ = 0.0;
};

// ---------------------------------------------------------------------------
// Streaming driver

struct AvChunk {
  int64_t video_index = 0;
  std::vector<double> audio;      // kTickSamples samples
  std::vector<float> embedding;
};

struct Stall {};
struct EndOfStream {};
using SourceEvent = std::variant<AvChunk, Stall, EndOfStream>;

// Returns the next chunk, Stall when nothing arrived within the watchdog
// window, or EndOfStream.
using ChunkSource = std::function<SourceEvent()>;
using ChunkSink = std::function<void(std::span<const double>)>;
using TickObserver =
    std::function<void(const TickOutput&, double processing_ms)>;

// Pulls chunks until EndOfStream. A stall emits one tick of silence and is
// counted; the pipeline itself does not advance.
Telemetry RunStreaming(StreamEngine& engine, const ChunkSource& source,
                       const ChunkSink& sink,
                       const TickObserver& observer = nullptr);

// Chunks a waveform + embedding sequence into a source. The tail shorter
// than one tick is zero-padded.
ChunkSource MakeBufferSource(const Waveform& wave,
                             const VisualEmbeddingSequence& embeddings);

// Processes `duration_s` of deterministic synthetic input as fast as
// possible and reports per-tick timing.
Telemetry Bench(std::shared_ptr<const ModelWeights> weights, double duration_s,
                uint64_t seed = 0);

}  // namespace avse

#endif  // AVSE_STREAM_H_
