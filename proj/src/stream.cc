// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avse/stream.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "avse/errors.h"
#include "avse/rng.h"

namespace avse {

namespace {

// Shared by the offline and streaming paths so both feed the network
// bit-identical inputs.
void CompressFrame(std::span<const Complex> spec, double p,
                   std::span<float> out) {
  for (size_t f = 0; f < spec.size(); ++f)
    out[f] = static_cast<float>(std::pow(std::abs(spec[f]), p));
}

double NowMs() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(
             clock::now().time_since_epoch())
      .count();
}

}  // namespace

// ---------------------------------------------------------------------------

NetworkMaskEstimator::NetworkMaskEstimator(
    std::shared_ptr<const ModelWeights> weights)
    : net_(std::move(weights)), state_(net_.NewState()) {}

void NetworkMaskEstimator::Estimate(int64_t frame, std::span<const Complex>,
                                    std::span<const float> compressed,
                                    std::span<const float> visual,
                                    std::span<float> mask) {
  if (frame != state_.frames_seen)
    throw ProtocolError("mask frames must be estimated in order");
  net_.PredictMask(state_, compressed, visual, mask);
}

// ---------------------------------------------------------------------------

StreamEngine::StreamEngine(std::unique_ptr<MaskEstimator> estimator,
                           EngineOptions options)
    : estimator_(std::move(estimator)),
      options_(options),
      transform_(options.stft),
      lookahead_(estimator_ ? estimator_->visual_dim() : 1, options.lookahead),
      latency_samples_(static_cast<int64_t>(options.lookahead + 1) *
                       kTickSamples),
      pending_enabled_(options.enhancement_enabled) {
  if (!estimator_) throw std::invalid_argument("null mask estimator");
  if (options.stft.hop * kAudioFramesPerVideoFrame != kTickSamples)
    throw std::invalid_argument("hop must be 160 samples (4 per video frame)");
  Reset();
}

void StreamEngine::Reset() {
  estimator_->Reset();
  lookahead_.Reset();
  input_.clear();
  input_base_ = 0;
  received_ = 0;
  next_analysis_ = 0;
  pending_.clear();
  next_synthesis_ = 0;
  visual_.clear();
  visual_base_ = 0;
  visual_ready_ = 0;
  ola_num_.clear();
  ola_den_.clear();
  ola_base_ = 0;
  next_video_ = 0;
  next_output_ = 0;
}

double StreamEngine::InputAt(int64_t n) const {
  return input_[static_cast<size_t>(n - input_base_)];
}

void StreamEngine::AnalyzeAvailable() {
  const StftParams& p = options_.stft;
  std::vector<double> frame(p.win_len);
  while (next_analysis_ * p.hop + p.win_len <= received_) {
    const int64_t start = next_analysis_ * p.hop;
    for (int k = 0; k < p.win_len; ++k) frame[k] = InputAt(start + k);
    PendingFrame pf;
    pf.spec.resize(p.bins());
    pf.compressed.resize(p.bins());
    transform_.Analyze(frame, pf.spec);
    CompressFrame(pf.spec, options_.compression, pf.compressed);
    pending_.push_back(std::move(pf));
    ++next_analysis_;
  }
}

void StreamEngine::SynthesizeReady(TickOutput& out) {
  const StftParams& p = options_.stft;
  const auto& window = transform_.window();
  std::vector<double> frame(p.win_len);
  std::vector<float> mask(p.bins());
  while (next_synthesis_ < next_analysis_ &&
         next_synthesis_ / kAudioFramesPerVideoFrame < visual_ready_) {
    const int64_t t = next_synthesis_;
    PendingFrame& pf = pending_.front();
    const auto& visual =
        visual_[static_cast<size_t>(t / kAudioFramesPerVideoFrame -
                                    visual_base_)];
    estimator_->Estimate(t, pf.spec, pf.compressed, visual, mask);

    MaskFrameRecord rec{t, mask, pf.spec};
    for (int f = 0; f < p.bins(); ++f) pf.spec[f] *= static_cast<double>(mask[f]);
    transform_.Synthesize(pf.spec, frame);

    const int64_t start = t * p.hop;
    const size_t need = static_cast<size_t>(start + p.win_len - ola_base_);
    if (ola_num_.size() < need) {
      ola_num_.resize(need, 0.0);
      ola_den_.resize(need, 0.0);
    }
    const size_t off = static_cast<size_t>(start - ola_base_);
    for (int k = 0; k < p.win_len; ++k) {
      ola_num_[off + k] += frame[k];
      ola_den_[off + k] += window[k] * window[k];
    }
    out.masks.push_back(std::move(rec));
    pending_.pop_front();
    ++next_synthesis_;
  }
}

void StreamEngine::Trim() {
  const StftParams& p = options_.stft;
  const int64_t emitted_input = next_output_ - latency_samples_;
  const int64_t keep_input = std::min(next_analysis_ * p.hop, emitted_input);
  while (input_base_ < keep_input && !input_.empty()) {
    input_.pop_front();
    ++input_base_;
  }
  while (ola_base_ < emitted_input && !ola_num_.empty()) {
    ola_num_.pop_front();
    ola_den_.pop_front();
    ++ola_base_;
  }
  const int64_t first_needed_video = next_synthesis_ / kAudioFramesPerVideoFrame;
  while (visual_base_ < first_needed_video && !visual_.empty()) {
    visual_.pop_front();
    ++visual_base_;
  }
}

TickOutput StreamEngine::Push(std::span<const double> audio,
                              std::span<const float> embedding) {
  if (audio.size() != static_cast<size_t>(kTickSamples))
    throw std::invalid_argument("each tick needs exactly 640 audio samples");
  if (static_cast<int>(embedding.size()) != estimator_->visual_dim())
    throw std::invalid_argument("embedding dimension mismatch");
  for (double s : audio)
    if (!std::isfinite(s))
      throw std::invalid_argument("non-finite audio sample");

  TickOutput out;
  out.enhanced = pending_enabled_;
  input_.insert(input_.end(), audio.begin(), audio.end());
  received_ += kTickSamples;
  AnalyzeAvailable();

  if (auto emitted = lookahead_.Push(next_video_, embedding)) {
    visual_.push_back(std::move(emitted->embedding));
    visual_ready_ = emitted->index + 1;
  }
  ++next_video_;
  SynthesizeReady(out);

  const StftParams& p = options_.stft;
  out.samples.resize(kTickSamples);
  for (int i = 0; i < kTickSamples; ++i) {
    const int64_t n = next_output_ + i - latency_samples_;
    if (n < 0) {
      out.samples[i] = 0.0;
    } else if (!out.enhanced) {
      out.samples[i] = InputAt(n);
    } else {
      if (n / p.hop >= next_synthesis_)
        throw std::logic_error("output sample not yet finalized");
      const size_t off = static_cast<size_t>(n - ola_base_);
      out.samples[i] = ola_num_[off] / std::max(ola_den_[off], kWolaFloor);
    }
  }
  next_output_ += kTickSamples;
  Trim();
  return out;
}

// ---------------------------------------------------------------------------

int64_t RequiredVideoFrames(size_t num_samples) {
  return static_cast<int64_t>((num_samples + kTickSamples - 1) / kTickSamples);
}

OfflineResult RunOffline(const Waveform& mixture,
                         const VisualEmbeddingSequence& embeddings,
                         MaskEstimator& estimator,
                         const EngineOptions& options) {
  CheckFinite(mixture);
  const int64_t need = RequiredVideoFrames(mixture.size());
  if (embeddings.count < need)
    throw CoverageError("embeddings cover " + std::to_string(embeddings.count) +
                        " video frames, audio needs " + std::to_string(need));
  if (embeddings.dim != estimator.visual_dim())
    throw std::invalid_argument("embedding dimension mismatch");

  const int64_t latency =
      static_cast<int64_t>(options.lookahead + 1) * kTickSamples;
  OfflineResult result;
  result.enhanced.sample_rate = mixture.sample_rate;
  result.enhanced.samples.assign(mixture.size(), 0.0);
  auto place = [&](const std::vector<double>& y) {
    for (size_t n = 0; n < y.size(); ++n) {
      const size_t dst = n + static_cast<size_t>(latency);
      if (dst >= result.enhanced.size()) break;
      result.enhanced.samples[dst] = y[n];
    }
  };
  if (!options.enhancement_enabled) {
    place(mixture.samples);
    return result;
  }

  Spectrogram spec = Stft(mixture, options.stft);
  const VisualEmbeddingSequence visual = UpsampleToAudioRate(embeddings);
  estimator.Reset();
  result.masks = RealMatrix(spec.frames, spec.bins);
  std::vector<float> compressed(spec.bins), mask(spec.bins);
  for (int t = 0; t < spec.frames; ++t) {
    CompressFrame(spec.frame(t), options.compression, compressed);
    estimator.Estimate(t, spec.frame(t), compressed, visual.vector(t), mask);
    for (int f = 0; f < spec.bins; ++f) result.masks.at(t, f) = mask[f];
  }
  place(Istft(ApplyMask(result.masks, spec)).samples);
  return result;
}

// ---------------------------------------------------------------------------

TickStats::TickStats(size_t window, double deadline_ms)
    : window_(std::max<size_t>(window, 1)), deadline_ms_(deadline_ms) {}

void TickStats::Record(double ms) {
  if (recent_.size() < window_) {
    recent_.push_back(ms);
  } else {
    recent_[next_] = ms;
    next_ = (next_ + 1) % window_;
  }
  ++ticks_;
  total_ms_ += ms;
  max_ms_ = std::max(max_ms_, ms);
  if (ms > deadline_ms_) ++misses_;
}

void TickStats::RecordMasks(std::span<const MaskFrameRecord> masks) {
  if (masks.empty()) return;
  double sum = 0.0, lo = std::numeric_limits<double>::infinity(),
         hi = -std::numeric_limits<double>::infinity();
  size_t n = 0;
  for (const auto& m : masks) {
    for (float v : m.mask) {
      sum += v;
      lo = std::min(lo, static_cast<double>(v));
      hi = std::max(hi, static_cast<double>(v));
    }
    n += m.mask.size();
  }
  mask_mean_ = sum / n;
  mask_min_ = lo;
  mask_max_ = hi;
}

void TickStats::Fill(Telemetry& t) const {
  t.ticks_processed = ticks_;
  t.audio_seconds = ticks_ * kVideoFrameMs / 1000.0;
  t.rtf = ticks_ > 0 ? total_ms_ / (ticks_ * kVideoFrameMs) : 0.0;
  t.max_ms = max_ms_;
  t.deadline_misses = misses_;
  t.stalls = stalls_;
  t.mask_mean = mask_mean_;
  t.mask_min = mask_min_;
  t.mask_max = mask_max_;
  if (recent_.empty()) {
    t.p50_ms = t.p95_ms = 0.0;
    return;
  }
  std::vector<double> sorted = recent_;
  std::sort(sorted.begin(), sorted.end());
  auto rank = [&](double q) {
    size_t idx = static_cast<size_t>(std::ceil(q * sorted.size()));
    return sorted[std::clamp<size_t>(idx, 1, sorted.size()) - 1];
  };
  t.p50_ms = rank(0.50);
  t.p95_ms = rank(0.95);
}

// ---------------------------------------------------------------------------

Telemetry RunStreaming(StreamEngine& engine, const ChunkSource& source,
                       const ChunkSink& sink, const TickObserver& observer) {
  TickStats stats;
  const std::vector<double> silence(kTickSamples, 0.0);
  for (;;) {
    SourceEvent ev = source();
    if (std::holds_alternative<EndOfStream>(ev)) break;
    if (std::holds_alternative<Stall>(ev)) {
      stats.RecordStall();
      sink(silence);
      continue;
    }
    auto& chunk = std::get<AvChunk>(ev);
    if (chunk.video_index != engine.ticks())
      throw ProtocolError("chunk " + std::to_string(chunk.video_index) +
                          " out of order, expected " +
                          std::to_string(engine.ticks()));
    const double t0 = NowMs();
    TickOutput out = engine.Push(chunk.audio, chunk.embedding);
    const double ms = NowMs() - t0;
    stats.Record(ms);
    stats.RecordMasks(out.masks);
    sink(out.samples);
    if (observer) observer(out, ms);
  }
  Telemetry t;
  stats.Fill(t);
  t.algorithmic_latency_ms = AlgorithmicLatencyMs(engine.options().lookahead);
  t.enhancement_enabled = engine.enhancement_enabled();
  t.stopped = true;
  return t;
}

ChunkSource MakeBufferSource(const Waveform& wave,
                             const VisualEmbeddingSequence& embeddings) {
  const int64_t ticks = RequiredVideoFrames(wave.size());
  if (embeddings.count < ticks)
    throw CoverageError("embeddings cover " + std::to_string(embeddings.count) +
                        " video frames, audio needs " + std::to_string(ticks));
  auto w = std::make_shared<const Waveform>(wave);
  auto e = std::make_shared<const VisualEmbeddingSequence>(embeddings);
  auto next = std::make_shared<int64_t>(0);
  return [w, e, next, ticks]() -> SourceEvent {
    if (*next >= ticks) return EndOfStream{};
    AvChunk c;
    c.video_index = *next;
    c.audio.assign(kTickSamples, 0.0);
    const size_t start = static_cast<size_t>(*next) * kTickSamples;
    const size_t end = std::min(w->size(), start + kTickSamples);
    std::copy(w->samples.begin() + start, w->samples.begin() + end,
              c.audio.begin());
    auto v = e->vector(static_cast<int>(*next));
    c.embedding.assign(v.begin(), v.end());
    ++*next;
    return c;
  };
}

Telemetry Bench(std::shared_ptr<const ModelWeights> weights, double duration_s,
                uint64_t seed) {
  const int visual_dim = weights->config.visual_dim;
  StreamEngine engine(std::make_unique<NetworkMaskEstimator>(std::move(weights)),
                      EngineOptions{});
  const auto ticks = static_cast<int64_t>(std::llround(
      std::max(0.0, duration_s) * 1000.0 / kVideoFrameMs));
  SplitMix64 rng(seed);
  SyntheticEmbeddingProvider provider(visual_dim, static_cast<int64_t>(seed));
  TickStats stats(static_cast<size_t>(std::max<int64_t>(ticks, 1)));
  std::vector<double> audio(kTickSamples);
  for (int64_t i = 0; i < ticks; ++i) {
    for (double& s : audio) s = rng.Uniform(-0.5, 0.5);
    const auto emb = *provider.Frame(i);
    const double t0 = NowMs();
    TickOutput out = engine.Push(audio, emb);
    stats.Record(NowMs() - t0);
    stats.RecordMasks(out.masks);
  }
  Telemetry t;
  stats.Fill(t);
  t.algorithmic_latency_ms = AlgorithmicLatencyMs(kDefaultLookahead);
  t.stopped = true;
  return t;
}

}  // namespace avse
