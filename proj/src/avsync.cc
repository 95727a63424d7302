// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avse/avsync.h"

#include <cmath>
#include <stdexcept>
#include <string>

#include "avse/errors.h"

namespace avse {

LookaheadBuffer::LookaheadBuffer(int dim, int lookahead)
    : dim_(dim), lookahead_(lookahead) {
  if (dim < 1) throw std::invalid_argument("embedding dimension must be >= 1");
  if (lookahead < 0) throw std::invalid_argument("lookahead must be >= 0");
  Reset();
}

void LookaheadBuffer::Reset() {
  slots_.assign(capacity(), std::vector<float>(dim_, 0.0f));
  pushed_slots_ = 0;
  next_index_ = 0;
  next_emit_ = 0;
}

std::optional<EmittedEmbedding> LookaheadBuffer::Push(
    int64_t index, std::span<const float> embedding) {
  if (index != next_index_)
    throw ProtocolError("video frame " + std::to_string(index) +
                        " pushed out of order, expected " +
                        std::to_string(next_index_));
  if (static_cast<int>(embedding.size()) != dim_)
    throw std::invalid_argument("embedding dimension mismatch");
  slots_.pop_front();
  slots_.emplace_back(embedding.begin(), embedding.end());
  if (pushed_slots_ < slots_.size()) ++pushed_slots_;
  ++next_index_;
  if (index < lookahead_) return std::nullopt;
  EmittedEmbedding out{index - lookahead_, slots_[lookahead_]};
  next_emit_ = out.index + 1;
  return out;
}

std::vector<std::vector<float>> LookaheadBuffer::Window() const {
  return {slots_.begin(), slots_.end()};
}

VisualEmbeddingSequence UpsampleToAudioRate(
    const VisualEmbeddingSequence& seq) {
  if (seq.fps != kVideoFps)
    throw std::invalid_argument("upsampling expects a 25 fps sequence");
  VisualEmbeddingSequence out;
  out.dim = seq.dim;
  out.fps = seq.fps * kAudioFramesPerVideoFrame;
  out.count = seq.count * kAudioFramesPerVideoFrame;
  out.source_id = seq.source_id;
  out.data.reserve(static_cast<size_t>(out.count) * out.dim);
  for (int i = 0; i < seq.count; ++i) {
    auto v = seq.vector(i);
    for (int k = 0; k < kAudioFramesPerVideoFrame; ++k)
      out.data.insert(out.data.end(), v.begin(), v.end());
  }
  return out;
}

double AlgorithmicLatencyMs(int lookahead_frames, double video_frame_ms) {
  if (lookahead_frames < 0 || video_frame_ms < 0)
    throw std::invalid_argument("latency inputs must be nonnegative");
  return (lookahead_frames + 1) * video_frame_ms;
}

int64_t AlgorithmicLatencySamples(int lookahead_frames, double video_frame_ms,
                                  int sample_rate) {
  return std::llround(AlgorithmicLatencyMs(lookahead_frames, video_frame_ms) *
                      sample_rate / 1000.0);
}

}  // namespace avse
