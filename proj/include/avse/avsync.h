// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef AVSE_AVSYNC_H_
#define AVSE_AVSYNC_H_

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "avse/embeddings.h"

namespace avse {

inline constexpr int kAudioFramesPerVideoFrame = 4;  // 100 fps / 25 fps
inline constexpr double kVideoFrameMs = 40.0;
inline constexpr int kDefaultLookahead = 2;

struct EmittedEmbedding {
  int64_t index;
  std::vector<float> embedding;
};

// Holds the visual encoder's receptive field (2 * lookahead + 1 frames).
// Frame i is released only once frames i+1 .. i+lookahead have arrived, so
// the released frame is always the middle slot of the window. Slots before
// the first pushed frame are zero vectors.
class LookaheadBuffer {
 public:
  explicit LookaheadBuffer(int dim, int lookahead = kDefaultLookahead);

  // Indices must be 0, 1, 2, ... ; anything else throws ProtocolError.
  std::optional<EmittedEmbedding> Push(int64_t index,
                                       std::span<const float> embedding);

  // Current receptive-field window, oldest first. The middle entry is the
  // frame most recently emitted.
  std::vector<std::vector<float>> Window() const;

  int capacity() const { return 2 * lookahead_ + 1; }
  int lookahead() const { return lookahead_; }
  int occupied() const { return static_cast<int>(pushed_slots_); }
  int64_t next_emit_index() const { return next_emit_; }
  void Reset();

 private:
  int dim_;
  int lookahead_;
  std::deque<std::vector<float>> slots_;
  size_t pushed_slots_ = 0;
  int64_t next_index_ = 0;
  int64_t next_emit_ = 0;
};

// Hold upsampling 25 -> 100 fps: out[4i + k] = in[i].
VisualEmbeddingSequence UpsampleToAudioRate(const VisualEmbeddingSequence& seq);

inline int64_t VideoFrameForAudioFrame(int64_t audio_frame) {
  return audio_frame / kAudioFramesPerVideoFrame;
}

// (lookahead + 1) * frame_ms: the lookahead plus one frame of blocking.
double AlgorithmicLatencyMs(int lookahead_frames,
                            double video_frame_ms = kVideoFrameMs);
int64_t AlgorithmicLatencySamples(int lookahead_frames,
                                  double video_frame_ms = kVideoFrameMs,
                                  int sample_rate = 16000);

}  // namespace avse

#endif  // AVSE_AVSYNC_H_
