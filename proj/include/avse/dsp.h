// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// STFT analysis and weighted overlap-add synthesis with left-aligned
// (causal) framing: frame t covers samples [t * hop, t * hop + win_len),
// zero-padded to nfft before the transform.

#ifndef AVSE_DSP_H_
#define AVSE_DSP_H_

#include <complex>
#include <memory>
#include <span>
#include <vector>

#include "avse/waveform.h"

namespace avse {

using Complex = std::complex<double>;

struct StftParams {
  int win_len = 400;
  int hop = 160;
  int nfft = 512;

  int bins() const { return nfft / 2 + 1; }
  // Samples shared by consecutive frames.
  int overlap() const { return win_len - hop; }
};

inline constexpr int kBins = 257;
inline constexpr double kWolaFloor = 1e-8;

// Row-major frames x bins complex matrix.
struct Spectrogram {
  std::vector<Complex> data;
  int frames = 0;
  int bins = kBins;
  StftParams params;
  int sample_rate = kSampleRate;

  std::span<Complex> frame(int t) {
    return {data.data() + static_cast<size_t>(t) * bins,
            static_cast<size_t>(bins)};
  }
  std::span<const Complex> frame(int t) const {
    return {data.data() + static_cast<size_t>(t) * bins,
            static_cast<size_t>(bins)};
  }
  Complex& at(int t, int f) { return data[static_cast<size_t>(t) * bins + f]; }
  const Complex& at(int t, int f) const {
    return data[static_cast<size_t>(t) * bins + f];
  }
};

// Real-valued frames x bins matrix (magnitudes, masks).
struct RealMatrix {
  std::vector<double> data;
  int rows = 0;
  int cols = 0;

  RealMatrix() = default;
  RealMatrix(int r, int c, double fill = 0.0)
      : data(static_cast<size_t>(r) * c, fill), rows(r), cols(c) {}

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return data[static_cast<size_t>(r) * cols + c];
  }
  std::span<double> row(int r) {
    return {data.data() + static_cast<size_t>(r) * cols,
            static_cast<size_t>(cols)};
  }
  std::span<const double> row(int r) const {
    return {data.data() + static_cast<size_t>(r) * cols,
            static_cast<size_t>(cols)};
  }
};

struct CompressedMagnitude {
  RealMatrix values;
  double p = 0.3;
};

// Periodic Hann: w[k] = 0.5 * (1 - cos(2 pi k / length)).
std::vector<double> MakeHannWindow(int length);

int NumFrames(size_t num_samples, const StftParams& params = {});

Spectrogram Stft(const Waveform& wave, const StftParams& params = {});

RealMatrix Magnitude(const Spectrogram& spec);

// Elementwise mag^p. Throws std::invalid_argument on negative entries or
// p outside (0, 1].
CompressedMagnitude Compress(const RealMatrix& mag, double p = 0.3);
void CompressInPlace(std::span<double> mag, double p = 0.3);

// out[t, f] = mask[t, f] * noisy[t, f]; scaling by a nonnegative real keeps
// the noisy phase.
Spectrogram ApplyMask(const RealMatrix& mask, const Spectrogram& noisy);

// Weighted overlap-add with the analysis window as synthesis window and
// per-sample normalization by the accumulated squared window (floored at
// kWolaFloor). Output length is (frames - 1) * hop + win_len.
Waveform Istft(const Spectrogram& spec);

// Per-sample WOLA denominator for a stream of `frames` frames.
std::vector<double> WolaDenominator(int frames, const StftParams& params = {});

// Single-frame analysis/synthesis kernel shared by the batch and streaming
// paths. Not thread-safe; use one instance per thread.
class FrameTransform {
 public:
  explicit FrameTransform(const StftParams& params = {});
  ~FrameTransform();
  FrameTransform(FrameTransform&&) noexcept;
  FrameTransform& operator=(FrameTransform&&) noexcept;

  const StftParams& params() const { return params_; }
  const std::vector<double>& window() const { return window_; }

  // samples.size() == win_len; out.size() == bins.
  void Analyze(std::span<const double> samples, std::span<Complex> out);
  // Inverse transform of one frame, multiplied by the synthesis window.
  // out.size() == win_len.
  void Synthesize(std::span<const Complex> bins, std::span<double> out);

 private:
  struct Plans;
  StftParams params_;
  std::vector<double> window_;
  std::unique_ptr<Plans> plans_;
};

}  // namespace avse

#endif  // AVSE_DSP_H_
