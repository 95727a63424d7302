// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avse/dsp.h"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace avse {

namespace {

// FFTW planning is not thread-safe; execution on distinct plans is.
std::mutex& PlannerMutex() {
  static std::mutex m;
  return m;
}

void ValidateParams(const StftParams& p) {
  if (p.win_len < 2 || p.hop < 1 || p.nfft < p.win_len)
    throw std::invalid_argument(
        "invalid STFT parameters: need win_len >= 2, hop >= 1, "
        "nfft >= win_len");
}

}  // namespace

struct FrameTransform::Plans {
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;

  explicit Plans(int nfft) {
    std::lock_guard<std::mutex> lock(PlannerMutex());
    real = fftw_alloc_real(nfft);
    spec = fftw_alloc_complex(nfft / 2 + 1);
    forward = fftw_plan_dft_r2c_1d(nfft, real, spec, FFTW_ESTIMATE);
    inverse = fftw_plan_dft_c2r_1d(nfft, spec, real, FFTW_ESTIMATE);
  }
  ~Plans() {
    std::lock_guard<std::mutex> lock(PlannerMutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(inverse);
    fftw_free(real);
    fftw_free(spec);
  }
};

FrameTransform::FrameTransform(const StftParams& params)
    : params_(params),
      window_((ValidateParams(params), MakeHannWindow(params.win_len))),
      plans_(std::make_unique<Plans>(params.nfft)) {}

FrameTransform::~FrameTransform() = default;
FrameTransform::FrameTransform(FrameTransform&&) noexcept = default;
FrameTransform& FrameTransform::operator=(FrameTransform&&) noexcept = default;

void FrameTransform::Analyze(std::span<const double> samples,
                             std::span<Complex> out) {
  const int n = params_.nfft;
  for (int k = 0; k < params_.win_len; ++k)
    plans_->real[k] = samples[k] * window_[k];
  for (int k = params_.win_len; k < n; ++k) plans_->real[k] = 0.0;
  fftw_execute(plans_->forward);
  for (int f = 0; f < params_.bins(); ++f)
    out[f] = Complex(plans_->spec[f][0], plans_->spec[f][1]);
}

void FrameTransform::Synthesize(std::span<const Complex> bins,
                                std::span<double> out) {
  const int n = params_.nfft;
  for (int f = 0; f < params_.bins(); ++f) {
    plans_->spec[f][0] = bins[f].real();
    plans_->spec[f][1] = bins[f].imag();
  }
  // c2r assumes a Hermitian input; DC and Nyquist imaginary parts are ignored.
  fftw_execute(plans_->inverse);
  const double scale = 1.0 / n;
  for (int k = 0; k < params_.win_len; ++k)
    out[k] = plans_->real[k] * scale * window_[k];
}

std::vector<double> MakeHannWindow(int length) {
  if (length < 2)
    throw std::invalid_argument("Hann window length must be >= 2");
  std::vector<double> w(length);
  for (int k = 0; k < length; ++k)
    w[k] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * k / length));
  return w;
}

int NumFrames(size_t num_samples, const StftParams& params) {
  if (num_samples < static_cast<size_t>(params.win_len)) return 0;
  return 1 + static_cast<int>((num_samples - params.win_len) / params.hop);
}

Spectrogram Stft(const Waveform& wave, const StftParams& params) {
  CheckFinite(wave);
  FrameTransform transform(params);
  Spectrogram spec;
  spec.params = params;
  spec.bins = params.bins();
  spec.sample_rate = wave.sample_rate;
  spec.frames = NumFrames(wave.size(), params);
  spec.data.resize(static_cast<size_t>(spec.frames) * spec.bins);
  std::span<const double> samples(wave.samples);
  for (int t = 0; t < spec.frames; ++t)
    transform.Analyze(samples.subspan(static_cast<size_t>(t) * params.hop,
                                      params.win_len),
                      spec.frame(t));
  return spec;
}

RealMatrix Magnitude(const Spectrogram& spec) {
  RealMatrix mag(spec.frames, spec.bins);
  for (size_t i = 0; i < spec.data.size(); ++i)
    mag.data[i] = std::abs(spec.data[i]);
  return mag;
}

void CompressInPlace(std::span<double> mag, double p) {
  if (!(p > 0.0 && p <= 1.0))
    throw std::invalid_argument("compression exponent must be in (0, 1]");
  for (double& v : mag) {
    if (!(v >= 0.0))
      throw std::invalid_argument("compress: negative or NaN magnitude");
    v = std::pow(v, p);
  }
}

CompressedMagnitude Compress(const RealMatrix& mag, double p) {
  CompressedMagnitude out{mag, p};
  CompressInPlace(out.values.data, p);
  return out;
}

Spectrogram ApplyMask(const RealMatrix& mask, const Spectrogram& noisy) {
  if (mask.rows != noisy.frames || mask.cols != noisy.bins)
    throw std::invalid_argument("mask shape does not match spectrogram");
  Spectrogram out = noisy;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= mask.data[i];
  return out;
}

std::vector<double> WolaDenominator(int frames, const StftParams& params) {
  if (frames <= 0) return {};
  const auto w = MakeHannWindow(params.win_len);
  std::vector<double> den(
      static_cast<size_t>(frames - 1) * params.hop + params.win_len, 0.0);
  for (int t = 0; t < frames; ++t)
    for (int k = 0; k < params.win_len; ++k)
      den[static_cast<size_t>(t) * params.hop + k] += w[k] * w[k];
  return den;
}

Waveform Istft(const Spectrogram& spec) {
  Waveform out;
  out.sample_rate = spec.sample_rate;
  if (spec.frames == 0) return out;
  const StftParams& p = spec.params;
  FrameTransform transform(p);
  out.samples.assign(static_cast<size_t>(spec.frames - 1) * p.hop + p.win_len,
                     0.0);
  std::vector<double> frame(p.win_len);
  for (int t = 0; t < spec.frames; ++t) {
    transform.Synthesize(spec.frame(t), frame);
    double* dst = out.samples.data() + static_cast<size_t>(t) * p.hop;
    for (int k = 0; k < p.win_len; ++k) dst[k] += frame[k];
  }
  const auto den = WolaDenominator(spec.frames, p);
  for (size_t n = 0; n < out.samples.size(); ++n)
    out.samples[n] /= std::max(den[n], kWolaFloor);
  return out;
}

}  // namespace avse
