// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef AVSE_EVALKIT_H_
#define AVSE_EVALKIT_H_

#include <span>
#include <string>

#include "avse/dsp.h"

namespace avse {

struct PsaBreakdown {
  double mag_mse = 0.0;
  double complex_mse = 0.0;
  double total = 0.0;
};

// With S_hat = mask * noisy (noisy phase kept):
//   mag_mse     = mean((|S_hat| - |S|)^2)
//   complex_mse = mean(|S_hat - S|^2)
//   total       = mag_mse + complex_mse
// Means run over frames x bins. Equal term weights.
PsaBreakdown PsaLoss(const RealMatrix& mask, const Spectrogram& noisy,
                     const Spectrogram& clean);

// min(1, |S| / |Y|) per bin; 0 where |Y| == 0.
RealMatrix ClippedIdealMask(const Spectrogram& noisy, const Spectrogram& clean);

inline constexpr double kSnrCapDb = 99.0;

struct SnrImprovement {
  double input_snr_db = 0.0;
  double output_snr_db = 0.0;
  double delta_db = 0.0;
};

// SNR of (mixture vs target) and (enhanced vs target), residual taken as
// signal - target. All three must already be time-aligned and of equal
// length. A zero residual reports the 99 dB cap.
SnrImprovement SnrImprove(std::span<const double> mixture,
                          std::span<const double> enhanced,
                          std::span<const double> target);

// Aligns an engine output (delayed by `delay` samples) against the
// undelayed mixture/target before scoring.
SnrImprovement SnrImproveDelayed(std::span<const double> mixture,
                                 std::span<const double> enhanced_delayed,
                                 std::span<const double> target, size_t delay);

struct ClipReport {
  std::string clip;
  SnrImprovement snr;
  bool has_psa = false;
  PsaBreakdown psa;
};

// One JSON object, single line.
std::string ReportJsonLine(const ClipReport& report);

}  // namespace avse

#endif  // AVSE_EVALKIT_H_
