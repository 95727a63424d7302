// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avse/evalkit.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "avse/errors.h"

namespace avse {

PsaBreakdown PsaLoss(const RealMatrix& mask, const Spectrogram& noisy,
                     const Spectrogram& clean) {
  if (noisy.frames != clean.frames || noisy.bins != clean.bins ||
      mask.rows != noisy.frames || mask.cols != noisy.bins)
    throw std::invalid_argument("PSA loss: shape mismatch");
  PsaBreakdown out;
  const size_t n = noisy.data.size();
  if (n == 0) return out;
  double mag = 0.0, cplx = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const Complex est = mask.data[i] * noisy.data[i];
    const double dm = std::abs(est) - std::abs(clean.data[i]);
    mag += dm * dm;
    cplx += std::norm(est - clean.data[i]);
  }
  out.mag_mse = mag / n;
  out.complex_mse = cplx / n;
  out.total = out.mag_mse + out.complex_mse;
  return out;
}

RealMatrix ClippedIdealMask(const Spectrogram& noisy, const Spectrogram& clean) {
  if (noisy.frames != clean.frames || noisy.bins != clean.bins)
    throw std::invalid_argument("ideal mask: shape mismatch");
  RealMatrix m(noisy.frames, noisy.bins);
  for (size_t i = 0; i < noisy.data.size(); ++i) {
    const double y = std::abs(noisy.data[i]);
    m.data[i] = y > 0.0 ? std::min(1.0, std::abs(clean.data[i]) / y) : 0.0;
  }
  return m;
}

namespace {

double CappedSnr(std::span<const double> signal,
                 std::span<const double> target) {
  double es = 0.0, er = 0.0;
  for (size_t i = 0; i < target.size(); ++i) {
    es += target[i] * target[i];
    const double r = signal[i] - target[i];
    er += r * r;
  }
  if (es == 0.0) throw UndefinedSnrError("SNR undefined: silent target");
  if (er == 0.0) return kSnrCapDb;
  return std::min(kSnrCapDb, 10.0 * std::log10(es / er));
}

}  // namespace

SnrImprovement SnrImprove(std::span<const double> mixture,
                          std::span<const double> enhanced,
                          std::span<const double> target) {
  if (mixture.size() != target.size() || enhanced.size() != target.size())
    throw std::invalid_argument("SNR improvement: length mismatch");
  SnrImprovement out;
  out.input_snr_db = CappedSnr(mixture, target);
  out.output_snr_db = CappedSnr(enhanced, target);
  out.delta_db = out.output_snr_db - out.input_snr_db;
  return out;
}

SnrImprovement SnrImproveDelayed(std::span<const double> mixture,
                                 std::span<const double> enhanced_delayed,
                                 std::span<const double> target,
                                 size_t delay) {
  if (mixture.size() != target.size())
    throw std::invalid_argument("SNR improvement: length mismatch");
  if (enhanced_delayed.size() <= delay)
    throw std::invalid_argument("SNR improvement: output shorter than delay");
  const size_t n = std::min(target.size(), enhanced_delayed.size() - delay);
  return SnrImprove(mixture.first(n), enhanced_delayed.subspan(delay, n),
                    target.first(n));
}

std::string ReportJsonLine(const ClipReport& r) {
  nlohmann::ordered_json j;
  j["clip"] = r.clip;
  j["input_snr_db"] = r.snr.input_snr_db;
  j["output_snr_db"] = r.snr.output_snr_db;
  j["delta_db"] = r.snr.delta_db;
  if (r.has_psa) {
    j["psa_mag_mse"] = r.psa.mag_mse;
    j["psa_complex_mse"] = r.psa.complex_mse;
    j["psa_total"] = r.psa.total;
  }
  return j.dump();
}

}  // namespace avse
