// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef AVSE_WAVEFORM_H_
#define AVSE_WAVEFORM_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace avse {

constexpr int kSampleRate = 16000;

// Mono time-domain signal.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// Throws std::invalid_argument on NaN/Inf or a non-positive rate.
void CheckFinite(const Waveform& wave);

enum class WavEncoding { kPcm16, kFloat32 };

// Reads PCM16 or float32 WAV. Multi-channel input is downmixed by averaging.
// Anything other than 16 kHz is rejected with FormatError.
Waveform ReadWav(const std::filesystem::path& path);
Waveform DecodeWav(std::span<const uint8_t> bytes);

void WriteWav(const std::filesystem::path& path, const Waveform& wave,
              WavEncoding encoding = WavEncoding::kFloat32);
std::vector<uint8_t> EncodeWav(const Waveform& wave, WavEncoding encoding);

// Shared PCM16 conversion, used by both the WAV writer and the raw stream.
int16_t ToPcm16(double sample);
inline double FromPcm16(int16_t v) { return v / 32768.0; }

}  // namespace avse

#endif  // AVSE_WAVEFORM_H_
