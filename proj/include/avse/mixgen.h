// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef AVSE_MIXGEN_H_
#define AVSE_MIXGEN_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "avse/waveform.h"

namespace avse {

inline constexpr double kMinSnrDb = -5.0;
inline constexpr double kMaxSnrDb = 5.0;
inline constexpr double kClipSeconds = 5.0;

struct ManifestEntry {
  std::string path;
  double duration_s = 0.0;
};

// UTF-8 lines "path<TAB>duration_s"; '#' starts a comment; blank lines
// ignored. Relative paths resolve against the manifest's directory.
std::vector<ManifestEntry> ParseManifest(const std::string& text,
                                         const std::filesystem::path& base = {});
std::vector<ManifestEntry> LoadManifest(const std::filesystem::path& path);

struct MixtureSpec {
  std::string target_path;
  std::string interferer_path;
  double snr_db = 0.0;
  double target_offset_s = 0.0;
  double interferer_offset_s = 0.0;
  double duration_s = kClipSeconds;
  uint64_t seed = 0;
};

struct MixtureRecord {
  MixtureSpec spec;
  Waveform mixture;
  Waveform target;
  Waveform interferer_scaled;
  double noise_gain = 1.0;
  // All stems were divided by this factor (1 when no normalization).
  double peak_factor = 1.0;
  double achieved_snr_db = 0.0;
};

double Energy(std::span<const double> x);

// 10 log10(sum target^2 / sum noise^2). Throws UndefinedSnrError when either
// energy is zero.
double MeasureSnr(std::span<const double> target, std::span<const double> noise);

// Gain g such that MeasureSnr(target, g * noise) == snr_db.
double NoiseGainForSnr(std::span<const double> target,
                       std::span<const double> noise, double snr_db);
std::vector<double> ScaleNoiseForSnr(std::span<const double> target,
                                     std::span<const double> noise,
                                     double snr_db);

// Per-record draws, in order: target index, interferer index (among the
// other entries), snr ~ U[-5, 5], target offset, interferer offset, record
// seed. Offsets are uniform over [0, duration - clip] rounded down to whole
// samples.
std::vector<MixtureSpec> DrawSpecs(std::span<const ManifestEntry> manifest,
                                   int count, uint64_t seed,
                                   double clip_s = kClipSeconds);

using WaveLoader = std::function<Waveform(const std::string&)>;

// Cuts both clips, scales the interferer to spec.snr_db and sums. When the
// mixture peak exceeds 1 all three stems are divided by that peak.
MixtureRecord MakeMixture(const MixtureSpec& spec, const WaveLoader& load);
MixtureRecord MakeMixture(const MixtureSpec& spec);

// Sidecar metadata line (single-line JSON object) for a record.
std::string MixtureMetadataJson(const MixtureRecord& record,
                                const std::string& stem_prefix);

}  // namespace avse

#endif  // AVSE_MIXGEN_H_
