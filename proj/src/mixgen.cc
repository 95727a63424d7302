// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avse/mixgen.h"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "avse/errors.h"
#include "avse/rng.h"

namespace avse {

std::vector<ManifestEntry> ParseManifest(const std::string& text,
                                         const std::filesystem::path& base) {
  std::vector<ManifestEntry> out;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw FormatError("manifest line " + std::to_string(lineno) +
                        ": expected path<TAB>duration_s");
    ManifestEntry e;
    e.path = line.substr(0, tab);
    const std::string dur = line.substr(tab + 1);
    char* end = nullptr;
    e.duration_s = std::strtod(dur.c_str(), &end);
    while (end && (*end == ' ' || *end == '\t')) ++end;
    if (end == dur.c_str() || *end != '\0' || !(e.duration_s >= 0.0))
      throw FormatError("manifest line " + std::to_string(lineno) +
                        ": bad duration '" + dur + "'");
    std::filesystem::path p(e.path);
    if (p.is_relative() && !base.empty()) e.path = (base / p).string();
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ManifestEntry> LoadManifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseManifest(ss.str(), path.parent_path());
}

double Energy(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

double MeasureSnr(std::span<const double> target,
                  std::span<const double> noise) {
  const double et = Energy(target), en = Energy(noise);
  if (et == 0.0 || en == 0.0)
    throw UndefinedSnrError("SNR undefined: zero-energy signal");
  return 10.0 * std::log10(et / en);
}

double NoiseGainForSnr(std::span<const double> target,
                       std::span<const double> noise, double snr_db) {
  const double et = Energy(target), en = Energy(noise);
  if (et == 0.0 || en == 0.0)
    throw UndefinedSnrError("SNR undefined: zero-energy signal");
  return std::sqrt(et / (en * std::pow(10.0, snr_db / 10.0)));
}

std::vector<double> ScaleNoiseForSnr(std::span<const double> target,
                                     std::span<const double> noise,
                                     double snr_db) {
  const double g = NoiseGainForSnr(target, noise, snr_db);
  std::vector<double> out(noise.begin(), noise.end());
  for (double& v : out) v *= g;
  return out;
}

std::vector<MixtureSpec> DrawSpecs(std::span<const ManifestEntry> manifest,
                                   int count, uint64_t seed, double clip_s) {
  if (manifest.size() < 2)
    throw std::invalid_argument("manifest needs at least 2 sources");
  if (count < 0) throw std::invalid_argument("count must be >= 0");
  SplitMix64 rng(seed);
  const uint64_t n = manifest.size();
  auto offset = [&](double duration) {
    const double span_s = std::max(0.0, duration - clip_s);
    const double samples = std::floor(rng.Uniform() * span_s * kSampleRate);
    return samples / kSampleRate;
  };
  std::vector<MixtureSpec> specs;
  specs.reserve(count);
  for (int i = 0; i < count; ++i) {
    const uint64_t t = rng.Below(n);
    uint64_t k = rng.Below(n - 1);
    if (k >= t) ++k;
    MixtureSpec s;
    s.target_path = manifest[t].path;
    s.interferer_path = manifest[k].path;
    s.snr_db = rng.Uniform(kMinSnrDb, kMaxSnrDb);
    s.target_offset_s = offset(manifest[t].duration_s);
    s.interferer_offset_s = offset(manifest[k].duration_s);
    s.duration_s = clip_s;
    s.seed = rng.Next();
    specs.push_back(std::move(s));
  }
  return specs;
}

namespace {

Waveform Cut(const Waveform& src, double offset_s, double duration_s,
             const std::string& what) {
  const auto start = static_cast<size_t>(std::llround(offset_s * src.sample_rate));
  const auto len = static_cast<size_t>(std::llround(duration_s * src.sample_rate));
  if (start + len > src.size())
    throw std::invalid_argument(what + " clip too short: need " +
                                std::to_string(start + len) + " samples, have " +
                                std::to_string(src.size()));
  Waveform out;
  out.sample_rate = src.sample_rate;
  out.samples.assign(src.samples.begin() + start,
                     src.samples.begin() + start + len);
  return out;
}

}  // namespace

MixtureRecord MakeMixture(const MixtureSpec& spec, const WaveLoader& load) {
  if (!(spec.duration_s > 0.0))
    throw std::invalid_argument("mixture duration must be positive");
  const Waveform target_full = load(spec.target_path);
  const Waveform noise_full = load(spec.interferer_path);
  if (target_full.sample_rate != noise_full.sample_rate)
    throw std::invalid_argument("sample rate mismatch between sources");

  MixtureRecord rec;
  rec.spec = spec;
  rec.target = Cut(target_full, spec.target_offset_s, spec.duration_s, "target");
  Waveform noise =
      Cut(noise_full, spec.interferer_offset_s, spec.duration_s, "interferer");
  rec.noise_gain = NoiseGainForSnr(rec.target.samples, noise.samples,
                                   spec.snr_db);
  rec.interferer_scaled = noise;
  for (double& v : rec.interferer_scaled.samples) v *= rec.noise_gain;

  rec.mixture.sample_rate = rec.target.sample_rate;
  rec.mixture.samples.resize(rec.target.size());
  double peak = 0.0;
  for (size_t i = 0; i < rec.target.size(); ++i) {
    rec.mixture.samples[i] =
        rec.target.samples[i] + rec.interferer_scaled.samples[i];
    peak = std::max(peak, std::abs(rec.mixture.samples[i]));
  }
  if (peak > 1.0) {
    rec.peak_factor = peak;
    for (auto* w : {&rec.mixture, &rec.target, &rec.interferer_scaled})
      for (double& v : w->samples) v /= peak;
  }
  rec.achieved_snr_db =
      MeasureSnr(rec.target.samples, rec.interferer_scaled.samples);
  return rec;
}

MixtureRecord MakeMixture(const MixtureSpec& spec) {
  return MakeMixture(spec, [](const std::string& p) { return ReadWav(p); });
}

std::string MixtureMetadataJson(const MixtureRecord& r,
                                const std::string& stem_prefix) {
  nlohmann::ordered_json j;
  j["mixture"] = stem_prefix + "_mixture.wav";
  j["target"] = stem_prefix + "_target.wav";
  j["interferer"] = stem_prefix + "_interferer.wav";
  j["target_source"] = r.spec.target_path;
  j["interferer_source"] = r.spec.interferer_path;
  j["snr_db"] = r.spec.snr_db;
  j["achieved_snr_db"] = r.achieved_snr_db;
  j["target_offset_s"] = r.spec.target_offset_s;
  j["interferer_offset_s"] = r.spec.interferer_offset_s;
  j["duration_s"] = r.spec.duration_s;
  j["noise_gain"] = r.noise_gain;
  j["peak_factor"] = r.peak_factor;
  j["seed"] = r.spec.seed;
  return j.dump();
}

}  // namespace avse
