// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// avse command-line driver. Machine-readable results go to stdout as JSON
// lines, prose to stderr. Exit codes: 0 ok, 1 usage, 2 data or format
// error, 3 runtime error.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "avse/avsync.h"
#include "avse/control.h"
#include "avse/dsp.h"
#include "avse/embeddings.h"
#include "avse/errors.h"
#include "avse/evalkit.h"
#include "avse/masknet.h"
#include "avse/mixgen.h"
#include "avse/session.h"
#include "avse/stream.h"
#include "avse/waveform.h"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kDataError = 2, kRuntimeError = 3 };

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::atomic<bool> g_interrupted{false};

void OnSignal(int) { g_interrupted = true; }

void Emit(const ordered_json& j) { std::cout << j.dump() << std::endl; }

std::shared_ptr<const avse::ModelWeights> ResolveModel(
    const std::string& path, const std::string& preset) {
  if (!path.empty())
    return std::make_shared<const avse::ModelWeights>(avse::LoadModel(path));
  try {
    return std::make_shared<const avse::ModelWeights>(
        avse::MakePresetWeights(preset));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

// ---------------------------------------------------------------------------

struct EnhanceArgs {
  std::string in, embeddings, model, preset = "zero", out, reference;
  int64_t synthetic_seed = 0;
  bool bypass = false;
  std::string encoding = "float32";
};

int RunEnhance(const EnhanceArgs& a) {
  const avse::Waveform mixture = avse::ReadWav(a.in);
  auto weights = ResolveModel(a.model, a.preset);
  const int dim = weights->config.visual_dim;
  avse::VisualEmbeddingSequence emb =
      a.embeddings.empty()
          ? avse::SyntheticEmbeddings(
                static_cast<int>(avse::RequiredVideoFrames(mixture.size())),
                dim, a.synthetic_seed)
          : avse::LoadEmbeddingFile(a.embeddings);

  avse::EngineOptions opt;
  opt.enhancement_enabled = !a.bypass;
  avse::NetworkMaskEstimator estimator(weights);
  const avse::OfflineResult result =
      avse::RunOffline(mixture, emb, estimator, opt);
  avse::WriteWav(a.out, result.enhanced,
                 a.encoding == "pcm16" ? avse::WavEncoding::kPcm16
                                       : avse::WavEncoding::kFloat32);
  std::cerr << "wrote " << a.out << " (" << result.enhanced.size()
            << " samples, " << (a.bypass ? "bypass" : "enhanced")
            << ", delayed by "
            << avse::AlgorithmicLatencySamples(avse::kDefaultLookahead)
            << " samples)\n";

  if (!a.reference.empty()) {
    const avse::Waveform clean = avse::ReadWav(a.reference);
    if (clean.size() != mixture.size())
      throw std::invalid_argument("reference length differs from input");
    avse::ClipReport report;
    report.clip = a.in;
    report.snr = avse::SnrImproveDelayed(
        mixture.samples, result.enhanced.samples, clean.samples,
        static_cast<size_t>(
            avse::AlgorithmicLatencySamples(avse::kDefaultLookahead)));
    if (!a.bypass) {
      report.has_psa = true;
      report.psa = avse::PsaLoss(result.masks, avse::Stft(mixture),
                                 avse::Stft(clean));
    }
    std::cout << avse::ReportJsonLine(report) << std::endl;
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct MixArgs {
  std::string manifest, outdir;
  int count = 0;
  uint64_t seed = 0;
  double duration = avse::kClipSeconds;
  std::string encoding = "float32";
};

int RunMix(const MixArgs& a) {
  const auto manifest = avse::LoadManifest(a.manifest);
  const auto specs = avse::DrawSpecs(manifest, a.count, a.seed, a.duration);
  fs::create_directories(a.outdir);
  const auto enc = a.encoding == "pcm16" ? avse::WavEncoding::kPcm16
                                         : avse::WavEncoding::kFloat32;
  std::ofstream meta;
  if (!specs.empty()) {
    meta.open(fs::path(a.outdir) / "metadata.jsonl", std::ios::trunc);
    if (!meta) throw avse::IoError("cannot write metadata in " + a.outdir);
  }
  for (size_t i = 0; i < specs.size(); ++i) {
    const avse::MixtureRecord rec = avse::MakeMixture(specs[i]);
    char prefix[32];
    std::snprintf(prefix, sizeof(prefix), "mix_%05zu", i);
    const fs::path base = fs::path(a.outdir) / prefix;
    avse::WriteWav(base.string() + "_mixture.wav", rec.mixture, enc);
    avse::WriteWav(base.string() + "_target.wav", rec.target, enc);
    avse::WriteWav(base.string() + "_interferer.wav", rec.interferer_scaled,
                   enc);
    const std::string line = avse::MixtureMetadataJson(rec, prefix);
    meta << line << '\n';
    std::cout << line << '\n';
  }
  std::cout.flush();
  std::cerr << "generated " << specs.size() << " mixtures in " << a.outdir
            << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string model, preset = "random:0";
  double duration = 60.0;
  uint64_t seed = 0;
  bool check = false;
};

int RunBench(const BenchArgs& a) {
  if (a.duration < 0) throw UsageError("--duration must be >= 0");
  auto weights = ResolveModel(a.model, a.preset);
  const avse::Telemetry t = avse::Bench(weights, a.duration, a.seed);
  ordered_json j;
  j["type"] = "bench";
  j["duration_s"] = a.duration;
  j["audio_embed_dim"] = weights->config.audio_embed_dim();
  const nlohmann::json tj = avse::TelemetryJson(t);
  for (auto& [k, v] : tj.items()) j[k] = v;
  Emit(j);
  const bool ok = t.ticks_processed == 0 ||
                  (t.p95_ms < avse::kDeadlineMs && t.rtf < 1.0);
  std::cerr << "p95 " << t.p95_ms << " ms, rtf " << t.rtf << " over "
            << t.ticks_processed << " ticks: "
            << (ok ? "within" : "over") << " the 40 ms budget\n";
  return a.check && !ok ? kRuntimeError : kOk;
}

// ---------------------------------------------------------------------------

struct LatencyArgs {
  int lookahead = avse::kDefaultLookahead;
  double frame_ms = avse::kVideoFrameMs;
  int sample_rate = avse::kSampleRate;
  bool measure = false;
};

// Sends an impulse through the bypass pipeline and returns its output
// position minus its input position.
int64_t MeasureBypassDelay(int lookahead) {
  avse::EngineOptions opt;
  opt.lookahead = lookahead;
  opt.enhancement_enabled = false;
  auto weights =
      std::make_shared<const avse::ModelWeights>(avse::MakePresetWeights("tiny"));
  avse::StreamEngine engine(
      std::make_unique<avse::NetworkMaskEstimator>(weights), opt);
  const int64_t at = 5000;
  const int ticks = 16 + lookahead;
  std::vector<float> emb(weights->config.visual_dim, 0.0f);
  for (int k = 0; k < ticks; ++k) {
    std::vector<double> audio(avse::kTickSamples, 0.0);
    if (at / avse::kTickSamples == k) audio[at % avse::kTickSamples] = 1.0;
    const auto out = engine.Push(audio, emb);
    for (int i = 0; i < avse::kTickSamples; ++i)
      if (out.samples[i] != 0.0)
        return static_cast<int64_t>(k) * avse::kTickSamples + i - at;
  }
  return -1;
}

int RunLatency(const LatencyArgs& a) {
  if (a.lookahead < 0 || a.frame_ms < 0 || a.sample_rate <= 0)
    throw UsageError("latency inputs must be nonnegative");
  ordered_json j;
  j["type"] = "latency";
  j["video_frame_ms"] = a.frame_ms;
  j["lookahead_frames"] = a.lookahead;
  j["receptive_field"] = 2 * a.lookahead + 1;
  j["algorithmic_latency_ms"] = avse::AlgorithmicLatencyMs(a.lookahead, a.frame_ms);
  j["algorithmic_latency_samples"] =
      avse::AlgorithmicLatencySamples(a.lookahead, a.frame_ms, a.sample_rate);
  j["deadline_ms"] = avse::kDeadlineMs;
  if (a.measure) {
    if (a.frame_ms != avse::kVideoFrameMs || a.sample_rate != avse::kSampleRate)
      throw UsageError("--measure needs the native 40 ms / 16 kHz timing");
    j["measured_delay_samples"] = MeasureBypassDelay(a.lookahead);
  }
  Emit(j);
  return kOk;
}

// ---------------------------------------------------------------------------

struct ServeArgs {
  std::string control_bind = "127.0.0.1:8765";
  std::string audio = "synthetic";
  std::string embeddings = "synthetic";
  std::string model, preset = "zero";
  std::string out;
  bool loop = false, no_realtime = false, bypass = false;
  bool no_autostart = false, verbose_spectrum = false;
  int telemetry_ms = 200, watchdog_ms = 500, chunk_frames = 4;
  double run_seconds = 0.0;
};

int RunServe(const ServeArgs& a) {
  nlohmann::json payload;
  payload["audio"] = a.audio;
  payload["loop"] = a.loop;
  payload["realtime"] = !a.no_realtime;
  payload["embeddings"] = a.embeddings;
  payload["model"] = a.model.empty() ? "preset:" + a.preset : a.model;
  payload["chunk_frames"] = a.chunk_frames;
  avse::SessionConfig cfg;
  try {
    cfg = avse::ConfigFromJson(payload, avse::SessionConfig{});
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (a.model.empty()) ResolveModel("", a.preset);  // usage check
  cfg.enhancement_enabled = !a.bypass;
  cfg.telemetry_period_ms = a.telemetry_ms;
  cfg.watchdog_ms = a.watchdog_ms;
  if (a.out == "-") {
    cfg.output.kind = avse::OutputSpec::Kind::kPcmStdout;
  } else if (!a.out.empty()) {
    cfg.output.kind = avse::OutputSpec::Kind::kWav;
    cfg.output.path = a.out;
  }
  // JSON status lines move to stderr when stdout carries PCM.
  std::ostream& status = a.out == "-" ? std::cerr : std::cout;

  const auto [host, port] = avse::net::ParseHostPort(a.control_bind);
  avse::Session session(cfg);
  avse::ControlOptions copt;
  copt.telemetry_period_ms = a.telemetry_ms;
  copt.verbose_spectrum = a.verbose_spectrum;
  avse::ControlService control(session, host, port, copt);

  ordered_json hello;
  hello["type"] = "listening";
  hello["host"] = host;
  hello["port"] = control.port();
  hello["v"] = avse::kProtocolVersion;
  status << hello.dump() << std::endl;
  std::cerr << "control service on " << host << ":" << control.port() << "\n";

  std::signal(SIGINT, OnSignal);
  std::signal(SIGTERM, OnSignal);
  std::signal(SIGPIPE, SIG_IGN);
  if (!a.no_autostart) session.Start();
  const auto start = std::chrono::steady_clock::now();
  bool started = !a.no_autostart;
  while (!g_interrupted) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    if (session.running()) started = true;
    // A finite source ends the process once it drains, unless a console is
    // attached and may restart it.
    if (started && !session.running() && control.connection_count() == 0) break;
    if (a.run_seconds > 0 &&
        std::chrono::steady_clock::now() - start >=
            std::chrono::duration<double>(a.run_seconds))
      break;
  }
  session.Stop();
  control.Stop();
  ordered_json fin;
  fin["type"] = "telemetry";
  fin["payload"] = avse::TelemetryJson(session.Snapshot());
  status << fin.dump() << std::endl;
  return kOk;
}

// ---------------------------------------------------------------------------

int RunMakeWeights(const std::string& preset, const std::string& out) {
  auto w = ResolveModel("", preset);
  avse::SaveModel(*w, out);
  ordered_json j;
  j["type"] = "weights";
  j["path"] = out;
  j["preset"] = preset;
  j["tensors"] = w->tensors.size();
  j["audio_embed_dim"] = w->config.audio_embed_dim();
  j["visual_dim"] = w->config.visual_dim;
  j["lstm_hidden"] = w->config.lstm_hidden;
  Emit(j);
  return kOk;
}

int RunEmbedSynth(int frames, int dim, int64_t seed, const std::string& out) {
  if (frames < 0 || dim < 1) throw UsageError("need --frames >= 0, --dim >= 1");
  avse::SaveEmbeddingFile(avse::SyntheticEmbeddings(frames, dim, seed), out);
  ordered_json j;
  j["type"] = "embeddings";
  j["path"] = out;
  j["frames"] = frames;
  j["dim"] = dim;
  j["seed"] = seed;
  Emit(j);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"avse: causal audio-visual speech enhancement engine"};
  app.set_config("--config", "", "key=value file mirroring the flags");
  app.require_subcommand(1);

  const std::vector<std::string> kEncodings = {"float32", "pcm16"};

  EnhanceArgs ea;
  auto* enhance = app.add_subcommand("enhance", "Enhance a WAV file offline");
  enhance->add_option("--in", ea.in, "Noisy input WAV")->required();
  auto* emb_opt =
      enhance->add_option("--embeddings", ea.embeddings, "RVE1 embedding file");
  enhance
      ->add_option("--synthetic-seed", ea.synthetic_seed,
                   "Use synthetic embeddings with this seed")
      ->excludes(emb_opt);
  auto* model_opt = enhance->add_option("--model", ea.model, "RVW1 weight file");
  enhance->add_option("--preset", ea.preset, "Weight preset when no --model")
      ->excludes(model_opt);
  enhance->add_option("--out", ea.out, "Output WAV")->required();
  enhance->add_option("--reference", ea.reference,
                      "Clean target WAV; prints a metric line");
  enhance->add_flag("--bypass", ea.bypass, "Delay only, no masking");
  enhance->add_option("--encoding", ea.encoding)
      ->check(CLI::IsMember(kEncodings));

  MixArgs ma;
  auto* mix = app.add_subcommand("mix", "Generate SNR-controlled mixtures");
  mix->add_option("--manifest", ma.manifest, "path<TAB>duration_s list")
      ->required();
  mix->add_option("--count", ma.count)->required()->check(CLI::NonNegativeNumber);
  mix->add_option("--seed", ma.seed);
  mix->add_option("--outdir", ma.outdir)->required();
  mix->add_option("--duration", ma.duration, "Clip length in seconds")
      ->check(CLI::PositiveNumber);
  mix->add_option("--encoding", ma.encoding)->check(CLI::IsMember(kEncodings));

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Time the streaming pipeline");
  bench->add_option("--duration", ba.duration, "Seconds of synthetic input");
  auto* bench_model = bench->add_option("--model", ba.model);
  bench->add_option("--preset", ba.preset)->excludes(bench_model);
  bench->add_option("--seed", ba.seed);
  bench->add_flag("--check", ba.check,
                  "Exit 3 unless p95 < 40 ms and rtf < 1");

  LatencyArgs la;
  auto* latency = app.add_subcommand("latency", "Report algorithmic latency");
  latency->add_option("--lookahead", la.lookahead);
  latency->add_option("--frame-ms", la.frame_ms);
  latency->add_option("--sample-rate", la.sample_rate);
  latency->add_flag("--measure", la.measure,
                    "Also measure the bypass delay with an impulse");

  ServeArgs sa;
  auto* serve = app.add_subcommand("serve", "Run a live session");
  serve->add_option("--control-bind", sa.control_bind, "host:port");
  serve->add_option("--audio", sa.audio,
                    "synthetic | stdin | tcp:host:port | WAV path");
  serve->add_option("--embeddings", sa.embeddings,
                    "synthetic[:seed] | RVE1 path");
  auto* serve_model = serve->add_option("--model", sa.model);
  serve->add_option("--preset", sa.preset)->excludes(serve_model);
  serve->add_option("--out", sa.out, "Output WAV, or - for PCM on stdout");
  serve->add_flag("--loop", sa.loop, "Restart a WAV source at its end");
  serve->add_flag("--no-realtime", sa.no_realtime,
                  "Do not pace file/synthetic input at 40 ms per frame");
  serve->add_flag("--bypass", sa.bypass, "Start with enhancement off");
  serve->add_flag("--no-autostart", sa.no_autostart,
                  "Wait for a start command");
  serve->add_flag("--verbose-spectrum", sa.verbose_spectrum,
                  "Send all 257 bins");
  serve->add_option("--telemetry-ms", sa.telemetry_ms)
      ->check(CLI::PositiveNumber);
  serve->add_option("--watchdog-ms", sa.watchdog_ms)->check(CLI::PositiveNumber);
  serve->add_option("--chunk-frames", sa.chunk_frames);
  serve->add_option("--run-seconds", sa.run_seconds,
                    "Stop after this long (0 = until the source ends)");

  std::string mw_preset, mw_out;
  auto* make_weights =
      app.add_subcommand("make-weights", "Write a fixture weight file");
  make_weights->add_option("--preset", mw_preset, "zero | random:<seed> | tiny")
      ->required();
  make_weights->add_option("--out", mw_out)->required();

  int es_frames = 0, es_dim = avse::kDefaultEmbeddingDim;
  int64_t es_seed = 0;
  std::string es_out;
  auto* embed_synth =
      app.add_subcommand("embed-synth", "Write synthetic embeddings");
  embed_synth->add_option("--frames", es_frames)->required();
  embed_synth->add_option("--dim", es_dim);
  embed_synth->add_option("--seed", es_seed);
  embed_synth->add_option("--out", es_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*enhance) return RunEnhance(ea);
    if (*mix) return RunMix(ma);
    if (*bench) return RunBench(ba);
    if (*latency) return RunLatency(la);
    if (*serve) return RunServe(sa);
    if (*make_weights) return RunMakeWeights(mw_preset, mw_out);
    if (*embed_synth) return RunEmbedSynth(es_frames, es_dim, es_seed, es_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const avse::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kDataError;
  } catch (const avse::LoadError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return kDataError;
  } catch (const avse::CoverageError& e) {
    std::cerr << "coverage error: " << e.what() << "\n";
    return kDataError;
  } catch (const avse::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::domain_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsage;
}
