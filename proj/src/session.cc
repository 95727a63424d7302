// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avse/session.h"

#include <poll.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "avse/errors.h"
#include "avse/net.h"
#include "avse/pcm_stream.h"
#include "avse/rng.h"

namespace avse {

namespace {

constexpr int kDisplayBands = 64;
// |X| of a full-scale sine under a 400-point Hann window (sum(w) / 2).
constexpr double kFullScaleMagnitude = 100.0;

std::shared_ptr<const ModelWeights> LoadWeights(const SessionConfig& c) {
  if (!c.model_path.empty())
    return std::make_shared<const ModelWeights>(LoadModel(c.model_path));
  return std::make_shared<const ModelWeights>(
      MakePresetWeights(c.weights_preset));
}

std::unique_ptr<EmbeddingProvider> MakeProvider(const EmbeddingSourceSpec& s) {
  if (s.kind == EmbeddingSourceSpec::Kind::kFile)
    return FileEmbeddingProvider::Open(s.path);
  return std::make_unique<SyntheticEmbeddingProvider>(s.dim, s.seed);
}

}  // namespace

// ---------------------------------------------------------------------------

SessionConfig ConfigFromJson(const nlohmann::json& p,
                             const SessionConfig& base) {
  if (!p.is_object()) throw std::invalid_argument("payload must be an object");
  SessionConfig c = base;
  if (p.contains("audio")) {
    const std::string a = p.at("audio").get<std::string>();
    c.audio = AudioSourceSpec{};
    if (a == "synthetic") {
      c.audio.kind = AudioSourceSpec::Kind::kSynthetic;
    } else if (a == "stdin") {
      c.audio.kind = AudioSourceSpec::Kind::kPcmStdin;
    } else if (a.starts_with("tcp:")) {
      c.audio.kind = AudioSourceSpec::Kind::kPcmSocket;
      c.audio.bind = a.substr(4);
    } else {
      c.audio.kind = AudioSourceSpec::Kind::kWav;
      c.audio.path = a;
    }
  }
  if (p.contains("loop")) c.audio.loop = p.at("loop").get<bool>();
  if (p.contains("realtime")) c.audio.realtime = p.at("realtime").get<bool>();
  if (p.contains("embeddings")) {
    const std::string e = p.at("embeddings").get<std::string>();
    if (e.starts_with("synthetic")) {
      c.embeddings.kind = EmbeddingSourceSpec::Kind::kSynthetic;
      c.embeddings.seed =
          e.size() > 10 && e[9] == ':' ? std::stoll(e.substr(10)) : 0;
    } else {
      c.embeddings.kind = EmbeddingSourceSpec::Kind::kFile;
      c.embeddings.path = e;
    }
  }
  if (p.contains("model")) {
    const std::string m = p.at("model").get<std::string>();
    if (m.starts_with("preset:")) {
      c.model_path.clear();
      c.weights_preset = m.substr(7);
    } else {
      c.model_path = m;
    }
  }
  if (p.contains("chunk_frames")) c.chunk_frames = p.at("chunk_frames").get<int>();
  if (c.chunk_frames <= 0 || c.chunk_frames % kAudioFramesPerVideoFrame != 0)
    throw std::invalid_argument("chunk_frames must be a positive multiple of 4");
  return c;
}

std::vector<int> DisplayBandEdges() {
  std::vector<int> edges(kDisplayBands + 1);
  edges[0] = 0;
  for (int b = 1; b <= kDisplayBands; ++b) {
    const double pos = std::pow(static_cast<double>(kBins),
                                static_cast<double>(b) / kDisplayBands) - 1.0;
    edges[b] = std::max(edges[b - 1] + 1, static_cast<int>(std::lround(pos)));
  }
  edges[kDisplayBands] = kBins;
  return edges;
}

std::vector<float> DownsampleSpectrumDb(std::span<const Complex> frame) {
  static const std::vector<int> edges = DisplayBandEdges();
  std::vector<float> out(kDisplayBands);
  for (int b = 0; b < kDisplayBands; ++b) {
    double power = 0.0;
    for (int f = edges[b]; f < edges[b + 1]; ++f) power += std::norm(frame[f]);
    power /= (edges[b + 1] - edges[b]);
    const double ref = kFullScaleMagnitude * kFullScaleMagnitude;
    double db = power > 0.0 ? 10.0 * std::log10(power / ref) : -80.0;
    out[b] = static_cast<float>(std::clamp(db, -80.0, 0.0));
  }
  return out;
}

std::vector<float> SpectrumDb(std::span<const Complex> frame) {
  constexpr double ref = kFullScaleMagnitude * kFullScaleMagnitude;
  std::vector<float> out(frame.size());
  for (size_t f = 0; f < frame.size(); ++f) {
    const double power = std::norm(frame[f]);
    const double db = power > 0.0 ? 10.0 * std::log10(power / ref) : -80.0;
    out[f] = static_cast<float>(std::clamp(db, -80.0, 0.0));
  }
  return out;
}

std::vector<float> DownsampleMask(std::span<const float> mask) {
  static const std::vector<int> edges = DisplayBandEdges();
  std::vector<float> out(kDisplayBands);
  for (int b = 0; b < kDisplayBands; ++b) {
    double sum = 0.0;
    for (int f = edges[b]; f < edges[b + 1]; ++f) sum += mask[f];
    out[b] = static_cast<float>(sum / (edges[b + 1] - edges[b]));
  }
  return out;
}

// ---------------------------------------------------------------------------

struct Session::Runtime {
  explicit Runtime(size_t capacity) : queue(capacity) {}

  BoundedQueue<AvChunk> queue;
  std::atomic<bool> stop{false};
  std::unique_ptr<StreamEngine> engine;
  std::unique_ptr<net::Listener> pcm_listener;
  std::thread ingest;
  std::thread processor;
  std::atomic<bool> finished{false};
};

Session::Session(SessionConfig config)
    : config_(std::move(config)), enhancement_(config_.enhancement_enabled) {
  if (config_.chunk_frames <= 0 ||
      config_.chunk_frames % kAudioFramesPerVideoFrame != 0)
    throw std::invalid_argument("chunk_frames must be a positive multiple of 4");
  weights_ = LoadWeights(config_);
  provider_ = MakeProvider(config_.embeddings);
  if (provider_->descriptor().dim != weights_->config.visual_dim)
    throw std::invalid_argument("embedding dimension does not match model");
  auto t = std::make_shared<Telemetry>();
  t->algorithmic_latency_ms = AlgorithmicLatencyMs(kDefaultLookahead);
  snapshot_ = t;
}

Session::~Session() { Stop(); }

SessionConfig Session::config() const {
  std::lock_guard<std::mutex> lock(control_mu_);
  return config_;
}

void Session::Start() {
  std::lock_guard<std::mutex> lock(control_mu_);
  if (runtime_) {
    if (!runtime_->finished.load()) return;
    runtime_->stop = true;
    runtime_->queue.Close();
    if (runtime_->ingest.joinable()) runtime_->ingest.join();
    if (runtime_->processor.joinable()) runtime_->processor.join();
    runtime_.reset();
  }
  auto rt = std::make_unique<Runtime>(64);
  rt->engine = std::make_unique<StreamEngine>(
      std::make_unique<NetworkMaskEstimator>(weights_), EngineOptions{});
  if (config_.audio.kind == AudioSourceSpec::Kind::kWav)
    ReadWav(config_.audio.path);  // surface format errors before starting
  if (config_.audio.kind == AudioSourceSpec::Kind::kPcmSocket) {
    auto [host, port] = net::ParseHostPort(config_.audio.bind);
    rt->pcm_listener = std::make_unique<net::Listener>(host, port);
  }
  {
    auto t = std::make_shared<Telemetry>();
    t->algorithmic_latency_ms = AlgorithmicLatencyMs(kDefaultLookahead);
    std::lock_guard<std::mutex> snap(snapshot_mu_);
    snapshot_ = t;
  }
  running_ = true;
  Runtime& ref = *rt;
  rt->ingest = std::thread([this, &ref] { IngestLoop(ref); });
  rt->processor = std::thread([this, &ref] { ProcessLoop(ref); });
  runtime_ = std::move(rt);
}

void Session::Stop() {
  std::lock_guard<std::mutex> lock(control_mu_);
  if (!runtime_) return;
  runtime_->stop = true;
  runtime_->queue.Close();
  if (runtime_->pcm_listener) runtime_->pcm_listener->Shutdown();
  if (runtime_->ingest.joinable()) runtime_->ingest.join();
  if (runtime_->processor.joinable()) runtime_->processor.join();
  runtime_.reset();
  {
    std::lock_guard<std::mutex> fin(finished_mu_);
    running_ = false;
  }
  finished_cv_.notify_all();
}

void Session::Reconfigure(SessionConfig config) {
  auto weights = LoadWeights(config);
  auto provider = MakeProvider(config.embeddings);
  if (provider->descriptor().dim != weights->config.visual_dim)
    throw std::invalid_argument("embedding dimension does not match model");
  if (config.chunk_frames <= 0 ||
      config.chunk_frames % kAudioFramesPerVideoFrame != 0)
    throw std::invalid_argument("chunk_frames must be a positive multiple of 4");
  const bool was_running = running();
  Stop();
  {
    std::lock_guard<std::mutex> lock(control_mu_);
    config_ = std::move(config);
    weights_ = std::move(weights);
    provider_ = std::move(provider);
  }
  if (was_running) Start();
}

Telemetry Session::Snapshot() const {
  std::shared_ptr<const Telemetry> p;
  {
    std::lock_guard<std::mutex> lock(snapshot_mu_);
    p = snapshot_;
  }
  Telemetry t = *p;
  t.enhancement_enabled = enhancement_.load();
  t.running = running_.load();
  return t;
}

void Session::WaitFinished() {
  std::unique_lock<std::mutex> lock(finished_mu_);
  finished_cv_.wait(lock, [&] { return !running_.load(); });
}

int Session::AddListener(Listener listener) {
  std::lock_guard<std::mutex> lock(listeners_mu_);
  listeners_[next_listener_] = std::move(listener);
  return next_listener_++;
}

void Session::RemoveListener(int id) {
  std::lock_guard<std::mutex> lock(listeners_mu_);
  listeners_.erase(id);
}

void Session::Emit(const SessionEvent& ev) {
  std::lock_guard<std::mutex> lock(listeners_mu_);
  for (auto& [id, l] : listeners_) l(ev);
}

void Session::Publish(const TickStats& stats, bool stopped) {
  auto t = std::make_shared<Telemetry>();
  stats.Fill(*t);
  t->algorithmic_latency_ms = AlgorithmicLatencyMs(kDefaultLookahead);
  t->stopped = stopped;
  std::lock_guard<std::mutex> lock(snapshot_mu_);
  snapshot_ = std::move(t);
}

// ---------------------------------------------------------------------------

void Session::IngestLoop(Runtime& rt) {
  const SessionConfig cfg = config_;
  const EmbeddingProvider& provider = *provider_;
  const int dim = provider.descriptor().dim;
  const auto file_frames = provider.size();
  auto embedding = [&](int64_t i) {
    int64_t idx = i;
    if (cfg.audio.loop && file_frames && *file_frames > 0) idx %= *file_frames;
    auto v = provider.Frame(idx);
    return v ? *v : std::vector<float>(dim, 0.0f);
  };
  const auto start = std::chrono::steady_clock::now();
  auto pace = [&](int64_t i) {
    if (!cfg.audio.realtime) return;
    std::this_thread::sleep_until(
        start + std::chrono::microseconds((i + 1) * 40000));
  };
  // Pushes one tick; false when the session is stopping.
  int64_t index = 0;
  auto push = [&](std::vector<double> audio) {
    AvChunk c;
    c.video_index = index;
    c.audio = std::move(audio);
    c.embedding = embedding(index);
    ++index;
    return !rt.stop && rt.queue.Push(std::move(c));
  };

  try {
    using Kind = AudioSourceSpec::Kind;
    if (cfg.audio.kind == Kind::kWav) {
      const Waveform wave = ReadWav(cfg.audio.path);
      const int64_t ticks = RequiredVideoFrames(wave.size());
      do {
        for (int64_t k = 0; k < ticks && !rt.stop; ++k) {
          std::vector<double> a(kTickSamples, 0.0);
          const size_t s = static_cast<size_t>(k) * kTickSamples;
          const size_t e = std::min(wave.size(), s + kTickSamples);
          std::copy(wave.samples.begin() + s, wave.samples.begin() + e,
                    a.begin());
          pace(index);
          if (!push(std::move(a))) break;
        }
      } while (cfg.audio.loop && !rt.stop && ticks > 0);
    } else if (cfg.audio.kind == Kind::kSynthetic) {
      SplitMix64 rng(cfg.audio.seed);
      while (!rt.stop) {
        std::vector<double> a(kTickSamples);
        for (double& s : a) s = rng.Uniform(-0.1, 0.1);
        pace(index);
        if (!push(std::move(a))) break;
      }
    } else {
      net::Socket conn;
      int fd = 0;
      if (cfg.audio.kind == Kind::kPcmSocket) {
        while (!rt.stop && !conn.valid()) conn = rt.pcm_listener->Accept(100);
        if (!conn.valid()) {
          rt.queue.Close();
          return;
        }
        fd = conn.fd();
      }
      ByteSource src = [&rt, fd](std::span<uint8_t> buf) {
        size_t got = 0;
        while (got < buf.size()) {
          pollfd p{fd, POLLIN, 0};
          if (rt.stop) return false;
          if (::poll(&p, 1, 100) <= 0) continue;
          ssize_t n = ::read(fd, buf.data() + got, buf.size() - got);
          if (n <= 0) return false;
          got += static_cast<size_t>(n);
        }
        return true;
      };
      PcmChunkReader reader(src, kTickSamples);
      while (!rt.stop) {
        auto block = reader.NextBlock();
        if (!block || !push(std::move(*block))) break;
      }
    }
  } catch (const std::exception&) {
    // Malformed input ends the stream; the processor reports it as stopped.
  }
  rt.queue.Close();
}

void Session::ProcessLoop(Runtime& rt) {
  const SessionConfig cfg = config_;
  TickStats stats;
  std::vector<double> wav_out;
  const std::vector<double> silence(kTickSamples, 0.0);
  auto sink = [&](std::span<const double> samples) {
    if (cfg.output.kind == OutputSpec::Kind::kWav) {
      wav_out.insert(wav_out.end(), samples.begin(), samples.end());
    } else if (cfg.output.kind == OutputSpec::Kind::kPcmStdout) {
      WriteFd(1, EncodePcmChunk(samples));
    }
  };
  const auto watchdog = std::chrono::milliseconds(cfg.watchdog_ms);
  while (!rt.stop) {
    auto item = rt.queue.PopFor(watchdog);
    if (!item) {
      if (rt.queue.closed_and_empty()) break;
      stats.RecordStall();
      sink(silence);
      Emit(SessionEvent{SessionEvent::Type::kStall, 0, rt.engine->ticks(), {}, {}});
      Publish(stats, false);
      continue;
    }
    rt.engine->set_enhancement_enabled(enhancement_.load());
    const auto t0 = std::chrono::steady_clock::now();
    TickOutput out;
    try {
      out = rt.engine->Push(item->audio, item->embedding);
    } catch (const std::exception&) {
      break;
    }
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    stats.Record(ms);
    stats.RecordMasks(out.masks);
    sink(out.samples);
    if (!out.masks.empty()) {
      const MaskFrameRecord& last = out.masks.back();
      const int64_t video = last.frame / kAudioFramesPerVideoFrame;
      Emit(SessionEvent{SessionEvent::Type::kSpectrum, last.frame, video,
                        DownsampleSpectrumDb(last.noisy),
                        SpectrumDb(last.noisy)});
      Emit(SessionEvent{SessionEvent::Type::kMask, last.frame, video,
                        DownsampleMask(last.mask), last.mask});
    }
    Publish(stats, false);
  }
  if (cfg.output.kind == OutputSpec::Kind::kWav) {
    try {
      WriteWav(cfg.output.path, Waveform{wav_out, kSampleRate});
    } catch (const std::exception&) {
    }
  }
  Publish(stats, true);
  rt.finished = true;
  {
    std::lock_guard<std::mutex> lock(finished_mu_);
    running_ = false;
  }
  finished_cv_.notify_all();
}

}  // namespace avse
