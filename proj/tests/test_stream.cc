// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cstring>
#include <random>

#include "avse/errors.h"
#include "avse/stream.h"
#include "golden_inputs.h"
#include "oracles.h"

using namespace avse;

namespace {

std::shared_ptr<const ModelWeights> Tiny(uint64_t seed) {
  return std::make_shared<const ModelWeights>(RandomWeights(TinyConfig(), seed));
}

std::vector<double> Stream(std::shared_ptr<const ModelWeights> w,
                           const Waveform& x, const VisualEmbeddingSequence& e,
                           bool enhance = true) {
  EngineOptions opt;
  opt.enhancement_enabled = enhance;
  StreamEngine engine(std::make_unique<NetworkMaskEstimator>(w), opt);
  std::vector<double> out;
  RunStreaming(engine, MakeBufferSource(x, e), [&](std::span<const double> s) {
    out.insert(out.end(), s.begin(), s.end());
  });
  return out;
}

VisualEmbeddingSequence Emb(size_t samples, int64_t seed, int dim = 512) {
  return SyntheticEmbeddings(static_cast<int>(RequiredVideoFrames(samples)), dim,
                             seed);
}

}  // namespace

TEST_SUITE("stream") {

TEST_CASE("bypass delays an impulse by exactly 1920 samples") {
  std::vector<double> x(16000, 0.0);
  x[5000] = 1.0;
  const auto y = Stream(Tiny(1), Waveform{x, 16000}, Emb(x.size(), 0), false);
  for (size_t n = 0; n < y.size(); ++n) CHECK(y[n] == (n == 6920 ? 1.0 : 0.0));
}

TEST_CASE("offline bypass equals the delayed input") {
  const auto x = oracle::Noise(10000, 3);
  NetworkMaskEstimator est(Tiny(1));
  EngineOptions opt;
  opt.enhancement_enabled = false;
  const auto r = RunOffline(Waveform{x, 16000}, Emb(x.size(), 0), est, opt);
  REQUIRE(r.enhanced.size() == x.size());
  for (size_t n = 0; n < x.size(); ++n)
    CHECK(r.enhanced.samples[n] == (n < 1920 ? 0.0 : x[n - 1920]));
}

TEST_CASE("zero model halves the signal") {
  const auto x = oracle::Noise(16000, 4);
  NetworkMaskEstimator est(
      std::make_shared<const ModelWeights>(ZeroWeights(ModelConfig{})));
  const auto r = RunOffline(Waveform{x, 16000}, Emb(x.size(), 0), est);
  for (double m : r.masks.data) CHECK(m == 0.5);
  for (size_t n = 1920 + 240; n < x.size() - 400; ++n)
    CHECK(std::abs(r.enhanced.samples[n] - 0.5 * x[n - 1920]) < 1e-9);
  for (size_t n = 0; n < 1920; ++n) CHECK(r.enhanced.samples[n] == 0.0);
}

TEST_CASE("streaming equals offline") {
  std::mt19937_64 g(5);
  for (int trial = 0; trial < 4; ++trial) {
    const size_t len = 4000 + g() % 20000;
    auto x = oracle::Harmonic(len, g());
    const auto n = oracle::Noise(len, g(), 0.1);
    for (size_t i = 0; i < len; ++i) x[i] += n[i];
    const auto w = Tiny(g());
    const Waveform wave{x, 16000};
    const auto e = Emb(len, trial);
    NetworkMaskEstimator est(w);
    const auto off = RunOffline(wave, e, est);
    const auto str = Stream(w, wave, e);
    REQUIRE(str.size() >= len);
    double err = 0.0;
    for (size_t i = 0; i < len; ++i)
      err = std::max(err, std::abs(str[i] - off.enhanced.samples[i]));
    CHECK(err < 1e-5);
  }
}

TEST_CASE("golden enhanced output is stable and matches the oracle chain") {
  const std::string dir = AVSE_TEST_DATA_DIR;
  const Waveform in = ReadWav(dir + "/golden_in.wav");
  const Waveform frozen = ReadWav(dir + "/golden_enhanced.wav");
  auto w = std::make_shared<const ModelWeights>(MakePresetWeights("tiny"));
  const auto e = Emb(in.size(), golden::kEnhanceSeed);
  NetworkMaskEstimator est(w);
  const auto out = RunOffline(in, e, est);
  REQUIRE(frozen.size() == out.enhanced.size());
  double err = 0.0;
  for (size_t i = 0; i < in.size(); ++i)
    err = std::max(err, std::abs(out.enhanced.samples[i] - frozen.samples[i]));
  CHECK(err < 1e-6);

  std::vector<std::vector<double>> video(e.count);
  for (int i = 0; i < e.count; ++i) video[i].assign(e.vector(i).begin(), e.vector(i).end());
  const auto ref = oracle::Enhance(*w, in.samples, video);
  double oerr = 0.0;
  for (size_t i = 0; i < in.size(); ++i)
    oerr = std::max(oerr, std::abs(ref[i] - out.enhanced.samples[i]));
  CHECK(oerr < 1e-5);
}

TEST_CASE("enhancement toggle takes effect at the next tick") {
  const auto x = oracle::Noise(640 * 30, 6);
  StreamEngine engine(std::make_unique<NetworkMaskEstimator>(Tiny(2)), {});
  const auto e = Emb(x.size(), 0);
  for (int k = 0; k < 30; ++k) {
    if (k == 12) engine.set_enhancement_enabled(false);
    if (k == 20) engine.set_enhancement_enabled(true);
    const auto out = engine.Push(std::span(x).subspan(k * 640, 640), e.vector(k));
    CHECK(out.enhanced == (k < 12 || k >= 20));
    CHECK(out.masks.size() == (k < 2 ? 0u : 4u));  // the network keeps running
    if (!out.enhanced)
      for (int i = 0; i < 640; ++i) CHECK(out.samples[i] == x[k * 640 + i - 1920]);
  }
}

TEST_CASE("end-to-end causality") {
  std::mt19937_64 g(9);
  const auto w = Tiny(3);
  for (int trial = 0; trial < 5; ++trial) {
    const size_t len = 640 * 20;
    auto x = oracle::Noise(len, g());
    auto e = Emb(len, 1);
    const auto base = Stream(w, Waveform{x, 16000}, e);
    const int i = 3 + g() % 15;
    for (size_t n = 640 * i; n < len; ++n) x[n] = std::sin(0.37 * n);
    for (int k = i; k < e.count; ++k)
      for (int j = 0; j < e.dim; ++j) e.data[k * e.dim + j] = -1.0f;
    const auto mod = Stream(w, Waveform{x, 16000}, e);
    // The first frame touching sample 640 i starts at 640 i - 320.
    const size_t safe = 640 * i - 320 + 1920;
    CHECK(std::memcmp(base.data(), mod.data(), safe * sizeof(double)) == 0);
    bool changed = false;
    for (size_t n = safe; n < mod.size(); ++n) changed |= base[n] != mod[n];
    CHECK(changed);
  }
}

TEST_CASE("coverage and input checks") {
  const auto x = oracle::Noise(6400, 1);
  NetworkMaskEstimator est(Tiny(1));
  CHECK_THROWS_AS(RunOffline(Waveform{x, 16000}, Emb(6400 - 640, 0), est),
                  CoverageError);
  CHECK(RequiredVideoFrames(6400) == 10);
  CHECK(RequiredVideoFrames(6401) == 11);
  StreamEngine engine(std::make_unique<NetworkMaskEstimator>(Tiny(1)), {});
  CHECK_THROWS_AS(engine.Push(std::vector<double>(100), std::vector<float>(512)),
                  std::invalid_argument);
  CHECK_THROWS_AS(engine.Push(std::vector<double>(640), std::vector<float>(3)),
                  std::invalid_argument);
}

TEST_CASE("stalls emit silence without advancing the pipeline") {
  const auto x = oracle::Noise(640 * 10, 2);
  const auto e = Emb(x.size(), 0);
  auto inner = MakeBufferSource(Waveform{x, 16000}, e);
  int calls = 0;
  ChunkSource src = [&]() -> SourceEvent {
    if (++calls % 3 == 0) return Stall{};
    return inner();
  };
  StreamEngine engine(std::make_unique<NetworkMaskEstimator>(Tiny(1)), {});
  std::vector<double> out;
  const auto t = RunStreaming(engine, src, [&](std::span<const double> s) {
    out.insert(out.end(), s.begin(), s.end());
  });
  CHECK(t.ticks_processed == 10);
  CHECK(t.stalls == 5);
  CHECK(out.size() == 15u * 640);
  CHECK(t.stopped);
}

TEST_CASE("telemetry counts are deterministic") {
  const auto x = oracle::Noise(640 * 25, 2);
  const auto e = Emb(x.size(), 0);
  auto run = [&] {
    StreamEngine engine(std::make_unique<NetworkMaskEstimator>(Tiny(1)), {});
    return RunStreaming(engine, MakeBufferSource(Waveform{x, 16000}, e),
                        [](std::span<const double>) {});
  };
  const auto a = run(), b = run();
  CHECK(a.ticks_processed == b.ticks_processed);
  CHECK(a.stalls == b.stalls);
  CHECK(a.mask_mean == b.mask_mean);
  CHECK(a.algorithmic_latency_ms == 120.0);
}

TEST_CASE("tick stats") {
  TickStats s(4);
  Telemetry t;
  s.Fill(t);
  CHECK(t.ticks_processed == 0);
  CHECK(t.rtf == 0.0);
  int64_t last = 0;
  for (double ms : {10.0, 50.0, 20.0, 41.0, 5.0}) {
    s.Record(ms);
    s.Fill(t);
    CHECK(t.deadline_misses >= last);
    last = t.deadline_misses;
  }
  CHECK(t.deadline_misses == 2);
  CHECK(t.max_ms == 50.0);
  CHECK(t.rtf == doctest::Approx(126.0 / (5 * 40.0)));
  CHECK(t.p95_ms == 50.0);  // window holds 50, 20, 41, 5
}

TEST_CASE("bench") {
  const auto zero = Bench(Tiny(1), 0.0);
  CHECK(zero.ticks_processed == 0);
  CHECK(zero.rtf == 0.0);
  const auto t = Bench(Tiny(1), 1.0);
  CHECK(t.ticks_processed == 25);
  CHECK(t.rtf > 0.0);
}

TEST_CASE("wider convolutions cost more") {
  auto config = [](int ch) {
    ModelConfig c;
    c.stage_channels = {ch, ch, ch};
    return std::make_shared<const ModelWeights>(RandomWeights(c, 1));
  };
  auto best = [](std::shared_ptr<const ModelWeights> w) {
    double r = 1e9;
    for (int i = 0; i < 3; ++i) r = std::min(r, Bench(w, 2.0).rtf);
    return r;
  };
  CHECK(best(config(16)) > best(config(8)));
}

}  // TEST_SUITE
