// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any fails.

#include <cstdio>
#include <cstring>
#include <random>
#include <string>

#include "avse/evalkit.h"
#include "avse/mixgen.h"
#include "avse/stream.h"
#include "oracles.h"

using namespace avse;

namespace {

int failures = 0;

void Report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("criterion %d %-28s %s  %s\n", id, name, ok ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string Fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

std::vector<double> Stream(std::shared_ptr<const ModelWeights> w,
                           const std::vector<double>& x,
                           const VisualEmbeddingSequence& e, bool enhance) {
  EngineOptions opt;
  opt.enhancement_enabled = enhance;
  StreamEngine engine(std::make_unique<NetworkMaskEstimator>(std::move(w)), opt);
  std::vector<double> out;
  RunStreaming(engine, MakeBufferSource(Waveform{x, 16000}, e),
               [&](std::span<const double> s) { out.insert(out.end(), s.begin(), s.end()); });
  out.resize(x.size());
  return out;
}

VisualEmbeddingSequence Emb(size_t samples, int64_t seed) {
  return SyntheticEmbeddings(static_cast<int>(RequiredVideoFrames(samples)),
                             kDefaultEmbeddingDim, seed);
}

// Masks from a precomputed matrix, ignoring the network inputs.
class FixedMaskEstimator : public MaskEstimator {
 public:
  explicit FixedMaskEstimator(RealMatrix m) : m_(std::move(m)) {}
  int visual_dim() const override { return kDefaultEmbeddingDim; }
  void Reset() override {}
  void Estimate(int64_t frame, std::span<const Complex>, std::span<const float>,
                std::span<const float>, std::span<float> mask) override {
    for (int f = 0; f < m_.cols; ++f)
      mask[f] = static_cast<float>(m_.data[frame * m_.cols + f]);
  }

 private:
  RealMatrix m_;
};

std::vector<std::vector<oracle::cd>> ToOracle(const Spectrogram& s) {
  std::vector<std::vector<oracle::cd>> out(s.frames);
  for (int t = 0; t < s.frames; ++t) out[t].assign(s.frame(t).begin(), s.frame(t).end());
  return out;
}

void Latency() {
  const auto w = std::make_shared<const ModelWeights>(ZeroWeights(ModelConfig{}));
  bool ok = true;
  std::string detail = "impulse delays:";
  for (size_t pos : {0ul, 5000ul, 7777ul, 12800ul}) {
    std::vector<double> x(24000, 0.0);
    x[pos] = 1.0;
    const auto y = Stream(w, x, Emb(x.size(), 0), false);
    size_t peak = 0;
    for (size_t n = 0; n < y.size(); ++n) {
      ok &= y[n] == (n == pos + 1920 ? 1.0 : 0.0);
      if (y[n] != 0.0) peak = n;
    }
    detail += " " + std::to_string(peak - pos);
  }
  Report(1, "latency", ok, detail + " samples (want 1920)");
}

void Deadline() {
  bool ok = true;
  std::string detail;
  for (const char* preset : {"random:0", "tiny"}) {
    const auto w = std::make_shared<const ModelWeights>(MakePresetWeights(preset));
    const auto t = Bench(w, 60.0);
    ok &= t.p95_ms < kDeadlineMs && t.rtf < 1.0 && t.ticks_processed == 1500;
    if (!detail.empty()) detail += "; ";
    detail += std::string(preset) +
              Fmt(": p95 %.3f ms rtf %.4f max %.3f ms", t.p95_ms, t.rtf, t.max_ms);
  }
  Report(2, "per-frame deadline", ok, detail);
}

void RoundTrip() {
  std::mt19937_64 g(101);
  std::normal_distribution<double> n(0.0, 0.3);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(80000);
    for (double& v : x) v = n(g);
    const auto y = Istft(Stft(Waveform{x, 16000}));
    const size_t end = std::min(x.size(), y.size()) - 240;
    for (size_t i = 240; i < end; ++i)
      worst = std::max(worst, std::abs(y.samples[i] - x[i]));
  }
  Report(3, "stft round trip", worst < 1e-6, Fmt("max interior error %.3e", worst));
}

void StreamingOffline() {
  std::mt19937_64 g(202);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    auto x = oracle::Harmonic(80000, g());
    const auto nz = oracle::Noise(80000, g(), 0.1);
    for (size_t i = 0; i < x.size(); ++i) x[i] += nz[i];
    const auto w = std::make_shared<const ModelWeights>(RandomWeights(ModelConfig{}, g()));
    const auto e = Emb(x.size(), static_cast<int64_t>(g() % 1000));
    NetworkMaskEstimator est(w);
    const auto off = RunOffline(Waveform{x, 16000}, e, est);
    const auto str = Stream(w, x, e, true);
    for (size_t i = 0; i < x.size(); ++i)
      worst = std::max(worst, std::abs(str[i] - off.enhanced.samples[i]));
  }
  Report(4, "streaming equals offline", worst < 1e-5,
         Fmt("max abs difference %.3e over 20 sessions", worst));
}

void Causality() {
  std::mt19937_64 g(303);
  bool ok = true;
  for (int trial = 0; trial < 10; ++trial) {
    const auto w = std::make_shared<const ModelWeights>(RandomWeights(ModelConfig{}, g()));
    auto x = oracle::Noise(48000, g());
    auto e = Emb(x.size(), 0);
    const auto base = Stream(w, x, e, true);
    const int i = 2 + static_cast<int>(g() % (e.count - 3));
    std::mt19937_64 m(g());
    std::uniform_real_distribution<double> u(-1, 1);
    for (size_t n = 640 * i; n < x.size(); ++n) x[n] = u(m);
    for (size_t k = static_cast<size_t>(i) * e.dim; k < e.data.size(); ++k)
      e.data[k] = static_cast<float>(u(m));
    const auto mod = Stream(w, x, e, true);
    const size_t bound = 640 * static_cast<size_t>(i - 2);
    ok &= std::memcmp(base.data(), mod.data(), bound * sizeof(double)) == 0;
  }
  Report(5, "causality", ok, "10 random (input, frame) pairs, bitwise");
}

void Mixing() {
  std::vector<ManifestEntry> manifest;
  for (int k = 0; k < 8; ++k)
    manifest.push_back({"src" + std::to_string(k), 7.0 + k});
  auto load = [](const std::string& p) {
    const uint64_t seed = std::stoull(p.substr(3));
    const size_t n = static_cast<size_t>((7.0 + seed) * 16000);
    auto x = oracle::Harmonic(n, seed);
    const auto nz = oracle::Noise(n, seed + 100, 0.05);
    for (size_t i = 0; i < n; ++i) x[i] += nz[i];
    return Waveform{x, 16000};
  };
  const auto specs = DrawSpecs(manifest, 1000, 404);
  double worst = 0.0;
  bool in_range = true;
  for (const auto& s : specs) {
    in_range &= s.snr_db >= -5.0 && s.snr_db <= 5.0;
    const auto r = MakeMixture(s, load);
    const double got = oracle::SnrDb(r.target.samples, r.interferer_scaled.samples);
    worst = std::max(worst, std::abs(got - s.snr_db));
  }
  Report(6, "snr mixing accuracy", worst < 0.01 && in_range,
         Fmt("max |achieved - requested| %.3e dB over 1000", worst));
}

void LayerOracles() {
  std::mt19937_64 g(505);
  std::uniform_real_distribution<float> u(-1, 1), pos(0.5f, 1.5f);
  double conv_err = 0.0, lstm_err = 0.0, fc_err = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int cin = 1 + g() % 4, cout = 1 + g() % 4;
    const int fin = 8 + g() % 60, stride = 1 + g() % 2;
    const int fout = (fin - 1) / stride + 1;
    std::vector<float> kernel(cout * cin * 9), bias(cout), gamma(cout), beta(cout),
        mean(cout), var(cout), scale(cout), shift(cout);
    for (float& v : kernel) v = u(g);
    for (int c = 0; c < cout; ++c) {
      bias[c] = u(g);
      gamma[c] = pos(g);
      beta[c] = u(g);
      mean[c] = 0.1f * u(g);
      var[c] = pos(g);
      const double sc = gamma[c] / std::sqrt(static_cast<double>(var[c]));
      scale[c] = static_cast<float>(sc);
      shift[c] = static_cast<float>(beta[c] - mean[c] * sc);
    }
    const int steps = 5;
    std::vector<std::vector<double>> seq(steps, std::vector<double>(cin * fin));
    std::vector<float> flat;
    for (auto& row : seq)
      for (double& v : row) {
        v = u(g);
        flat.push_back(static_cast<float>(v));
      }
    const auto ref = oracle::ConvBlock(seq, cin, fin, cout, stride, kernel, bias,
                                       gamma, beta, mean, var, 0.0);
    ModelConfig::ConvShape shape{cin, cout, fin, fout, stride};
    for (int t = 0; t < steps; ++t) {
      std::array<std::span<const float>, 3> taps;
      for (int k = 0; k < 3; ++k)
        if (t - 2 + k >= 0)
          taps[k] = std::span<const float>(flat.data() + (t - 2 + k) * cin * fin, cin * fin);
      std::vector<float> out(cout * fout);
      layers::ConvBlockFrame(shape, kernel, bias, scale, shift, taps, out);
      for (size_t i = 0; i < out.size(); ++i)
        conv_err = std::max(conv_err, std::abs(out[i] - ref[t][i]));
    }

    ModelConfig c;
    c.stage_channels = {1, 1, 1};
    c.visual_dim = 1 + g() % 16;
    c.lstm_hidden = 4 + g() % 60;
    c.fc1 = c.fc2 = 8;
    const auto w = std::make_shared<const ModelWeights>(RandomWeights(c, g()));
    MaskNet net(w);
    const int in = c.lstm_input_dim(), hidden = c.lstm_hidden;
    LstmState s{std::vector<float>(hidden), std::vector<float>(hidden)};
    oracle::Lstm os{std::vector<double>(hidden), std::vector<double>(hidden)};
    for (int t = 0; t < steps; ++t) {
      std::vector<float> xf(in);
      for (float& v : xf) v = u(g);
      net.LstmStep(xf, s);
      oracle::LstmStep(w->at("lstm.W_ih").data, w->at("lstm.W_hh").data,
                       w->at("lstm.b_ih").data, w->at("lstm.b_hh").data,
                       std::vector<double>(xf.begin(), xf.end()), os);
      for (int k = 0; k < hidden; ++k) {
        lstm_err = std::max(lstm_err, std::abs(s.h[k] - os.h[k]));
        lstm_err = std::max(lstm_err, std::abs(s.c[k] - os.c[k]));
      }
    }

    // Three-layer FC stack: ReLU, ReLU, sigmoid.
    const int d0 = 4 + g() % 60, d1 = 4 + g() % 60, d2 = 4 + g() % 60,
              d3 = 4 + g() % 60;
    const int dims[4] = {d0, d1, d2, d3};
    std::vector<float> x(d0);
    for (float& v : x) v = u(g);
    std::vector<double> xr(x.begin(), x.end());
    for (int l = 0; l < 3; ++l) {
      const int ni = dims[l], no = dims[l + 1];
      std::vector<float> wm(no * ni), wt(ni * no), b(no), y(no);
      for (float& v : wm) v = u(g) / std::sqrt(static_cast<float>(ni));
      for (float& v : b) v = 0.1f * u(g);
      for (int r = 0; r < no; ++r)
        for (int k = 0; k < ni; ++k) wt[k * no + r] = wm[r * ni + k];
      layers::AffineTransposed(wt, b, x, y);
      auto yr = oracle::Affine(wm, b, xr);
      if (l < 2) {
        layers::Relu(y);
        for (double& v : yr) v = std::max(v, 0.0);
      } else {
        for (float& v : y) v = layers::Sigmoid(v);
        for (double& v : yr) v = oracle::Sigmoid(v);
      }
      x = y;
      xr = yr;
    }
    for (int k = 0; k < d3; ++k) fc_err = std::max(fc_err, std::abs(x[k] - xr[k]));
  }

  auto zero = std::make_shared<const ModelWeights>(ZeroWeights(ModelConfig{}));
  MaskNet net(zero);
  const auto e = Emb(16000, 1);
  std::vector<float> comp(50 * kBins);
  std::mt19937_64 gi(7);
  for (float& v : comp) v = u(gi) + 1.0f;
  std::vector<float> vis(50 * kDefaultEmbeddingDim);
  for (int t = 0; t < 50; ++t)
    for (int j = 0; j < kDefaultEmbeddingDim; ++j)
      vis[t * kDefaultEmbeddingDim + j] = e.vector(t / 4)[j];
  const auto masks = net.PredictSequence(comp, vis, 50);
  bool half = masks.size() == 50u * kBins;
  for (float m : masks) half &= m == 0.5f;

  const bool ok = conv_err < 1e-5 && lstm_err < 1e-5 && fc_err < 1e-5 && half;
  Report(7, "layer oracle equivalence", ok,
         Fmt("conv %.2e lstm %.2e fc %.2e; ", conv_err, lstm_err, fc_err) +
             (half ? "zero model mask 0.5" : "zero model mask not 0.5"));
}

void PsaProperties() {
  std::mt19937_64 g(606);
  bool zero_iff = true, ranks = true;
  double oracle_err = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto clean_x = oracle::Harmonic(16000, g());
    const auto noise_x = oracle::Noise(16000, g(), 0.1);
    std::vector<double> mix(16000);
    for (size_t i = 0; i < mix.size(); ++i) mix[i] = clean_x[i] + noise_x[i];
    const auto clean = Stft(Waveform{clean_x, 16000});
    const auto noisy = Stft(Waveform{mix, 16000});

    RealMatrix ones(clean.frames, clean.bins, 1.0);
    zero_iff &= PsaLoss(ones, clean, clean).total == 0.0;
    RealMatrix bumped = ones;
    bumped.data[g() % bumped.data.size()] = 0.9;
    zero_iff &= PsaLoss(bumped, clean, clean).total > 0.0;

    const auto ideal = ClippedIdealMask(noisy, clean);
    const double l_ideal = PsaLoss(ideal, noisy, clean).total;
    const double l_zero = PsaLoss(RealMatrix(noisy.frames, noisy.bins, 0.0), noisy, clean).total;
    const double l_unit = PsaLoss(ones, noisy, clean).total;
    ranks &= l_ideal < l_zero && l_ideal < l_unit;

    std::vector<std::vector<double>> m(ideal.rows);
    for (int t = 0; t < ideal.rows; ++t)
      m[t].assign(ideal.data.begin() + t * ideal.cols,
                  ideal.data.begin() + (t + 1) * ideal.cols);
    const auto ref = oracle::PsaLoss(m, ToOracle(noisy), ToOracle(clean));
    oracle_err = std::max(oracle_err, std::abs(l_ideal - (ref.mag + ref.cplx)));
  }
  Report(8, "psa loss properties", zero_iff && ranks && oracle_err < 1e-9,
         std::string(zero_iff ? "zero iff equal" : "zero iff equal violated") +
             (ranks ? ", ideal beats zero and unit" : ", ideal loses") +
             Fmt(", oracle error %.2e", oracle_err));
}

void EnhancementSanity() {
  std::mt19937_64 g(707);
  double worst = 1e9;
  for (int trial = 0; trial < 20; ++trial) {
    const auto target = oracle::Harmonic(48000, g());
    const auto noise = ScaleNoiseForSnr(target, oracle::Noise(48000, g()), 0.0);
    std::vector<double> mix(target.size());
    for (size_t i = 0; i < mix.size(); ++i) mix[i] = target[i] + noise[i];
    const Waveform wave{mix, 16000};
    const auto ideal = ClippedIdealMask(Stft(wave), Stft(Waveform{target, 16000}));
    FixedMaskEstimator est(ideal);
    const auto out = RunOffline(wave, Emb(mix.size(), 0), est);
    const auto r = SnrImproveDelayed(mix, out.enhanced.samples, target, 1920);
    worst = std::min(worst, r.delta_db);
  }
  Report(9, "enhancement sanity", worst > 3.0,
         Fmt("min snr improvement %.2f dB over 20 mixtures at 0 dB", worst));
}

}  // namespace

int main() {
  Latency();
  Deadline();
  RoundTrip();
  StreamingOffline();
  Causality();
  Mixing();
  LayerOracles();
  PsaProperties();
  EnhancementSanity();
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
