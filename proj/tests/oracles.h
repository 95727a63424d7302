// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Slow, direct reference implementations used as test oracles. Everything
// here works in double or long double with plain loops and shares no code
// with the library beyond the data containers.

#ifndef AVSE_TESTS_ORACLES_H_
#define AVSE_TESTS_ORACLES_H_

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "avse/masknet.h"

namespace oracle {

using cd = std::complex<double>;

inline std::vector<double> Hann(int n) {
  std::vector<double> w(n);
  for (int k = 0; k < n; ++k)
    w[k] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * k / n));
  return w;
}

// Direct DFT of one windowed frame, zero-padded to nfft; bins 0..nfft/2.
inline std::vector<cd> DftFrame(const double* x, int win, int nfft) {
  const auto w = Hann(win);
  std::vector<cd> out(nfft / 2 + 1);
  for (int f = 0; f <= nfft / 2; ++f) {
    long double re = 0, im = 0;
    for (int n = 0; n < win; ++n) {
      const long double a = -2.0L * std::numbers::pi_v<long double> * f * n / nfft;
      re += x[n] * w[n] * std::cos(a);
      im += x[n] * w[n] * std::sin(a);
    }
    out[f] = cd(static_cast<double>(re), static_cast<double>(im));
  }
  return out;
}

inline int Frames(size_t len, int win = 400, int hop = 160) {
  return len < static_cast<size_t>(win) ? 0
                                         : 1 + static_cast<int>((len - win) / hop);
}

inline std::vector<std::vector<cd>> Stft(const std::vector<double>& x,
                                         int win = 400, int hop = 160,
                                         int nfft = 512) {
  std::vector<std::vector<cd>> s(Frames(x.size(), win, hop));
  for (size_t t = 0; t < s.size(); ++t) s[t] = DftFrame(&x[t * hop], win, nfft);
  return s;
}

// Direct inverse of a Hermitian half spectrum; first `win` samples.
inline std::vector<double> IdftFrame(const std::vector<cd>& bins, int win,
                                     int nfft) {
  std::vector<double> out(win);
  for (int n = 0; n < win; ++n) {
    long double acc = 0;
    for (int f = 0; f <= nfft / 2; ++f) {
      const long double a = 2.0L * std::numbers::pi_v<long double> * f * n / nfft;
      const long double term =
          bins[f].real() * std::cos(a) - bins[f].imag() * std::sin(a);
      acc += (f == 0 || f == nfft / 2) ? term : 2 * term;
    }
    out[n] = static_cast<double>(acc / nfft);
  }
  return out;
}

// Weighted overlap-add with per-sample window-squared normalization.
inline std::vector<double> Wola(const std::vector<std::vector<cd>>& spec,
                                int win = 400, int hop = 160, int nfft = 512) {
  if (spec.empty()) return {};
  const auto w = Hann(win);
  const size_t len = (spec.size() - 1) * hop + win;
  std::vector<double> num(len, 0.0), den(len, 0.0);
  for (size_t t = 0; t < spec.size(); ++t) {
    const auto y = IdftFrame(spec[t], win, nfft);
    for (int k = 0; k < win; ++k) {
      num[t * hop + k] += y[k] * w[k];
      den[t * hop + k] += w[k] * w[k];
    }
  }
  for (size_t n = 0; n < len; ++n) num[n] /= std::max(den[n], 1e-8);
  return num;
}

inline double SnrDb(const std::vector<double>& s, const std::vector<double>& n) {
  long double es = 0, en = 0;
  for (double v : s) es += static_cast<long double>(v) * v;
  for (double v : n) en += static_cast<long double>(v) * v;
  return static_cast<double>(10.0L * std::log10(es / en));
}

// ---------------------------------------------------------------------------
// Network layers

inline double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// One conv + BN + ReLU block over a whole sequence. in is [T][Cin][Fin],
// kernel [Cout][Cin][3][3] with kernel time index 2 on the current frame.
inline std::vector<std::vector<double>> ConvBlock(
    const std::vector<std::vector<double>>& in, int cin, int fin, int cout,
    int stride, const std::vector<float>& kernel, const std::vector<float>& bias,
    const std::vector<float>& gamma, const std::vector<float>& beta,
    const std::vector<float>& mean, const std::vector<float>& var, double eps) {
  const int fout = (fin - 1) / stride + 1;
  const int frames = static_cast<int>(in.size());
  std::vector<std::vector<double>> out(frames,
                                       std::vector<double>(cout * fout, 0.0));
  for (int t = 0; t < frames; ++t)
    for (int co = 0; co < cout; ++co)
      for (int fo = 0; fo < fout; ++fo) {
        double acc = bias[co];
        for (int ci = 0; ci < cin; ++ci)
          for (int kt = 0; kt < 3; ++kt)
            for (int kf = 0; kf < 3; ++kf) {
              const int ti = t - 2 + kt;
              const int fi = fo * stride + kf - 1;
              if (ti < 0 || fi < 0 || fi >= fin) continue;
              acc += static_cast<double>(
                         kernel[((co * cin + ci) * 3 + kt) * 3 + kf]) *
                     in[ti][ci * fin + fi];
            }
        const double bn =
            gamma[co] * (acc - mean[co]) / std::sqrt(var[co] + eps) + beta[co];
        out[t][co * fout + fo] = std::max(0.0, bn);
      }
  return out;
}

// y = W x + b with W row-major [out][in].
inline std::vector<double> Affine(const std::vector<float>& w,
                                  const std::vector<float>& b,
                                  const std::vector<double>& x) {
  std::vector<double> y(b.size());
  for (size_t r = 0; r < b.size(); ++r) {
    double acc = b[r];
    for (size_t c = 0; c < x.size(); ++c) acc += w[r * x.size() + c] * x[c];
    y[r] = acc;
  }
  return y;
}

struct Lstm {
  std::vector<double> h, c;
};

// Gate order i, f, g, o.
inline void LstmStep(const std::vector<float>& w_ih,
                     const std::vector<float>& w_hh,
                     const std::vector<float>& b_ih,
                     const std::vector<float>& b_hh,
                     const std::vector<double>& x, Lstm& s) {
  const size_t hd = s.h.size();
  std::vector<double> g(4 * hd);
  for (size_t r = 0; r < 4 * hd; ++r) {
    double acc = static_cast<double>(b_ih[r]) + b_hh[r];
    for (size_t c = 0; c < x.size(); ++c) acc += w_ih[r * x.size() + c] * x[c];
    for (size_t c = 0; c < hd; ++c) acc += w_hh[r * hd + c] * s.h[c];
    g[r] = acc;
  }
  for (size_t k = 0; k < hd; ++k) {
    const double i = Sigmoid(g[k]), f = Sigmoid(g[hd + k]);
    const double gg = std::tanh(g[2 * hd + k]), o = Sigmoid(g[3 * hd + k]);
    s.c[k] = f * s.c[k] + i * gg;
    s.h[k] = o * std::tanh(s.c[k]);
  }
}

// Whole network over a sequence: compressed [T][257], visual [T][D] at the
// audio frame rate. Returns [T][257] masks.
inline std::vector<std::vector<double>> MaskNet(
    const avse::ModelWeights& w, const std::vector<std::vector<double>>& comp,
    const std::vector<std::vector<double>>& visual) {
  const avse::ModelConfig& c = w.config;
  auto T = [&](const std::string& n) -> const std::vector<float>& {
    return w.tensors.at(n).data;
  };
  std::vector<std::vector<double>> act = comp;
  int cin = 1, fin = c.bins;
  for (int l = 0; l < 15; ++l) {
    const std::string p = "conv" + std::to_string(l + 1) + ".";
    const int cout = c.stage_channels[l / 5];
    const int stride = l % 5 == 4 ? 2 : 1;
    act = ConvBlock(act, cin, fin, cout, stride, T(p + "kernel"), T(p + "bias"),
                    T(p + "bn_gamma"), T(p + "bn_beta"), T(p + "bn_mean"),
                    T(p + "bn_var"), c.bn_eps);
    cin = cout;
    fin = (fin - 1) / stride + 1;
  }
  Lstm s{std::vector<double>(c.lstm_hidden, 0.0),
         std::vector<double>(c.lstm_hidden, 0.0)};
  std::vector<std::vector<double>> out;
  for (size_t t = 0; t < comp.size(); ++t) {
    std::vector<double> x = act[t];
    x.insert(x.end(), visual[t].begin(), visual[t].end());
    LstmStep(T("lstm.W_ih"), T("lstm.W_hh"), T("lstm.b_ih"), T("lstm.b_hh"), x,
             s);
    auto a = Affine(T("fc1.W"), T("fc1.b"), s.h);
    for (double& v : a) v = std::max(0.0, v);
    auto b = Affine(T("fc2.W"), T("fc2.b"), a);
    for (double& v : b) v = std::max(0.0, v);
    auto m = Affine(T("fc3.W"), T("fc3.b"), b);
    for (double& v : m) v = Sigmoid(v);
    out.push_back(std::move(m));
  }
  return out;
}

// Full enhancement chain: direct STFT, power compression, network, mask on
// the uncompressed spectrum, WOLA, then the algorithmic delay. Embeddings
// are per video frame and are held for four audio frames.
inline std::vector<double> Enhance(const avse::ModelWeights& w,
                                   const std::vector<double>& x,
                                   const std::vector<std::vector<double>>& video,
                                   size_t delay = 1920) {
  auto spec = Stft(x);
  std::vector<std::vector<double>> comp, vis;
  for (size_t t = 0; t < spec.size(); ++t) {
    std::vector<double> row(spec[t].size());
    for (size_t f = 0; f < row.size(); ++f)
      row[f] = std::pow(std::abs(spec[t][f]), 0.3);
    comp.push_back(row);
    vis.push_back(video[t / 4]);
  }
  const auto masks = MaskNet(w, comp, vis);
  for (size_t t = 0; t < spec.size(); ++t)
    for (size_t f = 0; f < spec[t].size(); ++f) spec[t][f] *= masks[t][f];
  const auto y = Wola(spec);
  std::vector<double> out(x.size(), 0.0);
  for (size_t n = 0; n < y.size() && n + delay < out.size(); ++n)
    out[n + delay] = y[n];
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

struct Psa {
  double mag, cplx;
};

inline Psa PsaLoss(const std::vector<std::vector<double>>& mask,
                   const std::vector<std::vector<cd>>& noisy,
                   const std::vector<std::vector<cd>>& clean) {
  long double mag = 0, cplx = 0;
  size_t count = 0;
  for (size_t t = 0; t < noisy.size(); ++t)
    for (size_t f = 0; f < noisy[t].size(); ++f) {
      const cd est = mask[t][f] * noisy[t][f];
      const long double dm = std::abs(est) - std::abs(clean[t][f]);
      const long double dr = est.real() - clean[t][f].real();
      const long double di = est.imag() - clean[t][f].imag();
      mag += dm * dm;
      cplx += dr * dr + di * di;
      ++count;
    }
  return {static_cast<double>(mag / count), static_cast<double>(cplx / count)};
}

// ---------------------------------------------------------------------------
// Test signals

inline std::vector<double> Noise(size_t n, uint64_t seed, double amp = 0.3) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(-amp, amp);
  std::vector<double> x(n);
  for (double& v : x) v = u(g);
  return x;
}

// Voiced-speech stand-in: a few harmonics of a slowly gliding pitch under a
// syllable-rate envelope.
inline std::vector<double> Harmonic(size_t n, uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double f0 = 110.0 + 120.0 * u(g), glide = 20.0 * (u(g) - 0.5);
  const double rate = 3.0 + 2.0 * u(g);
  std::vector<double> x(n, 0.0);
  double phase = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / 16000.0;
    const double f = f0 + glide * std::sin(2 * std::numbers::pi * 0.5 * t);
    phase += 2 * std::numbers::pi * f / 16000.0;
    double s = 0.0;
    for (int h = 1; h <= 8; ++h) s += std::sin(h * phase) / h;
    const double env = 0.5 * (1.0 - std::cos(2 * std::numbers::pi * rate * t));
    x[i] = 0.2 * env * s;
  }
  return x;
}

}  // namespace oracle

#endif  // AVSE_TESTS_ORACLES_H_
