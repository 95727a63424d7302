// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avse/masknet.h"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

#include "avse/errors.h"
#include "avse/rng.h"

namespace avse {

namespace {

constexpr char kMagic[4] = {'R', 'V', 'W', '1'};
constexpr uint32_t kVersion = 1;

std::string ConvName(int layer, const char* field) {
  return "conv" + std::to_string(layer + 1) + "." + field;
}

std::string ShapeString(const std::vector<uint32_t>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::string JoinInts(std::span<const int> v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<int> ParseInts(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int v = 0;
    auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || p != item.data() + item.size() || v <= 0)
      throw LoadError(key, "bad metadata value '" + value + "'");
    out.push_back(v);
  }
  return out;
}

std::string FormatDouble(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> b) : b_(b) {}
  size_t pos() const { return pos_; }
  size_t remaining() const { return b_.size() - pos_; }
  void Need(size_t n, const char* what) const {
    if (remaining() < n)
      throw FormatError(std::string("truncated RVW1 file while reading ") +
                            what,
                        static_cast<int64_t>(pos_));
  }
  uint8_t U8(const char* what) {
    Need(1, what);
    return b_[pos_++];
  }
  uint16_t U16(const char* what) {
    Need(2, what);
    uint16_t v = static_cast<uint16_t>(b_[pos_] | (b_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  uint32_t U32(const char* what) {
    Need(4, what);
    uint32_t v = b_[pos_] | (b_[pos_ + 1] << 8) | (b_[pos_ + 2] << 16) |
                 (static_cast<uint32_t>(b_[pos_ + 3]) << 24);
    pos_ += 4;
    return v;
  }
  std::string Str(size_t n, const char* what) {
    Need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const uint8_t> b_;
  size_t pos_ = 0;
};

void PutU16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v));
  out.push_back(static_cast<uint8_t>(v >> 8));
}
void PutU32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

std::vector<float> Transpose(const Tensor& t) {
  const uint32_t rows = t.shape[0], cols = t.shape[1];
  std::vector<float> out(t.data.size());
  for (uint32_t r = 0; r < rows; ++r)
    for (uint32_t c = 0; c < cols; ++c)
      out[static_cast<size_t>(c) * rows + r] =
          t.data[static_cast<size_t>(r) * cols + c];
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config and weights

ModelConfig::ConvShape ModelConfig::conv_shape(int layer) const {
  if (layer < 0 || layer >= kConvLayers)
    throw std::out_of_range("conv layer index");
  int freq = bins;
  int channels = 1;
  ConvShape s{};
  for (int l = 0; l <= layer; ++l) {
    s.in_channels = channels;
    s.out_channels = stage_channels[l / kLayersPerStage];
    s.freq_in = freq;
    s.freq_stride = (l % kLayersPerStage == kLayersPerStage - 1) ? 2 : 1;
    s.freq_out = (freq - 1) / s.freq_stride + 1;
    channels = s.out_channels;
    freq = s.freq_out;
  }
  return s;
}

int ModelConfig::audio_embed_dim() const {
  auto s = conv_shape(kConvLayers - 1);
  return s.out_channels * s.freq_out;
}

size_t Tensor::numel() const {
  size_t n = 1;
  for (uint32_t d : shape) n *= d;
  return n;
}

const Tensor& ModelWeights::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw LoadError(name, "missing tensor");
  return it->second;
}

std::vector<std::pair<std::string, std::vector<uint32_t>>> ExpectedTensors(
    const ModelConfig& c) {
  std::vector<std::pair<std::string, std::vector<uint32_t>>> out;
  for (int l = 0; l < kConvLayers; ++l) {
    auto s = c.conv_shape(l);
    const uint32_t co = s.out_channels;
    out.push_back({ConvName(l, "kernel"),
                   {co, static_cast<uint32_t>(s.in_channels), kKernelTime,
                    kKernelFreq}});
    for (const char* f : {"bias", "bn_gamma", "bn_beta", "bn_mean", "bn_var"})
      out.push_back({ConvName(l, f), {co}});
  }
  const uint32_t h = c.lstm_hidden, in = c.lstm_input_dim();
  out.push_back({"lstm.W_ih", {4 * h, in}});
  out.push_back({"lstm.W_hh", {4 * h, h}});
  out.push_back({"lstm.b_ih", {4 * h}});
  out.push_back({"lstm.b_hh", {4 * h}});
  const uint32_t f1 = c.fc1, f2 = c.fc2, bins = c.bins;
  out.push_back({"fc1.W", {f1, h}});
  out.push_back({"fc1.b", {f1}});
  out.push_back({"fc2.W", {f2, f1}});
  out.push_back({"fc2.b", {f2}});
  out.push_back({"fc3.W", {bins, f2}});
  out.push_back({"fc3.b", {bins}});
  return out;
}

void ModelWeights::Validate() const {
  if (config.bins != 257)
    throw LoadError("bins", "shape error: expected 257 bins, got " +
                                std::to_string(config.bins));
  for (int c : config.stage_channels)
    if (c <= 0) throw LoadError("conv_channels", "channels must be positive");
  if (config.visual_dim <= 0 || config.lstm_hidden <= 0 || config.fc1 <= 0 ||
      config.fc2 <= 0)
    throw LoadError("", "model dimensions must be positive");
  if (!(config.bn_eps >= 0.0))
    throw LoadError("bn_eps", "must be nonnegative");

  const auto expected = ExpectedTensors(config);
  for (const auto& [name, shape] : expected) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw LoadError(name, "missing tensor");
    if (it->second.shape != shape)
      throw LoadError(name, "shape " + ShapeString(it->second.shape) +
                                " does not match expected " +
                                ShapeString(shape));
    if (it->second.data.size() != it->second.numel())
      throw LoadError(name, "data size does not match shape");
    for (float v : it->second.data)
      if (!std::isfinite(v)) throw LoadError(name, "non-finite value");
  }
  if (tensors.size() != expected.size()) {
    for (const auto& [name, t] : tensors) {
      bool known = std::any_of(expected.begin(), expected.end(),
                               [&](const auto& e) { return e.first == name; });
      if (!known) throw LoadError(name, "unexpected tensor");
    }
  }
  for (int l = 0; l < kConvLayers; ++l) {
    const auto name = ConvName(l, "bn_var");
    for (float v : at(name).data) {
      if (v < 0.0f) throw LoadError(name, "negative variance");
      if (!(v + config.bn_eps > 0.0))
        throw LoadError(name, "variance + bn_eps must be positive");
    }
  }
}

ModelWeights ZeroWeights(const ModelConfig& config) {
  ModelWeights w;
  w.config = config;
  for (const auto& [name, shape] : ExpectedTensors(config)) {
    Tensor t;
    t.shape = shape;
    t.data.assign(t.numel(), 0.0f);
    if (name.ends_with(".bn_var")) std::fill(t.data.begin(), t.data.end(), 1.0f);
    w.tensors.emplace(name, std::move(t));
  }
  return w;
}

ModelWeights RandomWeights(const ModelConfig& config, uint64_t seed) {
  SplitMix64 rng(seed);
  ModelWeights w;
  w.config = config;
  for (const auto& [name, shape] : ExpectedTensors(config)) {
    Tensor t;
    t.shape = shape;
    t.data.resize(t.numel());
    double lo = -1.0, hi = 1.0;
    if (name.ends_with(".kernel")) {
      const double fan_in = static_cast<double>(shape[1]) * shape[2] * shape[3];
      hi = std::sqrt(6.0 / fan_in);
      lo = -hi;
    } else if (name.ends_with(".bn_gamma") || name.ends_with(".bn_var")) {
      lo = 0.8;
      hi = 1.2;
    } else if (name.starts_with("conv")) {  // bias, bn_beta, bn_mean
      lo = -0.05;
      hi = 0.05;
    } else if (name.starts_with("lstm")) {
      hi = 1.0 / std::sqrt(static_cast<double>(config.lstm_hidden));
      lo = -hi;
    } else {  // fc
      const double fan_in = name.ends_with(".W")
                                ? shape[1]
                                : (name == "fc1.b"   ? config.lstm_hidden
                                   : name == "fc2.b" ? config.fc1
                                                     : config.fc2);
      hi = 1.0 / std::sqrt(fan_in);
      lo = -hi;
    }
    for (float& v : t.data) v = static_cast<float>(rng.Uniform(lo, hi));
    w.tensors.emplace(name, std::move(t));
  }
  return w;
}

ModelConfig TinyConfig() {
  ModelConfig c;
  c.stage_channels = {4, 4, 4};
  c.lstm_hidden = 128;
  c.fc1 = 128;
  c.fc2 = 128;
  return c;
}

ModelWeights MakePresetWeights(const std::string& preset) {
  if (preset == "zero") return ZeroWeights(ModelConfig{});
  if (preset == "tiny") return RandomWeights(TinyConfig(), 0);
  if (preset.starts_with("random:")) {
    const std::string digits = preset.substr(7);
    uint64_t seed = 0;
    auto [p, ec] =
        std::from_chars(digits.data(), digits.data() + digits.size(), seed);
    if (digits.empty() || ec != std::errc() ||
        p != digits.data() + digits.size())
      throw std::invalid_argument("bad preset seed: " + preset);
    return RandomWeights(ModelConfig{}, seed);
  }
  throw std::invalid_argument("unknown weight preset: " + preset);
}

// ---------------------------------------------------------------------------
// RVW1 serialization

std::vector<uint8_t> EncodeModel(const ModelWeights& weights) {
  weights.Validate();
  const ModelConfig& c = weights.config;
  std::string meta;
  meta += "audio_embed_dim=" + std::to_string(c.audio_embed_dim()) + "\n";
  meta += "bins=" + std::to_string(c.bins) + "\n";
  meta += "bn_eps=" + FormatDouble(c.bn_eps) + "\n";
  meta += "conv_channels=" + JoinInts(c.stage_channels) + "\n";
  const int fc[2] = {c.fc1, c.fc2};
  meta += "fc_dims=" + JoinInts(fc) + "\n";
  meta += "lstm_hidden=" + std::to_string(c.lstm_hidden) + "\n";
  meta += "visual_dim=" + std::to_string(c.visual_dim) + "\n";

  std::vector<uint8_t> out(kMagic, kMagic + 4);
  PutU32(out, kVersion);
  PutU32(out, static_cast<uint32_t>(meta.size()));
  out.insert(out.end(), meta.begin(), meta.end());
  const auto expected = ExpectedTensors(c);
  PutU32(out, static_cast<uint32_t>(expected.size()));
  for (const auto& [name, shape] : expected) {
    if (name.empty() || name.size() > 0xFFFF)
      throw std::invalid_argument("tensor name must be 1..65535 bytes");
    const Tensor& t = weights.at(name);
    PutU16(out, static_cast<uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(static_cast<uint8_t>(t.shape.size()));
    for (uint32_t d : t.shape) PutU32(out, d);
    for (float v : t.data) PutU32(out, std::bit_cast<uint32_t>(v));
  }
  return out;
}

ModelWeights DecodeModel(std::span<const uint8_t> bytes) {
  Reader r(bytes);
  if (r.Str(4, "magic") != std::string(kMagic, 4))
    throw FormatError("bad magic, expected RVW1", 0);
  const uint32_t version = r.U32("version");
  if (version != kVersion)
    throw FormatError("unsupported RVW1 version " + std::to_string(version),
                      4);
  const uint32_t meta_len = r.U32("metadata length");
  const std::string meta = r.Str(meta_len, "metadata");

  std::map<std::string, std::string> kv;
  {
    std::stringstream ss(meta);
    std::string line;
    while (std::getline(ss, line)) {
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw FormatError("bad metadata line '" + line + "'", 12);
      kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  auto require = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw LoadError(key, "missing metadata key");
    return it->second;
  };
  auto single = [&](const std::string& key) {
    auto v = ParseInts(key, require(key));
    if (v.size() != 1) throw LoadError(key, "expected a single integer");
    return v[0];
  };

  ModelWeights w;
  ModelConfig& c = w.config;
  c.bins = single("bins");
  if (c.bins != 257)
    throw LoadError("bins", "shape error: expected 257 bins, got " +
                                std::to_string(c.bins));
  c.visual_dim = single("visual_dim");
  c.lstm_hidden = single("lstm_hidden");
  auto channels = ParseInts("conv_channels", require("conv_channels"));
  if (channels.size() != kConvStages)
    throw LoadError("conv_channels", "expected 3 stage channel counts");
  std::copy(channels.begin(), channels.end(), c.stage_channels.begin());
  if (kv.count("fc_dims")) {
    auto fc = ParseInts("fc_dims", kv["fc_dims"]);
    if (fc.size() != 2) throw LoadError("fc_dims", "expected two widths");
    c.fc1 = fc[0];
    c.fc2 = fc[1];
  }
  if (kv.count("bn_eps")) {
    const std::string& s = kv["bn_eps"];
    char* end = nullptr;
    c.bn_eps = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size())
      throw LoadError("bn_eps", "bad metadata value '" + s + "'");
  }
  if (single("audio_embed_dim") != c.audio_embed_dim())
    throw LoadError("audio_embed_dim",
                    "shape error: conv stack yields " +
                        std::to_string(c.audio_embed_dim()));

  const uint32_t count = r.U32("tensor count");
  for (uint32_t i = 0; i < count; ++i) {
    const size_t start = r.pos();
    const uint16_t name_len = r.U16("tensor name length");
    if (name_len == 0)
      throw FormatError("empty tensor name", static_cast<int64_t>(start));
    std::string name = r.Str(name_len, "tensor name");
    Tensor t;
    const uint8_t ndim = r.U8("tensor rank");
    for (uint8_t d = 0; d < ndim; ++d) t.shape.push_back(r.U32("tensor dims"));
    const size_t n = t.numel();
    r.Need(n * 4, name.c_str());
    t.data.resize(n);
    for (size_t k = 0; k < n; ++k)
      t.data[k] = std::bit_cast<float>(r.U32("tensor data"));
    if (!w.tensors.emplace(name, std::move(t)).second)
      throw FormatError("duplicate tensor " + name,
                        static_cast<int64_t>(start));
  }
  if (r.remaining() != 0)
    throw FormatError("tensor count mismatch: " + std::to_string(count) +
                          " declared but bytes remain",
                      static_cast<int64_t>(r.pos()));
  w.Validate();
  return w;
}

void SaveModel(const ModelWeights& weights, const std::filesystem::path& path) {
  auto bytes = EncodeModel(weights);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model file: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

ModelWeights LoadModel(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file: " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return DecodeModel(bytes);
}

// ---------------------------------------------------------------------------
// Layers

namespace layers {

void ConvBlockFrame(const ModelConfig::ConvShape& s,
                    std::span<const float> kernel, std::span<const float> bias,
                    std::span<const float> bn_scale,
                    std::span<const float> bn_shift,
                    std::array<std::span<const float>, kKernelTime> taps,
                    std::span<float> out) {
  const int fin = s.freq_in, fout = s.freq_out, stride = s.freq_stride;
  for (int co = 0; co < s.out_channels; ++co) {
    float* o = out.data() + static_cast<size_t>(co) * fout;
    std::fill(o, o + fout, bias[co]);
    for (int kt = 0; kt < kKernelTime; ++kt) {
      if (taps[kt].empty()) continue;
      for (int ci = 0; ci < s.in_channels; ++ci) {
        const float* in = taps[kt].data() + static_cast<size_t>(ci) * fin;
        const float* k =
            kernel.data() +
            ((static_cast<size_t>(co) * s.in_channels + ci) * kKernelTime +
             kt) * kKernelFreq;
        for (int kf = 0; kf < kKernelFreq; ++kf) {
          const float wk = k[kf];
          // Input bin fo * stride + kf - 1 must lie in [0, fin).
          const int lo = kf == 0 ? 1 : 0;
          const int hi = std::min(fout - 1, (fin - kf) / stride);
          if (stride == 1) {
            for (int fo = lo; fo <= hi; ++fo) o[fo] += wk * in[fo + kf - 1];
          } else {
            for (int fo = lo; fo <= hi; ++fo)
              o[fo] += wk * in[fo * stride + kf - 1];
          }
        }
      }
    }
    const float sc = bn_scale[co], sh = bn_shift[co];
    for (int fo = 0; fo < fout; ++fo) o[fo] = std::max(0.0f, sc * o[fo] + sh);
  }
}

void AffineTransposed(std::span<const float> weight_t,
                      std::span<const float> bias, std::span<const float> x,
                      std::span<float> y) {
  const size_t rows = y.size();
  std::copy(bias.begin(), bias.end(), y.begin());
  float* out = y.data();
  for (size_t c = 0; c < x.size(); ++c) {
    const float xc = x[c];
    const float* w = weight_t.data() + c * rows;
    for (size_t r = 0; r < rows; ++r) out[r] += w[r] * xc;
  }
}

void Relu(std::span<float> x) {
  for (float& v : x) v = std::max(0.0f, v);
}

float Sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

}  // namespace layers

// ---------------------------------------------------------------------------
// MaskNet

MaskNet::MaskNet(std::shared_ptr<const ModelWeights> weights)
    : weights_(std::move(weights)) {
  if (!weights_) throw std::invalid_argument("null model weights");
  weights_->Validate();
  const ModelConfig& c = weights_->config;
  for (int l = 0; l < kConvLayers; ++l) {
    ConvLayer& layer = conv_[l];
    layer.shape = c.conv_shape(l);
    layer.kernel = weights_->at(ConvName(l, "kernel")).data;
    layer.bias = weights_->at(ConvName(l, "bias")).data;
    const auto& gamma = weights_->at(ConvName(l, "bn_gamma")).data;
    const auto& beta = weights_->at(ConvName(l, "bn_beta")).data;
    const auto& mean = weights_->at(ConvName(l, "bn_mean")).data;
    const auto& var = weights_->at(ConvName(l, "bn_var")).data;
    layer.scale.resize(gamma.size());
    layer.shift.resize(gamma.size());
    for (size_t i = 0; i < gamma.size(); ++i) {
      const double scale = gamma[i] / std::sqrt(var[i] + c.bn_eps);
      layer.scale[i] = static_cast<float>(scale);
      layer.shift[i] = static_cast<float>(beta[i] - mean[i] * scale);
    }
  }
  w_ih_t_ = Transpose(weights_->at("lstm.W_ih"));
  w_hh_t_ = Transpose(weights_->at("lstm.W_hh"));
  const auto& b_ih = weights_->at("lstm.b_ih").data;
  const auto& b_hh = weights_->at("lstm.b_hh").data;
  lstm_bias_.resize(b_ih.size());
  for (size_t i = 0; i < b_ih.size(); ++i) lstm_bias_[i] = b_ih[i] + b_hh[i];
  for (int i = 0; i < 3; ++i) {
    const std::string prefix = "fc" + std::to_string(i + 1);
    fc_w_t_[i] = Transpose(weights_->at(prefix + ".W"));
    fc_b_[i] = weights_->at(prefix + ".b").data;
  }
}

NetState MaskNet::NewState() const {
  NetState s;
  s.lstm.h.assign(config().lstm_hidden, 0.0f);
  s.lstm.c.assign(config().lstm_hidden, 0.0f);
  return s;
}

void MaskNet::CheckFinite(std::span<const float> frame) const {
  for (float v : frame)
    if (!std::isfinite(v))
      throw NonFiniteError("non-finite value in network input");
}

std::vector<float> MaskNet::AudioEncode(
    NetState& state, std::span<const float> compressed) const {
  if (static_cast<int>(compressed.size()) != config().bins)
    throw std::invalid_argument("compressed frame must have 257 bins");
  CheckFinite(compressed);
  std::vector<float> cur(compressed.begin(), compressed.end());
  for (int l = 0; l < kConvLayers; ++l) {
    const ConvLayer& layer = conv_[l];
    auto& hist = state.history[l];
    std::vector<float> out(static_cast<size_t>(layer.shape.out_channels) *
                           layer.shape.freq_out);
    layers::ConvBlockFrame(layer.shape, layer.kernel, layer.bias, layer.scale,
                           layer.shift, {hist[0], hist[1], cur}, out);
    hist[0] = std::move(hist[1]);
    hist[1] = std::move(cur);
    cur = std::move(out);
  }
  return cur;
}

std::vector<float> MaskNet::LstmStep(std::span<const float> x,
                                     LstmState& state) const {
  const int h = config().lstm_hidden;
  if (static_cast<int>(x.size()) != config().lstm_input_dim())
    throw std::invalid_argument("LSTM input dimension mismatch");
  std::vector<float> gates(4 * static_cast<size_t>(h));
  layers::AffineTransposed(w_ih_t_, lstm_bias_, x, gates);
  // Second accumulation onto the existing gate values.
  float* g = gates.data();
  for (int c = 0; c < h; ++c) {
    const float hc = state.h[c];
    const float* w = w_hh_t_.data() + static_cast<size_t>(c) * 4 * h;
    for (int r = 0; r < 4 * h; ++r) g[r] += w[r] * hc;
  }
  for (int k = 0; k < h; ++k) {
    const float i = layers::Sigmoid(g[k]);
    const float f = layers::Sigmoid(g[h + k]);
    const float cell = std::tanh(g[2 * h + k]);
    const float o = layers::Sigmoid(g[3 * h + k]);
    state.c[k] = f * state.c[k] + i * cell;
    state.h[k] = o * std::tanh(state.c[k]);
  }
  return state.h;
}

void MaskNet::DenseHead(std::span<const float> h, std::span<float> mask) const {
  const ModelConfig& c = config();
  std::vector<float> a(c.fc1), b(c.fc2);
  layers::AffineTransposed(fc_w_t_[0], fc_b_[0], h, a);
  layers::Relu(a);
  layers::AffineTransposed(fc_w_t_[1], fc_b_[1], a, b);
  layers::Relu(b);
  layers::AffineTransposed(fc_w_t_[2], fc_b_[2], b, mask);
  for (float& m : mask) m = layers::Sigmoid(m);
}

void MaskNet::PredictMask(NetState& state, std::span<const float> compressed,
                          std::span<const float> visual,
                          std::span<float> mask) const {
  const ModelConfig& c = config();
  if (static_cast<int>(visual.size()) != c.visual_dim)
    throw std::invalid_argument("visual embedding dimension mismatch");
  if (static_cast<int>(mask.size()) != c.bins)
    throw std::invalid_argument("mask must have 257 bins");
  CheckFinite(visual);
  std::vector<float> x = AudioEncode(state, compressed);
  x.insert(x.end(), visual.begin(), visual.end());
  LstmStep(x, state.lstm);
  DenseHead(state.lstm.h, mask);
  ++state.frames_seen;
}

std::vector<float> MaskNet::PredictSequence(std::span<const float> compressed,
                                            std::span<const float> visual,
                                            int frames) const {
  const ModelConfig& c = config();
  if (compressed.size() != static_cast<size_t>(frames) * c.bins ||
      visual.size() != static_cast<size_t>(frames) * c.visual_dim)
    throw std::invalid_argument("sequence shape mismatch");
  CheckFinite(compressed);
  CheckFinite(visual);

  // Conv stack, one layer at a time over the whole sequence.
  std::vector<std::vector<float>> act(frames);
  for (int t = 0; t < frames; ++t)
    act[t].assign(compressed.begin() + static_cast<size_t>(t) * c.bins,
                  compressed.begin() + static_cast<size_t>(t + 1) * c.bins);
  for (int l = 0; l < kConvLayers; ++l) {
    const ConvLayer& layer = conv_[l];
    std::vector<std::vector<float>> next(frames);
    for (int t = 0; t < frames; ++t) {
      next[t].resize(static_cast<size_t>(layer.shape.out_channels) *
                     layer.shape.freq_out);
      std::array<std::span<const float>, kKernelTime> taps;
      for (int k = 0; k < kKernelTime; ++k) {
        const int src = t - (kKernelTime - 1) + k;
        if (src >= 0) taps[k] = act[src];
      }
      layers::ConvBlockFrame(layer.shape, layer.kernel, layer.bias,
                             layer.scale, layer.shift, taps, next[t]);
    }
    act = std::move(next);
  }

  std::vector<float> masks(static_cast<size_t>(frames) * c.bins);
  LstmState state{std::vector<float>(c.lstm_hidden, 0.0f),
                  std::vector<float>(c.lstm_hidden, 0.0f)};
  for (int t = 0; t < frames; ++t) {
    std::vector<float> x = act[t];
    auto v = visual.subspan(static_cast<size_t>(t) * c.visual_dim,
                            c.visual_dim);
    x.insert(x.end(), v.begin(), v.end());
    LstmStep(x, state);
    DenseHead(state.h, std::span<float>(masks).subspan(
                           static_cast<size_t>(t) * c.bins, c.bins));
  }
  return masks;
}

}  // namespace avse
