// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Causal mask predictor: 15 conv+BN+ReLU blocks over (time, frequency) of
// the compressed magnitude, late fusion with the visual embedding, a
// unidirectional LSTM and three fully connected layers ending in a sigmoid.
//
// Conv blocks use 3x3 kernels. The time axis is left-padded by two frames
// (causal), the frequency axis padded by one bin on each side. Every fifth
// block halves the frequency resolution (stride 2), so 257 bins become
// 129, 65 and finally 33. The audio embedding is the flattened output of the
// last block: channels * 33 values.

#ifndef AVSE_MASKNET_H_
#define AVSE_MASKNET_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace avse {

inline constexpr int kConvLayers = 15;
inline constexpr int kConvStages = 3;
inline constexpr int kLayersPerStage = 5;
inline constexpr int kKernelTime = 3;
inline constexpr int kKernelFreq = 3;

struct ModelConfig {
  int bins = 257;
  // Output channels of the five blocks in each stage.
  std::array<int, kConvStages> stage_channels = {8, 8, 8};
  int visual_dim = 512;
  int lstm_hidden = 512;
  int fc1 = 512;
  int fc2 = 512;
  // BatchNorm epsilon. Zero keeps BN with (mean 0, var 1) an exact affine
  // map; variances must then be strictly positive.
  double bn_eps = 0.0;

  struct ConvShape {
    int in_channels, out_channels, freq_in, freq_out, freq_stride;
  };
  ConvShape conv_shape(int layer) const;  // layer in [0, 15)
  int audio_embed_dim() const;
  int lstm_input_dim() const { return audio_embed_dim() + visual_dim; }

  bool operator==(const ModelConfig&) const = default;
};

struct Tensor {
  std::vector<uint32_t> shape;
  std::vector<float> data;

  size_t numel() const;
};

// Named tensors. Layout (row-major):
//   conv{1..15}.kernel [out, in, 3 (time, oldest first), 3 (freq)]
//   conv{1..15}.{bias,bn_gamma,bn_beta,bn_mean,bn_var} [out]
//   lstm.W_ih [4H, in], lstm.W_hh [4H, H], lstm.b_ih [4H], lstm.b_hh [4H]
//     gate blocks ordered (input, forget, cell, output)
//   fc1.W [fc1, H], fc2.W [fc2, fc1], fc3.W [bins, fc2], fc{1..3}.b
struct ModelWeights {
  ModelConfig config;
  std::map<std::string, Tensor> tensors;

  const Tensor& at(const std::string& name) const;
  // Throws LoadError naming the first missing or misshapen tensor.
  void Validate() const;
};

// Canonical tensor names and shapes for a config, in file order.
std::vector<std::pair<std::string, std::vector<uint32_t>>> ExpectedTensors(
    const ModelConfig& config);

ModelWeights ZeroWeights(const ModelConfig& config);
ModelWeights RandomWeights(const ModelConfig& config, uint64_t seed);

// RVW1 weight file. See docs/formats.md.
std::vector<uint8_t> EncodeModel(const ModelWeights& weights);
ModelWeights DecodeModel(std::span<const uint8_t> bytes);
void SaveModel(const ModelWeights& weights, const std::filesystem::path& path);
ModelWeights LoadModel(const std::filesystem::path& path);

namespace layers {

// One causal conv block evaluated for a single output time step.
// taps[k] is the input frame at time t - 2 + k laid out [in][freq_in], or an
// empty span for time steps before the stream start (zero padding).
// out is [out][freq_out]. Applies conv, folded BN (scale * x + shift), ReLU.
void ConvBlockFrame(const ModelConfig::ConvShape& shape,
                    std::span<const float> kernel, std::span<const float> bias,
                    std::span<const float> bn_scale,
                    std::span<const float> bn_shift,
                    std::array<std::span<const float>, kKernelTime> taps,
                    std::span<float> out);

// y = W x + b with W given transposed ([in][out]) so the inner loop is
// contiguous.
void AffineTransposed(std::span<const float> weight_t,
                      std::span<const float> bias, std::span<const float> x,
                      std::span<float> y);

void Relu(std::span<float> x);
float Sigmoid(float x);

}  // namespace layers

struct LstmState {
  std::vector<float> h;
  std::vector<float> c;
};

// Per-stream mutable inference state. Single owner.
struct NetState {
  // For each conv block, its last two input frames (oldest first); empty
  // until the stream has produced them.
  std::array<std::array<std::vector<float>, kKernelTime - 1>, kConvLayers>
      history;
  LstmState lstm;
  int64_t frames_seen = 0;
};

class MaskNet {
 public:
  explicit MaskNet(std::shared_ptr<const ModelWeights> weights);

  const ModelConfig& config() const { return weights_->config; }
  const ModelWeights& weights() const { return *weights_; }

  NetState NewState() const;

  // Consumes one compressed-magnitude frame (bins values) and returns its
  // audio embedding. Depends only on this and earlier frames.
  std::vector<float> AudioEncode(NetState& state,
                                 std::span<const float> compressed) const;

  // One LSTM step on x = [audio embedding, visual]; updates state.lstm and
  // returns the new hidden vector.
  std::vector<float> LstmStep(std::span<const float> x,
                              LstmState& state) const;

  // Full per-frame path; mask receives bins values in (0, 1).
  void PredictMask(NetState& state, std::span<const float> compressed,
                   std::span<const float> visual, std::span<float> mask) const;

  // Batch path over a whole sequence. compressed is [T][bins], visual is the
  // 100 fps aligned [T][visual_dim]. Returns [T][bins]. Runs the conv stack
  // layer by layer over time, then the recurrent and dense layers.
  std::vector<float> PredictSequence(std::span<const float> compressed,
                                     std::span<const float> visual,
                                     int frames) const;

 private:
  struct ConvLayer {
    ModelConfig::ConvShape shape;
    std::vector<float> kernel, bias, scale, shift;
  };
  void DenseHead(std::span<const float> h, std::span<float> mask) const;
  void CheckFinite(std::span<const float> frame) const;

  std::shared_ptr<const ModelWeights> weights_;
  std::array<ConvLayer, kConvLayers> conv_;
  // Transposed weight copies: [in][out].
  std::vector<float> w_ih_t_, w_hh_t_, lstm_bias_;
  std::vector<float> fc_w_t_[3], fc_b_[3];
};

// Fixture presets for the CLI: "zero", "random:<seed>", "tiny".
ModelConfig TinyConfig();
ModelWeights MakePresetWeights(const std::string& preset);

}  // namespace avse

#endif  // AVSE_MASKNET_H_
