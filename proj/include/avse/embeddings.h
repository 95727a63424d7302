// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Lip-movement embedding sources. The visual encoder itself is external;
// providers replay precomputed embeddings (RVE1 files) or generate a
// closed-form synthetic sequence for tests and benchmarks.

#ifndef AVSE_EMBEDDINGS_H_
#define AVSE_EMBEDDINGS_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace avse {

inline constexpr int kVideoFps = 25;
inline constexpr int kDefaultEmbeddingDim = 512;

// N x D row-major embedding vectors at `fps` frames per second.
struct VisualEmbeddingSequence {
  std::vector<float> data;
  int count = 0;
  int dim = kDefaultEmbeddingDim;
  int fps = kVideoFps;
  std::string source_id;

  std::span<const float> vector(int i) const {
    return {data.data() + static_cast<size_t>(i) * dim,
            static_cast<size_t>(dim)};
  }
};

enum class ProviderKind { kFile, kSynthetic };

struct EmbeddingProviderDescriptor {
  ProviderKind kind = ProviderKind::kSynthetic;
  int dim = kDefaultEmbeddingDim;
  int receptive_field = 5;
  int lookahead = 2;
};

// RVE1: "RVE1", u32 version=1, u32 fps, u32 N, u32 D, N*D float32 LE.
VisualEmbeddingSequence LoadEmbeddingFile(const std::filesystem::path& path);
VisualEmbeddingSequence DecodeEmbeddings(std::span<const uint8_t> bytes);
std::vector<uint8_t> EncodeEmbeddings(const VisualEmbeddingSequence& seq);
void SaveEmbeddingFile(const VisualEmbeddingSequence& seq,
                       const std::filesystem::path& path);

// v[i][j] = sin(0.1 * (i + 1) * (j + 1) + seed).
float SyntheticEmbeddingValue(int64_t frame, int component, int64_t seed);
VisualEmbeddingSequence SyntheticEmbeddings(int n_frames, int dim,
                                            int64_t seed);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual EmbeddingProviderDescriptor descriptor() const = 0;
  // Embedding for video frame `index`, or nullopt past the end of a finite
  // source.
  virtual std::optional<std::vector<float>> Frame(int64_t index) const = 0;
  // Number of frames available, or nullopt for unbounded sources.
  virtual std::optional<int64_t> size() const = 0;
};

class FileEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit FileEmbeddingProvider(VisualEmbeddingSequence seq);
  static std::unique_ptr<FileEmbeddingProvider> Open(
      const std::filesystem::path& path);

  EmbeddingProviderDescriptor descriptor() const override;
  std::optional<std::vector<float>> Frame(int64_t index) const override;
  std::optional<int64_t> size() const override { return seq_.count; }
  const VisualEmbeddingSequence& sequence() const { return seq_; }

 private:
  VisualEmbeddingSequence seq_;
};

class SyntheticEmbeddingProvider : public EmbeddingProvider {
 public:
  SyntheticEmbeddingProvider(int dim, int64_t seed) : dim_(dim), seed_(seed) {}

  EmbeddingProviderDescriptor descriptor() const override;
  std::optional<std::vector<float>> Frame(int64_t index) const override;
  std::optional<int64_t> size() const override { return std::nullopt; }

 private:
  int dim_;
  int64_t seed_;
};

}  // namespace avse

#endif  // AVSE_EMBEDDINGS_H_
