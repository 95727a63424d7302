// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avse/embeddings.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "avse/errors.h"

namespace avse {

namespace {

constexpr char kMagic[4] = {'R', 'V', 'E', '1'};
constexpr uint32_t kVersion = 1;
constexpr size_t kHeaderBytes = 20;

uint32_t ReadU32(std::span<const uint8_t> b, size_t pos) {
  return b[pos] | (b[pos + 1] << 8) | (b[pos + 2] << 16) |
         (static_cast<uint32_t>(b[pos + 3]) << 24);
}

void PutU32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

}  // namespace

VisualEmbeddingSequence DecodeEmbeddings(std::span<const uint8_t> bytes) {
  if (bytes.size() < 4) throw FormatError("truncated RVE1 header", 0);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError("bad magic, expected RVE1", 0);
  if (bytes.size() < kHeaderBytes)
    throw FormatError("truncated RVE1 header",
                      static_cast<int64_t>(bytes.size()));
  const uint32_t version = ReadU32(bytes, 4);
  if (version != kVersion)
    throw FormatError("unsupported RVE1 version " + std::to_string(version),
                      4);
  const uint32_t fps = ReadU32(bytes, 8);
  const uint32_t n = ReadU32(bytes, 12);
  const uint32_t d = ReadU32(bytes, 16);
  if (fps != static_cast<uint32_t>(kVideoFps))
    throw FormatError("unsupported frame rate " + std::to_string(fps), 8);
  if (d == 0) throw FormatError("embedding dimension must be >= 1", 16);
  const uint64_t payload = static_cast<uint64_t>(n) * d * 4;
  if (bytes.size() - kHeaderBytes < payload)
    throw FormatError("truncated RVE1 payload: expected " +
                          std::to_string(payload) + " bytes",
                      static_cast<int64_t>(bytes.size()));
  if (bytes.size() - kHeaderBytes > payload)
    throw FormatError("trailing bytes after RVE1 payload",
                      static_cast<int64_t>(kHeaderBytes + payload));

  VisualEmbeddingSequence seq;
  seq.count = static_cast<int>(n);
  seq.dim = static_cast<int>(d);
  seq.fps = static_cast<int>(fps);
  seq.data.resize(static_cast<size_t>(n) * d);
  for (size_t i = 0; i < seq.data.size(); ++i) {
    const size_t pos = kHeaderBytes + 4 * i;
    float v = std::bit_cast<float>(ReadU32(bytes, pos));
    if (!std::isfinite(v))
      throw FormatError("non-finite embedding value",
                        static_cast<int64_t>(pos));
    seq.data[i] = v;
  }
  return seq;
}

VisualEmbeddingSequence LoadEmbeddingFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embedding file: " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  VisualEmbeddingSequence seq;
  try {
    seq = DecodeEmbeddings(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  seq.source_id = path.string();
  return seq;
}

std::vector<uint8_t> EncodeEmbeddings(const VisualEmbeddingSequence& seq) {
  if (seq.data.size() != static_cast<size_t>(seq.count) * seq.dim)
    throw std::invalid_argument("embedding data size does not match N x D");
  std::vector<uint8_t> out(kMagic, kMagic + 4);
  out.reserve(kHeaderBytes + seq.data.size() * 4);
  PutU32(out, kVersion);
  PutU32(out, static_cast<uint32_t>(seq.fps));
  PutU32(out, static_cast<uint32_t>(seq.count));
  PutU32(out, static_cast<uint32_t>(seq.dim));
  for (float v : seq.data) PutU32(out, std::bit_cast<uint32_t>(v));
  return out;
}

void SaveEmbeddingFile(const VisualEmbeddingSequence& seq,
                       const std::filesystem::path& path) {
  auto bytes = EncodeEmbeddings(seq);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write embedding file: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

float SyntheticEmbeddingValue(int64_t frame, int component, int64_t seed) {
  return static_cast<float>(std::sin(0.1 * static_cast<double>(frame + 1) *
                                         static_cast<double>(component + 1) +
                                     static_cast<double>(seed)));
}

VisualEmbeddingSequence SyntheticEmbeddings(int n_frames, int dim,
                                            int64_t seed) {
  if (n_frames < 0 || dim < 1)
    throw std::invalid_argument("synthetic embeddings need n >= 0, dim >= 1");
  VisualEmbeddingSequence seq;
  seq.count = n_frames;
  seq.dim = dim;
  seq.source_id = "synthetic:" + std::to_string(seed);
  seq.data.resize(static_cast<size_t>(n_frames) * dim);
  for (int i = 0; i < n_frames; ++i)
    for (int j = 0; j < dim; ++j)
      seq.data[static_cast<size_t>(i) * dim + j] =
          SyntheticEmbeddingValue(i, j, seed);
  return seq;
}

FileEmbeddingProvider::FileEmbeddingProvider(VisualEmbeddingSequence seq)
    : seq_(std::move(seq)) {}

std::unique_ptr<FileEmbeddingProvider> FileEmbeddingProvider::Open(
    const std::filesystem::path& path) {
  return std::make_unique<FileEmbeddingProvider>(LoadEmbeddingFile(path));
}

EmbeddingProviderDescriptor FileEmbeddingProvider::descriptor() const {
  return {ProviderKind::kFile, seq_.dim, 5, 2};
}

std::optional<std::vector<float>> FileEmbeddingProvider::Frame(
    int64_t index) const {
  if (index < 0 || index >= seq_.count) return std::nullopt;
  auto v = seq_.vector(static_cast<int>(index));
  return std::vector<float>(v.begin(), v.end());
}

EmbeddingProviderDescriptor SyntheticEmbeddingProvider::descriptor() const {
  return {ProviderKind::kSynthetic, dim_, 5, 2};
}

std::optional<std::vector<float>> SyntheticEmbeddingProvider::Frame(
    int64_t index) const {
  if (index < 0) return std::nullopt;
  std::vector<float> v(dim_);
  for (int j = 0; j < dim_; ++j) v[j] = SyntheticEmbeddingValue(index, j, seed_);
  return v;
}

}  // namespace avse
