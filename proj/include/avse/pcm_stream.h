// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Raw PCM framing for live ingest and output: each chunk is a u32 LE byte
// count followed by that many bytes of 16-bit signed LE mono samples at
// 16 kHz. A zero-length chunk is legal and carries no samples.

#ifndef AVSE_PCM_STREAM_H_
#define AVSE_PCM_STREAM_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace avse {

inline constexpr uint32_t kMaxPcmChunkBytes = 1u << 20;

std::vector<uint8_t> EncodePcmChunk(std::span<const double> samples);

// Reads exactly n bytes into the buffer; false on end of stream.
using ByteSource = std::function<bool(std::span<uint8_t>)>;

// Decodes framed chunks and re-blocks them into fixed-size sample blocks.
class PcmChunkReader {
 public:
  PcmChunkReader(ByteSource source, size_t block_samples);

  // Next block of exactly block_samples samples. At end of stream a partial
  // block is zero-padded; nullopt once nothing is left. Throws ProtocolError
  // on odd or oversized chunk lengths.
  std::optional<std::vector<double>> NextBlock();

 private:
  bool ReadChunk();

  ByteSource source_;
  size_t block_;
  std::vector<double> pending_;
  bool eof_ = false;
};

ByteSource FdByteSource(int fd);
// Writes all bytes; false on error.
bool WriteFd(int fd, std::span<const uint8_t> bytes);

}  // namespace avse

#endif  // AVSE_PCM_STREAM_H_
