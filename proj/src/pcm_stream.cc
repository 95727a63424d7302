// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avse/pcm_stream.h"

#include <unistd.h>

#include <cerrno>
#include <string>

#include "avse/errors.h"
#include "avse/waveform.h"

namespace avse {

std::vector<uint8_t> EncodePcmChunk(std::span<const double> samples) {
  const uint32_t bytes = static_cast<uint32_t>(samples.size() * 2);
  std::vector<uint8_t> out;
  out.reserve(4 + bytes);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(bytes >> (8 * i)));
  for (double s : samples) {
    const auto v = static_cast<uint16_t>(ToPcm16(s));
    out.push_back(static_cast<uint8_t>(v));
    out.push_back(static_cast<uint8_t>(v >> 8));
  }
  return out;
}

PcmChunkReader::PcmChunkReader(ByteSource source, size_t block_samples)
    : source_(std::move(source)), block_(block_samples) {}

bool PcmChunkReader::ReadChunk() {
  uint8_t hdr[4];
  if (!source_(hdr)) return false;
  const uint32_t len = hdr[0] | (hdr[1] << 8) | (hdr[2] << 16) |
                       (static_cast<uint32_t>(hdr[3]) << 24);
  if (len % 2 != 0)
    throw ProtocolError("PCM chunk length " + std::to_string(len) +
                        " is not a whole number of 16-bit samples");
  if (len > kMaxPcmChunkBytes)
    throw ProtocolError("PCM chunk length " + std::to_string(len) +
                        " exceeds limit");
  std::vector<uint8_t> body(len);
  if (len > 0 && !source_(body))
    throw ProtocolError("PCM stream ended inside a chunk");
  for (size_t i = 0; i + 1 < body.size(); i += 2)
    pending_.push_back(
        FromPcm16(static_cast<int16_t>(body[i] | (body[i + 1] << 8))));
  return true;
}

std::optional<std::vector<double>> PcmChunkReader::NextBlock() {
  while (pending_.size() < block_ && !eof_)
    if (!ReadChunk()) eof_ = true;
  if (pending_.empty()) return std::nullopt;
  std::vector<double> out(block_, 0.0);
  const size_t n = std::min(block_, pending_.size());
  std::copy(pending_.begin(), pending_.begin() + n, out.begin());
  pending_.erase(pending_.begin(), pending_.begin() + n);
  return out;
}

ByteSource FdByteSource(int fd) {
  return [fd](std::span<uint8_t> buf) {
    size_t got = 0;
    while (got < buf.size()) {
      ssize_t n = ::read(fd, buf.data() + got, buf.size() - got);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) return false;
      got += static_cast<size_t>(n);
    }
    return true;
  };
}

bool WriteFd(int fd, std::span<const uint8_t> bytes) {
  size_t sent = 0;
  while (sent < bytes.size()) {
    ssize_t n = ::write(fd, bytes.data() + sent, bytes.size() - sent);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    sent += static_cast<size_t>(n);
  }
  return true;
}

}  // namespace avse
