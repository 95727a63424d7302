// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "avse/errors.h"
#include "avse/waveform.h"

namespace avse {

namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  size_t pos() const { return pos_; }
  size_t remaining() const { return bytes_.size() - pos_; }

  void Need(size_t n) const {
    if (remaining() < n)
      throw FormatError("truncated WAV data", static_cast<int64_t>(pos_));
  }
  uint32_t U32() {
    Need(4);
    uint32_t v = bytes_[pos_] | (bytes_[pos_ + 1] << 8) |
                 (bytes_[pos_ + 2] << 16) |
                 (static_cast<uint32_t>(bytes_[pos_ + 3]) << 24);
    pos_ += 4;
    return v;
  }
  uint16_t U16() {
    Need(2);
    uint16_t v = static_cast<uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::string Tag() {
    Need(4);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), 4);
    pos_ += 4;
    return s;
  }
  void Skip(size_t n) {
    Need(n);
    pos_ += n;
  }
  std::span<const uint8_t> Take(size_t n) {
    Need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
};

void PutU32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}
void PutU16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v));
  out.push_back(static_cast<uint8_t>(v >> 8));
}
void PutTag(std::vector<uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

void CheckFinite(const Waveform& wave) {
  if (wave.sample_rate <= 0)
    throw std::invalid_argument("sample rate must be positive");
  for (double s : wave.samples)
    if (!std::isfinite(s))
      throw std::invalid_argument("waveform contains non-finite samples");
}

int16_t ToPcm16(double sample) {
  double v = std::round(sample * 32768.0);
  v = std::clamp(v, -32768.0, 32767.0);
  return static_cast<int16_t>(v);
}

Waveform DecodeWav(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.Tag() != "RIFF") throw FormatError("missing RIFF tag", 0);
  r.U32();
  if (r.Tag() != "WAVE") throw FormatError("missing WAVE tag", 8);

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  while (r.remaining() >= 8) {
    size_t chunk_pos = r.pos();
    std::string tag = r.Tag();
    uint32_t size = r.U32();
    if (tag == "fmt ") {
      if (size < 16) throw FormatError("fmt chunk too small", chunk_pos);
      format = r.U16();
      channels = r.U16();
      rate = r.U32();
      r.U32();  // byte rate
      r.U16();  // block align
      bits = r.U16();
      size_t consumed = 16;
      if (format == kFormatExtensible && size >= 40) {
        r.U16();  // cbSize
        r.U16();  // valid bits
        r.U32();  // channel mask
        format = r.U16();  // first two bytes of the subformat GUID
        r.Skip(14);
        consumed = 40;
      }
      r.Skip(size - consumed + (size & 1));
      have_fmt = true;
    } else if (tag == "data") {
      if (!have_fmt) throw FormatError("data chunk before fmt", chunk_pos);
      if (channels == 0) throw FormatError("zero channels", chunk_pos);
      if (rate != static_cast<uint32_t>(kSampleRate))
        throw FormatError("unsupported sample rate " + std::to_string(rate) +
                          " Hz (only 16000 Hz is accepted)");
      size_t width;
      if (format == kFormatPcm && bits == 16)
        width = 2;
      else if (format == kFormatFloat && bits == 32)
        width = 4;
      else
        throw FormatError("unsupported sample format (format " +
                          std::to_string(format) + ", " +
                          std::to_string(bits) + " bits)");
      size_t avail = std::min<size_t>(size, r.remaining());
      if (avail < size)
        throw FormatError("data chunk truncated",
                          static_cast<int64_t>(r.pos() + avail));
      auto data = r.Take(size);
      size_t frame_bytes = width * channels;
      size_t n = size / frame_bytes;
      Waveform wave;
      wave.sample_rate = static_cast<int>(rate);
      wave.samples.resize(n);
      for (size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (size_t c = 0; c < channels; ++c) {
          const uint8_t* p = data.data() + i * frame_bytes + c * width;
          if (width == 2) {
            int16_t v = static_cast<int16_t>(p[0] | (p[1] << 8));
            acc += FromPcm16(v);
          } else {
            uint32_t u = p[0] | (p[1] << 8) | (p[2] << 16) |
                         (static_cast<uint32_t>(p[3]) << 24);
            acc += std::bit_cast<float>(u);
          }
        }
        wave.samples[i] = acc / channels;
      }
      return wave;
    } else {
      r.Skip(size + (size & 1));
    }
  }
  throw FormatError("no data chunk", static_cast<int64_t>(r.pos()));
}

Waveform ReadWav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open WAV file: " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  try {
    return DecodeWav(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<uint8_t> EncodeWav(const Waveform& wave, WavEncoding encoding) {
  CheckFinite(wave);
  const uint16_t bits = encoding == WavEncoding::kPcm16 ? 16 : 32;
  const uint16_t format =
      encoding == WavEncoding::kPcm16 ? kFormatPcm : kFormatFloat;
  const uint32_t data_bytes =
      static_cast<uint32_t>(wave.samples.size() * (bits / 8));
  std::vector<uint8_t> out;
  out.reserve(44 + data_bytes);
  PutTag(out, "RIFF");
  PutU32(out, 36 + data_bytes);
  PutTag(out, "WAVE");
  PutTag(out, "fmt ");
  PutU32(out, 16);
  PutU16(out, format);
  PutU16(out, 1);
  PutU32(out, static_cast<uint32_t>(wave.sample_rate));
  PutU32(out, static_cast<uint32_t>(wave.sample_rate) * (bits / 8));
  PutU16(out, bits / 8);
  PutU16(out, bits);
  PutTag(out, "data");
  PutU32(out, data_bytes);
  for (double s : wave.samples) {
    if (encoding == WavEncoding::kPcm16) {
      PutU16(out, static_cast<uint16_t>(ToPcm16(s)));
    } else {
      PutU32(out, std::bit_cast<uint32_t>(static_cast<float>(s)));
    }
  }
  return out;
}

void WriteWav(const std::filesystem::path& path, const Waveform& wave,
              WavEncoding encoding) {
  auto bytes = EncodeWav(wave, encoding);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write WAV file: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace avse
