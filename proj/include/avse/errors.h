// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef AVSE_ERRORS_H_
#define AVSE_ERRORS_H_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace avse {

// Malformed or inconsistent file content. Carries the byte offset where
// decoding stopped, or -1 when the problem is not tied to a position.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, int64_t offset = -1)
      : std::runtime_error(offset >= 0
                               ? what + " (at byte offset " +
                                     std::to_string(offset) + ")"
                               : what),
        offset_(offset) {}
  int64_t offset() const { return offset_; }

 private:
  int64_t offset_;
};

// Model file is readable but a tensor is missing or has the wrong shape.
class LoadError : public std::runtime_error {
 public:
  LoadError(const std::string& tensor, const std::string& what)
      : std::runtime_error(tensor.empty() ? what : tensor + ": " + what),
        tensor_(tensor) {}
  const std::string& tensor() const { return tensor_; }

 private:
  std::string tensor_;
};

// Stream protocol violated (out-of-order frame indices, bad framing).
class ProtocolError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Not enough embeddings for the requested audio duration.
class CoverageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Signal energy is zero so SNR is undefined.
class UndefinedSnrError : public std::domain_error {
  using std::domain_error::domain_error;
};

// NaN or Inf reached the network input.
class NonFiniteError : public std::domain_error {
  using std::domain_error::domain_error;
};

class IoError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace avse

#endif  // AVSE_ERRORS_H_
