// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Minimal blocking TCP helpers (POSIX).

#ifndef AVSE_NET_H_
#define AVSE_NET_H_

#include <cstdint>
#include <span>
#include <string>
#include <utility>

namespace avse::net {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { Close(); }
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      Close();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }

  // Returns bytes read; 0 on orderly shutdown, -1 on error.
  long ReadSome(std::span<uint8_t> buf);
  // Reads exactly buf.size() bytes; false on EOF/error.
  bool ReadExact(std::span<uint8_t> buf);
  // Writes everything; false on error.
  bool WriteAll(std::span<const uint8_t> data);
  bool WriteAll(const std::string& s) {
    return WriteAll(std::span<const uint8_t>(
        reinterpret_cast<const uint8_t*>(s.data()), s.size()));
  }
  // Wait up to timeout_ms for readability. True if readable.
  bool WaitReadable(int timeout_ms);
  // Unblocks pending reads in other threads.
  void Shutdown();
  void Close();

 private:
  int fd_ = -1;
};

// "host:port" -> (host, port). Throws std::invalid_argument.
std::pair<std::string, uint16_t> ParseHostPort(const std::string& spec);

class Listener {
 public:
  // Port 0 picks an ephemeral port. Throws IoError on bind failure.
  Listener(const std::string& host, uint16_t port);
  uint16_t port() const { return port_; }
  // Waits up to timeout_ms; invalid socket on timeout or after Shutdown.
  Socket Accept(int timeout_ms);
  void Shutdown() { sock_.Shutdown(); }

 private:
  Socket sock_;
  uint16_t port_ = 0;
};

Socket Connect(const std::string& host, uint16_t port);

}  // namespace avse::net

#endif  // AVSE_NET_H_
