// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avse/net.h"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

#include "avse/errors.h"

namespace avse::net {

long Socket::ReadSome(std::span<uint8_t> buf) {
  for (;;) {
    long n = ::recv(fd_, buf.data(), buf.size(), 0);
    if (n < 0 && errno == EINTR) continue;
    return n;
  }
}

bool Socket::ReadExact(std::span<uint8_t> buf) {
  size_t got = 0;
  while (got < buf.size()) {
    long n = ReadSome(buf.subspan(got));
    if (n <= 0) return false;
    got += static_cast<size_t>(n);
  }
  return true;
}

bool Socket::WriteAll(std::span<const uint8_t> data) {
  size_t sent = 0;
  while (sent < data.size()) {
    long n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    sent += static_cast<size_t>(n);
  }
  return true;
}

bool Socket::WaitReadable(int timeout_ms) {
  pollfd p{fd_, POLLIN, 0};
  int r = ::poll(&p, 1, timeout_ms);
  return r > 0;
}

void Socket::Shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::Close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

std::pair<std::string, uint16_t> ParseHostPort(const std::string& spec) {
  auto colon = spec.rfind(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("expected host:port, got '" + spec + "'");
  std::string host = spec.substr(0, colon);
  const std::string port_str = spec.substr(colon + 1);
  char* end = nullptr;
  long port = std::strtol(port_str.c_str(), &end, 10);
  if (port_str.empty() || *end != '\0' || port < 0 || port > 65535)
    throw std::invalid_argument("bad port in '" + spec + "'");
  if (host.empty()) host = "127.0.0.1";
  return {host, static_cast<uint16_t>(port)};
}

namespace {

sockaddr_in Resolve(const std::string& host, uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  const std::string h = host == "localhost" ? "127.0.0.1" : host;
  if (::inet_pton(AF_INET, h.c_str(), &addr.sin_addr) != 1) {
    addrinfo hints{}, *res = nullptr;
    hints.ai_family = AF_INET;
    if (::getaddrinfo(h.c_str(), nullptr, &hints, &res) != 0 || !res)
      throw IoError("cannot resolve host '" + host + "'");
    addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    ::freeaddrinfo(res);
  }
  return addr;
}

}  // namespace

Listener::Listener(const std::string& host, uint16_t port) {
  sockaddr_in addr = Resolve(host, port);
  sock_ = Socket(::socket(AF_INET, SOCK_STREAM, 0));
  if (!sock_.valid()) throw IoError("socket() failed");
  int one = 1;
  ::setsockopt(sock_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(sock_.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
    throw IoError("cannot bind " + host + ":" + std::to_string(port) + ": " +
                  std::strerror(errno));
  if (::listen(sock_.fd(), 16) != 0)
    throw IoError(std::string("listen() failed: ") + std::strerror(errno));
  socklen_t len = sizeof(addr);
  ::getsockname(sock_.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

Socket Listener::Accept(int timeout_ms) {
  if (!sock_.WaitReadable(timeout_ms)) return Socket();
  int fd = ::accept(sock_.fd(), nullptr, nullptr);
  if (fd < 0) return Socket();
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return Socket(fd);
}

Socket Connect(const std::string& host, uint16_t port) {
  sockaddr_in addr = Resolve(host, port);
  Socket s(::socket(AF_INET, SOCK_STREAM, 0));
  if (!s.valid()) throw IoError("socket() failed");
  if (::connect(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
    throw IoError("cannot connect to " + host + ":" + std::to_string(port) +
                  ": " + std::strerror(errno));
  int one = 1;
  ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return s;
}

}  // namespace avse::net
