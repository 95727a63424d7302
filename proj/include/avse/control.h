// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Control and telemetry endpoint for live sessions. Clients speak UTF-8 JSON
// objects, one per line, over TCP. A connection whose first bytes are an
// HTTP GET with "Upgrade: websocket" is switched to WebSocket framing, one
// JSON object per text frame, so browser consoles can attach directly.
// See docs/protocol.md for the message schema.

#ifndef AVSE_CONTROL_H_
#define AVSE_CONTROL_H_

#include <atomic>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <json.hpp>

#include "avse/net.h"
#include "avse/session.h"

namespace avse {

inline constexpr int kProtocolVersion = 1;

struct ControlOptions {
  int telemetry_period_ms = 200;
  size_t droppable_queue = 16;   // per connection, spectrum/mask
  size_t reliable_queue = 4096;  // per connection; overflow drops the client
  bool verbose_spectrum = false;  // send all 257 bins instead of 64 bands
};

nlohmann::json TelemetryJson(const Telemetry& t);

// Sec-WebSocket-Accept value for a client key.
std::string WebSocketAccept(const std::string& key);

class ControlService {
 public:
  // Binds immediately; throws IoError on bind failure.
  ControlService(Session& session, const std::string& host, uint16_t port,
                 ControlOptions options = {});
  ~ControlService();
  ControlService(const ControlService&) = delete;
  ControlService& operator=(const ControlService&) = delete;

  uint16_t port() const { return listener_.port(); }
  void Stop();
  size_t connection_count() const;

 private:
  struct Connection;
  void AcceptLoop();
  void TelemetryLoop();
  void ReaderLoop(std::shared_ptr<Connection> conn);
  void WriterLoop(std::shared_ptr<Connection> conn);
  void HandleMessage(Connection& conn, const std::string& text);
  void Broadcast(const std::string& stream, const nlohmann::json& msg,
                 bool droppable);
  void BroadcastTelemetry();
  void Reap();

  Session& session_;
  ControlOptions options_;
  net::Listener listener_;
  std::atomic<bool> stop_{false};
  mutable std::mutex conns_mu_;
  std::list<std::shared_ptr<Connection>> conns_;
  int listener_id_ = -1;
  std::thread accept_thread_;
  std::thread telemetry_thread_;
};

}  // namespace avse

#endif  // AVSE_CONTROL_H_
