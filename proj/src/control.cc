// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avse/control.h"

#include <openssl/evp.h>

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <set>
#include <sstream>

namespace avse {

using nlohmann::json;

namespace {

const std::set<std::string> kStreams = {"telemetry", "spectrum", "mask",
                                        "stall"};
constexpr size_t kMaxMessageBytes = 1 << 20;

std::string Lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string WsFrame(uint8_t opcode, const std::string& payload) {
  std::string f;
  f.push_back(static_cast<char>(0x80 | opcode));
  const size_t n = payload.size();
  if (n < 126) {
    f.push_back(static_cast<char>(n));
  } else if (n <= 0xFFFF) {
    f.push_back(126);
    f.push_back(static_cast<char>(n >> 8));
    f.push_back(static_cast<char>(n & 0xFF));
  } else {
    f.push_back(127);
    for (int i = 7; i >= 0; --i) f.push_back(static_cast<char>(n >> (8 * i)));
  }
  return f + payload;
}

}  // namespace

json TelemetryJson(const Telemetry& t) {
  json j;
  j["ticks_processed"] = t.ticks_processed;
  j["audio_seconds"] = t.audio_seconds;
  j["rtf"] = t.rtf;
  j["p50_ms"] = t.p50_ms;
  j["p95_ms"] = t.p95_ms;
  j["max_ms"] = t.max_ms;
  j["deadline_ms"] = kDeadlineMs;
  j["deadline_misses"] = t.deadline_misses;
  j["stalls"] = t.stalls;
  j["mask_mean"] = t.mask_mean;
  j["mask_min"] = t.mask_min;
  j["mask_max"] = t.mask_max;
  j["algorithmic_latency_ms"] = t.algorithmic_latency_ms;
  j["enhancement_enabled"] = t.enhancement_enabled;
  j["mode"] = t.enhancement_enabled ? "enhance" : "bypass";
  j["running"] = t.running;
  j["stopped"] = t.stopped;
  return j;
}

std::string WebSocketAccept(const std::string& key) {
  const std::string src = key + "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(src.data(), src.size(), digest, &len, EVP_sha1(), nullptr);
  unsigned char out[64];
  const int n = EVP_EncodeBlock(out, digest, static_cast<int>(len));
  return std::string(reinterpret_cast<char*>(out), n);
}

// ---------------------------------------------------------------------------

struct ControlService::Connection {
  explicit Connection(net::Socket s) : sock(std::move(s)) {}

  net::Socket sock;
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::pair<uint64_t, std::string>> reliable, droppable;
  uint64_t next_seq = 0;
  bool mode_known = false;
  bool websocket = false;
  bool closed = false;
  std::set<std::string> subscriptions = {"telemetry", "stall"};
  std::mutex write_mu;
  std::thread reader, writer;
  std::atomic<bool> done{false};

  bool Subscribed(const std::string& stream) {
    std::lock_guard<std::mutex> lock(mu);
    return subscriptions.count(stream) > 0;
  }

  void Close() {
    {
      std::lock_guard<std::mutex> lock(mu);
      closed = true;
    }
    cv.notify_all();
    sock.Shutdown();
  }

  // Stamps v and seq and queues the message. Droppable messages evict the
  // oldest queued droppable message when full; overflowing the reliable
  // queue disconnects the client.
  void Enqueue(json msg, bool droppable_msg, const ControlOptions& opt) {
    std::unique_lock<std::mutex> lock(mu);
    if (closed) return;
    msg["v"] = kProtocolVersion;
    msg["seq"] = next_seq;
    auto item = std::make_pair(next_seq++, msg.dump());
    if (droppable_msg) {
      if (droppable.size() >= opt.droppable_queue) droppable.pop_front();
      droppable.push_back(std::move(item));
    } else {
      if (reliable.size() >= opt.reliable_queue) {
        closed = true;
        lock.unlock();
        cv.notify_all();
        sock.Shutdown();
        return;
      }
      reliable.push_back(std::move(item));
    }
    lock.unlock();
    cv.notify_all();
  }

  bool Send(const std::string& text) {
    std::lock_guard<std::mutex> lock(write_mu);
    if (websocket) return sock.WriteAll(WsFrame(0x1, text));
    return sock.WriteAll(text + "\n");
  }

  bool SendRaw(const std::string& bytes) {
    std::lock_guard<std::mutex> lock(write_mu);
    return sock.WriteAll(bytes);
  }
};

ControlService::ControlService(Session& session, const std::string& host,
                               uint16_t port, ControlOptions options)
    : session_(session), options_(options), listener_(host, port) {
  listener_id_ = session_.AddListener([this](const SessionEvent& ev) {
    json msg;
    msg["payload"]["frame"] = ev.frame;
    msg["payload"]["video_frame"] = ev.video_frame;
    switch (ev.type) {
      case SessionEvent::Type::kSpectrum:
        msg["type"] = "spectrum";
        msg["payload"]["bins"] = options_.verbose_spectrum ? ev.full : ev.bins;
        Broadcast("spectrum", msg, true);
        break;
      case SessionEvent::Type::kMask:
        msg["type"] = "mask";
        msg["payload"]["bins"] = options_.verbose_spectrum ? ev.full : ev.bins;
        msg["payload"]["active"] = session_.enhancement_enabled();
        Broadcast("mask", msg, true);
        break;
      case SessionEvent::Type::kStall:
        msg["type"] = "stall";
        Broadcast("stall", msg, false);
        break;
    }
  });
  accept_thread_ = std::thread([this] { AcceptLoop(); });
  telemetry_thread_ = std::thread([this] { TelemetryLoop(); });
}

ControlService::~ControlService() { Stop(); }

void ControlService::Stop() {
  if (stop_.exchange(true)) return;
  session_.RemoveListener(listener_id_);
  listener_.Shutdown();
  if (accept_thread_.joinable()) accept_thread_.join();
  if (telemetry_thread_.joinable()) telemetry_thread_.join();
  std::list<std::shared_ptr<Connection>> conns;
  {
    std::lock_guard<std::mutex> lock(conns_mu_);
    conns.swap(conns_);
  }
  for (auto& c : conns) c->Close();
  for (auto& c : conns) {
    if (c->reader.joinable()) c->reader.join();
    if (c->writer.joinable()) c->writer.join();
  }
}

size_t ControlService::connection_count() const {
  std::lock_guard<std::mutex> lock(conns_mu_);
  return static_cast<size_t>(std::count_if(
      conns_.begin(), conns_.end(), [](const auto& c) { return !c->done; }));
}

void ControlService::Reap() {
  std::list<std::shared_ptr<Connection>> dead;
  {
    std::lock_guard<std::mutex> lock(conns_mu_);
    for (auto it = conns_.begin(); it != conns_.end();) {
      if ((*it)->done) {
        dead.push_back(*it);
        it = conns_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& c : dead) {
    c->Close();
    if (c->reader.joinable()) c->reader.join();
    if (c->writer.joinable()) c->writer.join();
  }
}

void ControlService::AcceptLoop() {
  while (!stop_) {
    net::Socket s = listener_.Accept(100);
    Reap();
    if (!s.valid() || stop_) continue;
    auto conn = std::make_shared<Connection>(std::move(s));
    conn->reader = std::thread([this, conn] { ReaderLoop(conn); });
    conn->writer = std::thread([this, conn] { WriterLoop(conn); });
    std::lock_guard<std::mutex> lock(conns_mu_);
    conns_.push_back(conn);
  }
}

void ControlService::TelemetryLoop() {
  const auto period = std::chrono::milliseconds(
      std::max(10, options_.telemetry_period_ms));
  auto next = std::chrono::steady_clock::now() + period;
  while (!stop_) {
    std::this_thread::sleep_until(std::min(
        next, std::chrono::steady_clock::now() + std::chrono::milliseconds(50)));
    if (std::chrono::steady_clock::now() < next) continue;
    next += period;
    BroadcastTelemetry();
  }
}

void ControlService::Broadcast(const std::string& stream, const json& msg,
                               bool droppable) {
  std::lock_guard<std::mutex> lock(conns_mu_);
  for (auto& c : conns_)
    if (!c->done && c->Subscribed(stream)) c->Enqueue(msg, droppable, options_);
}

void ControlService::BroadcastTelemetry() {
  json msg;
  msg["type"] = "telemetry";
  msg["payload"] = TelemetryJson(session_.Snapshot());
  Broadcast("telemetry", msg, false);
}

void ControlService::WriterLoop(std::shared_ptr<Connection> conn) {
  for (;;) {
    std::string text;
    {
      std::unique_lock<std::mutex> lock(conn->mu);
      conn->cv.wait(lock, [&] {
        return conn->closed || (conn->mode_known && (!conn->reliable.empty() ||
                                                     !conn->droppable.empty()));
      });
      if (conn->closed) break;
      // Emit in seq order across both queues.
      auto* q = &conn->reliable;
      if (conn->reliable.empty() ||
          (!conn->droppable.empty() &&
           conn->droppable.front().first < conn->reliable.front().first))
        q = &conn->droppable;
      text = std::move(q->front().second);
      q->pop_front();
    }
    if (!conn->Send(text)) break;
  }
  conn->Close();
  conn->done = true;
}

void ControlService::ReaderLoop(std::shared_ptr<Connection> conn) {
  std::string buf;
  std::vector<uint8_t> chunk(4096);
  auto read_more = [&]() {
    long n = conn->sock.ReadSome(chunk);
    if (n <= 0) return false;
    buf.append(reinterpret_cast<char*>(chunk.data()), static_cast<size_t>(n));
    return true;
  };
  auto set_mode = [&](bool ws) {
    {
      std::lock_guard<std::mutex> lock(conn->mu);
      conn->websocket = ws;
      conn->mode_known = true;
    }
    conn->cv.notify_all();
  };

  // Line clients may stay silent; browsers send the upgrade request at once.
  bool alive = true;
  if (conn->sock.WaitReadable(250)) alive = read_more();
  const bool websocket = alive && buf.rfind("GET ", 0) == 0;

  if (websocket) {
    while (buf.find("\r\n\r\n") == std::string::npos && alive &&
           buf.size() < 16384)
      alive = read_more();
    const size_t header_end = buf.find("\r\n\r\n");
    std::string key;
    if (alive && header_end != std::string::npos) {
      std::istringstream hs(buf.substr(0, header_end));
      std::string line;
      while (std::getline(hs, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::string name = Lower(line.substr(0, colon));
        std::string value = line.substr(colon + 1);
        value.erase(0, value.find_first_not_of(' '));
        if (name == "sec-websocket-key") key = value;
      }
    }
    if (key.empty()) {
      conn->SendRaw(
          "HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\n"
          "Connection: close\r\n\r\n");
      conn->Close();
      conn->done = true;
      return;
    }
    conn->SendRaw(
        "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\n"
        "Connection: Upgrade\r\nSec-WebSocket-Accept: " +
        WebSocketAccept(key) + "\r\n\r\n");
    buf.erase(0, header_end + 4);
    set_mode(true);

    std::string message;
    while (!stop_) {
      while (buf.size() < 2 && (alive = read_more())) {}
      if (!alive) break;
      const uint8_t b0 = buf[0], b1 = buf[1];
      const bool fin = b0 & 0x80;
      const uint8_t op = b0 & 0x0F;
      const bool masked = b1 & 0x80;
      uint64_t len = b1 & 0x7F;
      size_t hdr = 2;
      if (len == 126) hdr += 2;
      if (len == 127) hdr += 8;
      if (masked) hdr += 4;
      while (buf.size() < hdr && (alive = read_more())) {}
      if (!alive) break;
      if (len == 126) {
        len = (static_cast<uint8_t>(buf[2]) << 8) | static_cast<uint8_t>(buf[3]);
      } else if (len == 127) {
        len = 0;
        for (int i = 0; i < 8; ++i)
          len = (len << 8) | static_cast<uint8_t>(buf[2 + i]);
      }
      if (len > kMaxMessageBytes) break;
      while (buf.size() < hdr + len && (alive = read_more())) {}
      if (!alive) break;
      std::string payload = buf.substr(hdr, len);
      if (masked) {
        const size_t mk = hdr - 4;
        for (size_t i = 0; i < payload.size(); ++i)
          payload[i] = static_cast<char>(payload[i] ^ buf[mk + (i % 4)]);
      }
      buf.erase(0, hdr + len);
      if (op == 0x8) {
        conn->SendRaw(WsFrame(0x8, payload.substr(0, 2)));
        break;
      }
      if (op == 0x9) {
        conn->SendRaw(WsFrame(0xA, payload));
        continue;
      }
      if (op == 0x1 || op == 0x0) {
        message += payload;
        if (message.size() > kMaxMessageBytes) break;
        if (fin) {
          HandleMessage(*conn, message);
          message.clear();
        }
      }
    }
  } else {
    set_mode(false);
    while (!stop_ && alive) {
      size_t nl;
      while ((nl = buf.find('\n')) != std::string::npos) {
        std::string line = buf.substr(0, nl);
        buf.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        HandleMessage(*conn, line);
      }
      if (buf.size() > kMaxMessageBytes) break;
      alive = read_more();
    }
  }
  conn->Close();
  conn->done = true;
}

void ControlService::HandleMessage(Connection& conn, const std::string& text) {
  auto reply = [&](const char* type, const json& id, json payload) {
    json m;
    m["type"] = type;
    m["id"] = id;
    m["payload"] = std::move(payload);
    conn.Enqueue(std::move(m), false, options_);
  };
  auto error = [&](const json& id, const std::string& message) {
    reply("error", id, json{{"message", message}});
  };

  json msg;
  try {
    msg = json::parse(text);
  } catch (const json::parse_error& e) {
    error(nullptr, std::string("malformed JSON: ") + e.what());
    return;
  }
  if (!msg.is_object()) {
    error(nullptr, "message must be a JSON object");
    return;
  }
  const json id = msg.contains("id") ? msg["id"] : json(nullptr);
  if (msg.contains("v") && msg["v"] != kProtocolVersion) {
    error(id, "unsupported protocol version");
    return;
  }
  if (!msg.contains("type") || !msg["type"].is_string()) {
    error(id, "missing message type");
    return;
  }
  const std::string type = msg["type"];
  const json payload =
      msg.contains("payload") ? msg["payload"] : json::object();

  try {
    if (type == "ping") {
      reply("ack", id, json::object());
    } else if (type == "set_enhancement") {
      if (!payload.is_object() || !payload.contains("enabled") ||
          !payload["enabled"].is_boolean()) {
        error(id, "set_enhancement needs payload.enabled (boolean)");
        return;
      }
      const bool enabled = payload["enabled"];
      session_.SetEnhancement(enabled);
      reply("ack", id, json{{"enabled", enabled}});
      BroadcastTelemetry();
    } else if (type == "set_session") {
      session_.Reconfigure(ConfigFromJson(payload, session_.config()));
      reply("ack", id, json::object());
      BroadcastTelemetry();
    } else if (type == "start") {
      session_.Start();
      reply("ack", id, json{{"running", session_.running()}});
      BroadcastTelemetry();
    } else if (type == "stop") {
      session_.Stop();
      reply("ack", id, json{{"running", false}});
      BroadcastTelemetry();
    } else if (type == "subscribe") {
      if (!payload.is_object() || !payload.contains("streams") ||
          !payload["streams"].is_array()) {
        error(id, "subscribe needs payload.streams (array)");
        return;
      }
      std::set<std::string> subs;
      for (const auto& s : payload["streams"]) {
        if (!s.is_string() || !kStreams.count(s.get<std::string>())) {
          error(id, "unknown stream " + s.dump());
          return;
        }
        subs.insert(s.get<std::string>());
      }
      {
        std::lock_guard<std::mutex> lock(conn.mu);
        conn.subscriptions = subs;
      }
      reply("ack", id, json{{"streams", subs}});
    } else {
      error(id, "unknown message type '" + type + "'");
    }
  } catch (const std::exception& e) {
    error(id, e.what());
  }
}

}  // namespace avse
