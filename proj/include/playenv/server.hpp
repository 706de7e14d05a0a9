#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>

#include "playenv/protocol.hpp"

namespace playenv {

/// Websocket front end for ProtocolHandler. One thread per connection, text frames only.
class WebSocketServer {
public:
  /// Binds immediately; port 0 picks a free port.
  WebSocketServer(ProtocolHandler& handler, const std::string& address, std::uint16_t port);
  ~WebSocketServer();

  WebSocketServer(const WebSocketServer&) = delete;
  WebSocketServer& operator=(const WebSocketServer&) = delete;

  std::uint16_t port() const;

  /// Accept loop on a background thread.
  void start();
  /// Accept loop on the calling thread; returns after stop().
  void run();
  void stop();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace playenv
