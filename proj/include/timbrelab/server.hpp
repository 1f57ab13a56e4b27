// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Control endpoint for a running synth: WebSocket JSON messages and the
// control page over HTTP on the same port.

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "json.hpp"
#include "timbrelab/synth.hpp"

namespace timbrelab::server {

/// {"type":"status", ...} for the channel's current state.
nlohmann::json status_message(const synth::Engine& engine, const synth::ControlState& state);

/// Applies one client message. Returns the reply to send (a status for
/// get_status, an error for malformed input) or null when there is none.
/// Invalid messages leave the state untouched.
nlohmann::json handle_message(synth::Engine& engine, std::string_view text);

/// Minimal control page served at "/".
std::string_view control_page();

struct ServerOptions {
  std::string address = "127.0.0.1";
  /// 0 picks a free port; see ControlServer::port().
  std::uint16_t port = 8765;
  double status_hz = 10.0;
};

class ControlServer {
 public:
  /// Binds immediately; throws kDevice when the port is unavailable.
  ControlServer(synth::Engine& engine, ServerOptions options);
  ~ControlServer();
  ControlServer(const ControlServer&) = delete;
  ControlServer& operator=(const ControlServer&) = delete;

  std::uint16_t port() const;
  /// Serves on a background thread until stop().
  void start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace timbrelab::server
