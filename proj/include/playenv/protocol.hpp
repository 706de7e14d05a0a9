#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "playenv/session.hpp"

namespace playenv {

// Client -> server:
//   {"type":"create", "scene":name, "seed"?:n, "camera"?:camera}
//   {"type":"step", "commands":[{"id","a","v"?}], "camera"?:camera, "styles"?:[{"id","w"}]}
//   {"type":"close"}
// Server -> client:
//   {"type":"session", "session_id", "scene", "width", "height", "objects":[...], "actions":{...}}
//   {"type":"frame", "session_id", "tick", "png_base64", "states":[{"id","x","w","pi","valid"}]}
//   {"type":"error", "message", "tick"?}

using SceneLibrary = std::map<std::string, SceneDescription>;

/// Every *.json scene in `dir`, keyed by file stem. Invalid files are skipped with a warning.
SceneLibrary load_scene_library(const std::filesystem::path& dir);

struct ServiceOptions {
  int preview_width = 256;
  int preview_height = 144;
  std::vector<int> factors{8, 4};
};

std::string base64_encode(std::span<const std::uint8_t> bytes);

nlohmann::json frame_message(const Session& session);

/// Per-connection state: a connection owns at most one session.
struct Connection {
  std::string session_id;
};

/// Transport-independent message handling. Thread-safe across connections; one connection's
/// messages must be fed in arrival order.
class ProtocolHandler {
public:
  ProtocolHandler(SessionManager& sessions, const SceneLibrary& scenes, ServiceOptions options = {});

  std::vector<nlohmann::json> handle(const nlohmann::json& message, Connection& connection);
  std::vector<nlohmann::json> handle_text(std::string_view text, Connection& connection);

  /// Drops the connection's session.
  void disconnect(Connection& connection);

private:
  std::vector<nlohmann::json> create(const nlohmann::json& message, Connection& connection);
  std::vector<nlohmann::json> step(const nlohmann::json& message, Connection& connection);

  SessionManager& sessions_;
  const SceneLibrary& scenes_;
  ServiceOptions options_;
};

}  // namespace playenv
