#include "playenv/protocol.hpp"

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include "playenv/errors.hpp"

namespace playenv {

using nlohmann::json;

SceneLibrary load_scene_library(const std::filesystem::path& dir) {
  SceneLibrary lib;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    try {
      lib.emplace(entry.path().stem().string(), load_scene(entry.path()));
    } catch (const std::exception& e) {
      spdlog::warn("skipping scene {}: {}", entry.path().string(), e.what());
    }
  }
  return lib;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

json frame_message(const Session& session) {
  const Frame& f = session.last_frame();
  json states = json::array();
  for (const auto& [id, st] : f.states) states.push_back(state_to_json(id, st));
  return json{{"type", "frame"},
              {"session_id", session.id()},
              {"tick", f.tick},
              {"png_base64", base64_encode(encode_png(f.image))},
              {"states", std::move(states)}};
}

namespace {

json error_message(const std::string& what, std::optional<std::int64_t> tick = std::nullopt) {
  json j{{"type", "error"}, {"message", what}};
  if (tick) j["tick"] = *tick;
  return j;
}

json session_message(const Session& s) {
  const auto& d = s.scene();
  json objects = json::array();
  for (const auto& o : d.scene.objects)
    objects.push_back({{"id", o.id},
                       {"name", o.name},
                       {"kind", o.kind == ObjectKind::Playable ? "playable" : "static"}});
  json centroids = json::array();
  for (const auto& c : d.action_model.centroids) centroids.push_back(to_json_array(c));
  return json{{"type", "session"},
              {"session_id", s.id()},
              {"scene", d.name},
              {"width", d.scene.render.width},
              {"height", d.scene.render.height},
              {"style_dim", d.scene.style_dim},
              {"camera", camera_to_json(s.camera())},
              {"objects", std::move(objects)},
              {"actions", {{"K", d.action_model.action_count()}, {"centroids", std::move(centroids)}}}};
}

}  // namespace

ProtocolHandler::ProtocolHandler(SessionManager& sessions, const SceneLibrary& scenes,
                                 ServiceOptions options)
    : sessions_(sessions), scenes_(scenes), options_(std::move(options)) {}

std::vector<json> ProtocolHandler::handle_text(std::string_view text, Connection& connection) {
  json message;
  try {
    message = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    return {error_message(std::string("malformed message: ") + e.what())};
  }
  return handle(message, connection);
}

std::vector<json> ProtocolHandler::handle(const json& message, Connection& connection) {
  try {
    const auto type = message.at("type").get<std::string>();
    if (type == "create") return create(message, connection);
    if (type == "step") return step(message, connection);
    if (type == "close") {
      disconnect(connection);
      return {json{{"type", "closed"}}};
    }
    return {error_message("unknown message type '" + type + "'")};
  } catch (const json::exception& e) {
    return {error_message(std::string("malformed message: ") + e.what())};
  } catch (const std::exception& e) {
    return {error_message(e.what())};
  }
}

std::vector<json> ProtocolHandler::create(const json& message, Connection& connection) {
  const auto name = message.at("scene").get<std::string>();
  const auto it = scenes_.find(name);
  if (it == scenes_.end()) return {error_message("unknown scene '" + name + "'")};

  SceneDescription scene = it->second;
  scene.scene.render.width = options_.preview_width;
  scene.scene.render.height = options_.preview_height;
  scene.scene.render.factors = options_.factors;

  std::optional<CameraModel> camera = scene.camera;
  if (message.contains("camera")) camera = camera_from_json(message.at("camera"));
  if (!camera) return {error_message("scene '" + name + "' has no default camera; send one")};

  if (!connection.session_id.empty()) disconnect(connection);
  const auto entry = sessions_.create(scene, *camera, message.value("seed", std::uint64_t{0}));
  std::lock_guard lock(entry->mutex);
  connection.session_id = entry->session->id();
  spdlog::info("created session {} on scene {}", connection.session_id, name);
  return {session_message(*entry->session), frame_message(*entry->session)};
}

std::vector<json> ProtocolHandler::step(const json& message, Connection& connection) {
  const auto entry = sessions_.find(connection.session_id);
  if (!entry) return {error_message("no live session; send a create message first")};
  std::lock_guard lock(entry->mutex);
  Session& session = *entry->session;

  CommandMap commands;
  for (const auto& cj : message.at("commands")) {
    Command c;
    c.action = cj.at("a").get<int>();
    if (cj.contains("v") && !cj.at("v").is_null()) c.variability = vec3_from_json(cj.at("v"));
    commands[cj.at("id").get<int>()] = c;
  }
  StyleOverrides styles;
  if (message.contains("styles"))
    for (const auto& sj : message.at("styles")) styles[sj.at("id").get<int>()] = code_from_json(sj.at("w"));
  const CameraModel camera =
      message.contains("camera") ? camera_from_json(message.at("camera")) : session.camera();
  try {
    session.step(commands, camera, styles);
  } catch (const DomainError& e) {
    return {error_message(e.what(), session.tick())};
  }
  return {frame_message(session)};
}

void ProtocolHandler::disconnect(Connection& connection) {
  if (connection.session_id.empty()) return;
  sessions_.erase(connection.session_id);
  connection.session_id.clear();
}

}  // namespace playenv
