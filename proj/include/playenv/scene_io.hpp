#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "playenv/action.hpp"
#include "playenv/calibration.hpp"
#include "playenv/renderer.hpp"

namespace playenv {

inline constexpr int kSchemaVersion = 1;

/// Everything needed to start a playable session.
struct SceneDescription {
  std::string name;
  Scene scene;
  /// Initial state per playable object id.
  StateMap initial_states;
  ActionModel action_model;
  /// Default viewpoint for new sessions.
  std::optional<CameraModel> camera;

  const ObjectSpec* find_object(int id) const;
  std::vector<int> playable_ids() const;
};

/// Every broken invariant, empty when the scene is usable.
std::vector<std::string> validate_scene(const SceneDescription& scene);

/// Parses and validates; throws ParseError on malformed content, ValidationError on violations.
SceneDescription parse_scene(std::string_view text);
SceneDescription load_scene(const std::filesystem::path& path);

/// JSON text to a document; syntax errors become ParseError with the 1-based line.
nlohmann::json parse_json_text(std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

// Camera JSON: {"R":[9 row-major camera-to-world], "t":[center], "fx","fy","cx","cy",
// "width","height"} or {"look_at":{"eye","target","up"?}, "fx","fy","width","height"}.
CameraModel camera_from_json(const nlohmann::json& j);
nlohmann::json camera_to_json(const CameraModel& camera);

Vec3 vec3_from_json(const nlohmann::json& j);
nlohmann::json to_json_array(const Eigen::Ref<const Eigen::VectorXd>& v);
Code code_from_json(const nlohmann::json& j);

nlohmann::json state_to_json(int id, const EnvironmentState& state);

FieldModel parse_field_model(const nlohmann::json& j);

struct LandmarkFrame {
  std::int64_t t = 0;
  std::map<std::string, Vec2> points;
};

struct LandmarkFile {
  std::optional<Intrinsics> intrinsics;
  std::vector<LandmarkFrame> frames;
};

LandmarkFile parse_landmarks(const nlohmann::json& j);
Intrinsics intrinsics_from_json(const nlohmann::json& j);

}  // namespace playenv
