#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "playenv/action.hpp"
#include "playenv/geometry.hpp"
#include "playenv/metrics.hpp"

namespace playenv {

struct ObjectRecord {
  int id = 0;
  EnvironmentState state;
  std::optional<BoundingBox2D> bbox;
};

struct ActionRecord {
  int id = 0;
  int action = 0;
  Vec3 variability = Vec3::Zero();
};

/// One frame of a TrajectoryLog. `actions` are the commands that produced this frame from the
/// previous one, under this record's camera.
struct TrajectoryRecord {
  std::int64_t t = 0;
  std::vector<ObjectRecord> objects;
  CameraModel camera;
  std::vector<ActionRecord> actions;
};

nlohmann::json record_to_json(const TrajectoryRecord& record);
TrajectoryRecord record_from_json(const nlohmann::json& j);

/// JSON-lines, one record per line.
std::string serialize_log(const std::vector<TrajectoryRecord>& log);
std::vector<TrajectoryRecord> parse_log(std::string_view text);
void write_log(const std::vector<TrajectoryRecord>& log, const std::filesystem::path& path);
std::vector<TrajectoryRecord> read_log(const std::filesystem::path& path);

/// Per-record detections built from the logged boxes.
std::vector<DetectionFrame> detections_from_log(const std::vector<TrajectoryRecord>& log);

/// Camera-frame displacements between consecutive valid records for every object, with the
/// logged action label when the later record carries one.
struct LabeledDeltas {
  std::vector<Vec3> deltas;
  std::vector<std::optional<int>> actions;
};
LabeledDeltas deltas_from_log(const std::vector<TrajectoryRecord>& log);

struct MetricsOptions {
  /// When the log carries no action labels, fit this many actions to the displacements.
  std::optional<int> fit_actions;
  std::uint64_t seed = 0;
};

/// Action-space metrics from a log and, with a reference log, ADD and MDR against it.
MetricsReport evaluate_log(const std::vector<TrajectoryRecord>& log,
                           const std::vector<TrajectoryRecord>* reference,
                           const MetricsOptions& options = {});

nlohmann::json report_to_json(const MetricsReport& report);

}  // namespace playenv
