#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "playenv/image.hpp"
#include "playenv/scene_io.hpp"
#include "playenv/trajectory.hpp"

namespace playenv {

struct Command {
  int action = 0;
  /// Omitted at play time: the dynamics use zero variability.
  std::optional<Vec3> variability;
};

using CommandMap = std::map<int, Command>;
using StyleOverrides = std::map<int, StyleCode>;

struct Frame {
  std::int64_t tick = 0;
  Image image;
  /// Playable objects only.
  StateMap states;
  CameraModel camera;
  std::vector<ActionRecord> actions;
};

/// Rescales intrinsics so the camera renders at width x height.
CameraModel fit_camera_to(const CameraModel& camera, int width, int height);

/// A playable environment instance. Holds its own copy of the scene, which it never mutates;
/// only states, camera, tick and the RNG advance.
class Session {
public:
  Session(std::string id, SceneDescription scene, const CameraModel& camera, std::uint64_t seed);

  const std::string& id() const { return id_; }
  const SceneDescription& scene() const { return scene_; }
  std::int64_t tick() const { return tick_; }
  const StateMap& states() const { return states_; }
  const CameraModel& camera() const { return camera_; }
  const Frame& last_frame() const { return last_frame_; }

  /// Every playable object needs a command. Validation happens before any state changes.
  const Frame& step(const CommandMap& commands, const CameraModel& camera,
                    const StyleOverrides& styles = {});

  TrajectoryRecord record() const;

private:
  Frame render_frame(std::vector<ActionRecord> actions);

  std::string id_;
  SceneDescription scene_;
  StateMap states_;
  StyleOverrides static_styles_;
  CameraModel camera_;
  std::int64_t tick_ = 0;
  std::mt19937_64 rng_;
  Frame last_frame_;
};

/// Registers the session's first frame; deterministic in (scene, camera, seed).
std::unique_ptr<Session> create_session(const SceneDescription& scene, const CameraModel& camera,
                                        std::uint64_t seed, std::string id = "session-0");

struct ScriptTick {
  CommandMap commands;
  std::optional<CameraModel> camera;
  StyleOverrides styles;
};

struct Script {
  std::uint64_t seed = 0;
  CameraModel camera;
  std::optional<int> width;
  std::optional<int> height;
  std::vector<ScriptTick> ticks;
};

/// Throws ParseError (with the line for syntax errors) or ValidationError.
Script parse_script(std::string_view text);
Script load_script(const std::filesystem::path& path);

struct ScriptRun {
  std::vector<TrajectoryRecord> log;
  std::vector<std::uint64_t> frame_hashes;
};

/// Plays the script; when `out_dir` is given writes frame_NNNN.png, trajectory.jsonl and
/// hashes.txt there.
ScriptRun run_script(const SceneDescription& scene, const Script& script,
                     const std::optional<std::filesystem::path>& out_dir = std::nullopt);

struct SessionLimits {
  std::size_t max_sessions = 16;
  std::chrono::seconds idle_timeout{600};
};

/// Thread-safe registry. Each entry carries its own mutex so commands for one session run
/// strictly in order while different sessions proceed concurrently.
class SessionManager {
public:
  using Clock = std::chrono::steady_clock;

  struct Entry {
    std::mutex mutex;
    std::unique_ptr<Session> session;
    Clock::time_point last_used;
  };

  explicit SessionManager(SessionLimits limits = {}) : limits_(limits) {}

  /// Evicts idle sessions first; throws DomainError when still at capacity.
  std::shared_ptr<Entry> create(const SceneDescription& scene, const CameraModel& camera,
                                std::uint64_t seed, Clock::time_point now = Clock::now());
  std::shared_ptr<Entry> find(const std::string& id, Clock::time_point now = Clock::now());
  void erase(const std::string& id);
  std::size_t evict_idle(Clock::time_point now = Clock::now());
  std::size_t size() const;

private:
  SessionLimits limits_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t next_id_ = 1;
};

}  // namespace playenv
