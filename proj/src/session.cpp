#include "playenv/session.hpp"

#include <cstdio>
#include <fstream>

#include <spdlog/spdlog.h>

#include "playenv/errors.hpp"

namespace playenv {

using nlohmann::json;

CameraModel fit_camera_to(const CameraModel& camera, int width, int height) {
  if (camera.width == width && camera.height == height) return camera;
  CameraModel out = camera;
  const double sx = static_cast<double>(width) / camera.width;
  const double sy = static_cast<double>(height) / camera.height;
  out.fx *= sx;
  out.cx *= sx;
  out.fy *= sy;
  out.cy *= sy;
  out.width = width;
  out.height = height;
  return out;
}

Session::Session(std::string id, SceneDescription scene, const CameraModel& camera,
                 std::uint64_t seed)
    : id_(std::move(id)), scene_(std::move(scene)), rng_(seed) {
  auto violations = validate_scene(scene_);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  camera.validate();
  camera_ = fit_camera_to(camera, scene_.scene.render.width, scene_.scene.render.height);
  states_ = scene_.initial_states;
  last_frame_ = render_frame({});
}

Frame Session::render_frame(std::vector<ActionRecord> actions) {
  // one draw per frame whether or not jitter is on, so histories replay identically
  const std::uint64_t frame_seed = rng_();
  StateMap render_states = states_;
  for (const auto& [id, w] : static_styles_) {
    const ObjectSpec* spec = scene_.find_object(id);
    render_states[id] = EnvironmentState{spec->anchor, w, spec->pose, true};
  }
  Frame frame;
  frame.tick = tick_;
  frame.states = states_;
  frame.camera = camera_;
  frame.actions = std::move(actions);
  if (scene_.scene.render.jitter) {
    Scene jittered = scene_.scene;
    jittered.render.jitter_seed ^= frame_seed;
    frame.image = render_image(jittered, render_states, camera_);
  } else {
    frame.image = render_image(scene_.scene, render_states, camera_);
  }
  return frame;
}

const Frame& Session::step(const CommandMap& commands, const CameraModel& camera,
                           const StyleOverrides& styles) {
  const Scene& s = scene_.scene;
  const int k = scene_.action_model.action_count();
  for (const auto& [id, cmd] : commands) {
    const ObjectSpec* spec = scene_.find_object(id);
    if (!spec || spec->kind != ObjectKind::Playable)
      throw DomainError("unknown playable object id " + std::to_string(id));
    if (cmd.action < 0 || cmd.action >= k)
      throw DomainError("action " + std::to_string(cmd.action) + " out of range for object " +
                        std::to_string(id) + " (K = " + std::to_string(k) + ")");
    if (cmd.variability && !cmd.variability->allFinite())
      throw DomainError("action variability must be finite");
  }
  for (int id : scene_.playable_ids())
    if (!commands.count(id)) throw DomainError("missing command for object " + std::to_string(id));
  for (const auto& [id, w] : styles) {
    if (!scene_.find_object(id)) throw DomainError("unknown object id " + std::to_string(id));
    if (w.size() != s.style_dim || !w.allFinite())
      throw DomainError("style override for object " + std::to_string(id) +
                        " must have " + std::to_string(s.style_dim) + " finite entries");
  }
  camera.validate();
  const CameraModel cam = fit_camera_to(camera, s.render.width, s.render.height);

  const StepOptions opts{true, tick_ + 1};
  StateMap next = states_;
  std::vector<ActionRecord> applied;
  for (auto& [id, state] : next) {
    if (const auto it = styles.find(id); it != styles.end()) state.w = it->second;
    const Command& cmd = commands.at(id);
    const Vec3 v = cmd.variability.value_or(Vec3::Zero());
    state = dynamics_step(state, cmd.action, cam, scene_.action_model, v, opts);
    applied.push_back({id, cmd.action, v});
  }
  for (const auto& [id, w] : styles)
    if (!states_.count(id)) static_styles_[id] = w;

  states_ = std::move(next);
  camera_ = cam;
  ++tick_;
  last_frame_ = render_frame(std::move(applied));
  spdlog::debug("session {} tick {}", id_, tick_);
  return last_frame_;
}

TrajectoryRecord Session::record() const {
  TrajectoryRecord r;
  r.t = tick_;
  r.camera = camera_;
  r.actions = last_frame_.actions;
  for (const auto& [id, state] : states_) {
    ObjectRecord o{id, state, std::nullopt};
    const ObjectSpec* spec = scene_.find_object(id);
    const Detection det = detect_volume(id, spec->volume.translated(state.x), camera_);
    if (det.valid) o.bbox = det.bbox;
    r.objects.push_back(std::move(o));
  }
  return r;
}

std::unique_ptr<Session> create_session(const SceneDescription& scene, const CameraModel& camera,
                                        std::uint64_t seed, std::string id) {
  return std::make_unique<Session>(std::move(id), scene, camera, seed);
}

namespace {

CommandMap commands_from_json(const json& j) {
  CommandMap out;
  for (const auto& cj : j) {
    Command c;
    c.action = cj.at("a").get<int>();
    if (cj.contains("v") && !cj.at("v").is_null()) c.variability = vec3_from_json(cj.at("v"));
    const int id = cj.at("id").get<int>();
    if (!out.emplace(id, c).second)
      throw ParseError("duplicate command for object " + std::to_string(id), 0);
  }
  return out;
}

StyleOverrides styles_from_json(const json& j) {
  StyleOverrides out;
  for (const auto& sj : j) out[sj.at("id").get<int>()] = code_from_json(sj.at("w"));
  return out;
}

}  // namespace

Script parse_script(std::string_view text) {
  const json j = parse_json_text(text);
  Script s;
  std::string where = "script";
  try {
    if (j.value("version", 0) != kSchemaVersion)
      throw ValidationError({"unsupported script version (expected 1)"});
    s.seed = j.value("seed", std::uint64_t{0});
    where = "script.camera";
    s.camera = camera_from_json(j.at("camera"));
    if (j.contains("width")) s.width = j.at("width").get<int>();
    if (j.contains("height")) s.height = j.at("height").get<int>();
    const auto& ticks = j.at("ticks");
    for (std::size_t i = 0; i < ticks.size(); ++i) {
      where = "script.ticks[" + std::to_string(i) + "]";
      const auto& tj = ticks[i];
      ScriptTick t;
      t.commands = commands_from_json(tj.at("commands"));
      if (tj.contains("camera")) t.camera = camera_from_json(tj.at("camera"));
      if (tj.contains("styles")) t.styles = styles_from_json(tj.at("styles"));
      s.ticks.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw ParseError(where + ": " + e.what(), 0);
  } catch (const ParseError& e) {
    if (e.line() > 0) throw;
    throw ParseError(where + ": " + e.what(), 0);
  } catch (const DomainError& e) {
    throw ParseError(where + ": " + e.what(), 0);
  }
  return s;
}

Script load_script(const std::filesystem::path& path) { return parse_script(read_text_file(path)); }

ScriptRun run_script(const SceneDescription& scene, const Script& script,
                     const std::optional<std::filesystem::path>& out_dir) {
  SceneDescription sized = scene;
  if (script.width) sized.scene.render.width = *script.width;
  if (script.height) sized.scene.render.height = *script.height;

  ScriptRun run;
  std::vector<Image> frames;
  auto session = create_session(sized, script.camera, script.seed);
  const auto keep = [&](const Session& s) {
    run.log.push_back(s.record());
    run.frame_hashes.push_back(content_hash(s.last_frame().image));
    if (out_dir) frames.push_back(s.last_frame().image);
  };
  keep(*session);
  for (std::size_t i = 0; i < script.ticks.size(); ++i) {
    const auto& t = script.ticks[i];
    try {
      session->step(t.commands, t.camera.value_or(session->camera()), t.styles);
    } catch (const DomainError& e) {
      throw DomainError("script.ticks[" + std::to_string(i) + "]: " + e.what());
    }
    keep(*session);
  }

  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    std::ofstream hashes(*out_dir / "hashes.txt");
    for (std::size_t i = 0; i < frames.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "frame_%04zu.png", i);
      write_png(frames[i], *out_dir / name);
      hashes << name << ' ' << hash_hex(run.frame_hashes[i]) << '\n';
    }
    write_log(run.log, *out_dir / "trajectory.jsonl");
  }
  return run;
}

std::shared_ptr<SessionManager::Entry> SessionManager::create(const SceneDescription& scene,
                                                              const CameraModel& camera,
                                                              std::uint64_t seed,
                                                              Clock::time_point now) {
  evict_idle(now);
  std::string id;
  {
    std::lock_guard lock(mutex_);
    if (sessions_.size() >= limits_.max_sessions)
      throw DomainError("session limit reached (" + std::to_string(limits_.max_sessions) + ")");
    id = "s" + std::to_string(next_id_++);
  }
  // render the first frame outside the registry lock
  auto entry = std::make_shared<Entry>();
  entry->session = create_session(scene, camera, seed, id);
  entry->last_used = now;
  std::lock_guard lock(mutex_);
  if (sessions_.size() >= limits_.max_sessions)
    throw DomainError("session limit reached (" + std::to_string(limits_.max_sessions) + ")");
  sessions_[id] = entry;
  return entry;
}

std::shared_ptr<SessionManager::Entry> SessionManager::find(const std::string& id,
                                                            Clock::time_point now) {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) return nullptr;
  it->second->last_used = now;
  return it->second;
}

void SessionManager::erase(const std::string& id) {
  std::lock_guard lock(mutex_);
  sessions_.erase(id);
}

std::size_t SessionManager::evict_idle(Clock::time_point now) {
  std::lock_guard lock(mutex_);
  std::size_t evicted = 0;
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    if (now - it->second->last_used > limits_.idle_timeout) {
      spdlog::info("evicting idle session {}", it->first);
      it = sessions_.erase(it);
      ++evicted;
    } else {
      ++it;
    }
  }
  return evicted;
}

std::size_t SessionManager::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

}  // namespace playenv
