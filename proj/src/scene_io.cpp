#include "playenv/scene_io.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "playenv/errors.hpp"

namespace playenv {

using nlohmann::json;

const ObjectSpec* SceneDescription::find_object(int id) const {
  for (const auto& o : scene.objects)
    if (o.id == id) return &o;
  return nullptr;
}

std::vector<int> SceneDescription::playable_ids() const {
  std::vector<int> ids;
  for (const auto& o : scene.objects)
    if (o.kind == ObjectKind::Playable) ids.push_back(o.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json_text(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + upto, '\n'));
    throw ParseError(e.what(), line);
  }
}

Vec3 vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ParseError("expected an array of 3 numbers", 0);
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Code code_from_json(const json& j) {
  if (!j.is_array() || j.size() > static_cast<std::size_t>(kMaxCodeDim))
    throw ParseError("expected an array of at most " + std::to_string(kMaxCodeDim) + " numbers", 0);
  Code c(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) c[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return c;
}

json to_json_array(const Eigen::Ref<const Eigen::VectorXd>& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

namespace {

Eigen::MatrixXd matrix_from_rows(const json& j) {
  if (!j.is_array() || j.empty()) throw ParseError("expected a non-empty array of rows", 0);
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (j[r].size() != static_cast<std::size_t>(cols)) throw ParseError("ragged matrix rows", 0);
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

BoundingVolume box_from_json(const json& j) {
  return {vec3_from_json(j.at("min")), vec3_from_json(j.at("max"))};
}

StyleResponse style_from_json(const json* j, int feature_dim, int style_dim) {
  StyleResponse r = StyleResponse::identity(feature_dim, style_dim);
  if (!j) return r;
  if (j->contains("gamma0")) r.gamma0 = code_from_json(j->at("gamma0"));
  if (j->contains("beta0")) r.beta0 = code_from_json(j->at("beta0"));
  if (j->contains("gamma_w")) r.gamma_w = matrix_from_rows(j->at("gamma_w"));
  if (j->contains("beta_w")) r.beta_w = matrix_from_rows(j->at("beta_w"));
  return r;
}

FieldDescriptor field_from_json(const json& j, int feature_dim, int style_dim) {
  FieldDescriptor f;
  const auto type = j.at("type").get<std::string>();
  if (type == "uniform_box") {
    f.variant = UniformBoxField{j.at("sigma").get<double>(), code_from_json(j.at("color")),
                                box_from_json(j.at("box"))};
  } else if (type == "checker_plane") {
    CheckerPlaneField c;
    c.sigma0 = j.at("sigma").get<double>();
    c.color_even = code_from_json(j.at("color_even"));
    c.color_odd = code_from_json(j.at("color_odd"));
    c.cell = j.value("cell", 1.0);
    c.plane_y = j.value("plane_y", 0.0);
    c.half_thickness = j.value("half_thickness", 0.01);
    f.variant = c;
  } else if (type == "voxel_grid") {
    VoxelGridField v;
    v.bounds = box_from_json(j.at("bounds"));
    const auto& dims = j.at("dims");
    v.nx = dims.at(0).get<int>();
    v.ny = dims.at(1).get<int>();
    v.nz = dims.at(2).get<int>();
    v.sigma = j.at("sigma").get<std::vector<double>>();
    for (const auto& c : j.at("color")) v.color.push_back(code_from_json(c));
    f.variant = std::move(v);
  } else if (type == "sphere_background") {
    SphereBackgroundField b;
    b.bottom_color = code_from_json(j.at("bottom_color"));
    b.top_color = code_from_json(j.at("top_color"));
    if (j.contains("origin_shift")) b.origin_shift = matrix_from_rows(j.at("origin_shift"));
    f.variant = std::move(b);
  } else {
    throw ParseError("unknown field type '" + type + "'", 0);
  }
  f.style_response = style_from_json(j.contains("style") ? &j.at("style") : nullptr, feature_dim,
                                     style_dim);
  return f;
}

BendDescriptor bend_from_json(const json& j) {
  const auto type = j.is_string() ? j.get<std::string>() : j.at("type").get<std::string>();
  if (type == "zero") return ZeroBend{};
  if (type == "translation") return TranslationBend{};
  if (type == "sway") return SwayBend{};
  throw ParseError("unknown bend type '" + type + "'", 0);
}

SceneDescription scene_from_json(const json& j, std::vector<std::string>& violations) {
  SceneDescription d;
  if (j.value("version", 0) != kSchemaVersion)
    violations.push_back("unsupported scene version (expected 1)");
  d.name = j.value("name", std::string("scene"));
  Scene& s = d.scene;
  s.feature_dim = j.value("feature_dim", kDefaultFeatureDim);
  s.style_dim = j.value("style_dim", kDefaultStyleDim);
  s.pose_dim = j.value("pose_dim", kDefaultPoseDim);
  if (s.feature_dim < 1 || s.feature_dim > kMaxCodeDim || s.style_dim < 0 ||
      s.style_dim > kMaxCodeDim || s.pose_dim < 0 || s.pose_dim > kMaxCodeDim)
    throw ParseError("code dimensions must lie in [0, " + std::to_string(kMaxCodeDim) + "]", 0);

  if (j.contains("render")) {
    const auto& r = j.at("render");
    s.render.width = r.value("width", s.render.width);
    s.render.height = r.value("height", s.render.height);
    if (r.contains("factors")) s.render.factors = r.at("factors").get<std::vector<int>>();
    const auto mode = r.value("mode", std::string("multiscale"));
    if (mode == "dense") s.render.mode = RenderMode::Dense;
    else if (mode == "multiscale") s.render.mode = RenderMode::MultiScale;
    else violations.push_back("unknown render mode '" + mode + "'");
    s.render.range.t_near = r.value("t_near", s.render.range.t_near);
    s.render.range.t_far = r.value("t_far", s.render.range.t_far);
    s.render.jitter = r.value("jitter", false);
    s.render.jitter_seed = r.value("jitter_seed", std::uint64_t{0});
  }

  std::map<std::string, std::shared_ptr<const FieldDescriptor>> library;
  if (j.contains("fields")) {
    for (const auto& [name, fj] : j.at("fields").items())
      library[name] =
          std::make_shared<const FieldDescriptor>(field_from_json(fj, s.feature_dim, s.style_dim));
  }
  const auto resolve_field = [&](const json& fj) -> std::shared_ptr<const FieldDescriptor> {
    if (fj.is_string()) {
      const auto it = library.find(fj.get<std::string>());
      if (it == library.end())
        throw ParseError("unknown field reference '" + fj.get<std::string>() + "'", 0);
      return it->second;
    }
    return std::make_shared<const FieldDescriptor>(field_from_json(fj, s.feature_dim, s.style_dim));
  };

  int backgrounds = 0;
  if (j.contains("background")) {
    s.background = *resolve_field(j.at("background"));
    ++backgrounds;
  }

  for (const auto& oj : j.at("objects")) {
    ObjectSpec o;
    o.id = oj.at("id").get<int>();
    o.name = oj.value("name", "object_" + std::to_string(o.id));
    const auto kind = oj.value("kind", std::string("static"));
    if (kind == "background") {
      s.background = *resolve_field(oj.at("field"));
      ++backgrounds;
      continue;
    }
    if (kind == "playable") o.kind = ObjectKind::Playable;
    else if (kind != "static") violations.push_back("object " + std::to_string(o.id) + ": unknown kind '" + kind + "'");
    o.volume = box_from_json(oj.at("volume"));
    o.field = resolve_field(oj.at("field"));
    o.samples_per_ray = oj.value("samples", 1);
    if (oj.contains("anchor")) o.anchor = vec3_from_json(oj.at("anchor"));
    if (oj.contains("bend")) o.bend = bend_from_json(oj.at("bend"));
    o.style = oj.contains("style") ? code_from_json(oj.at("style")) : StyleCode::Zero(s.style_dim);
    o.pose = oj.contains("pose") ? code_from_json(oj.at("pose")) : PoseCode::Zero(s.pose_dim);
    if (o.kind == ObjectKind::Playable) {
      if (!oj.contains("initial")) {
        violations.push_back("playable object " + std::to_string(o.id) + " has no initial state");
      } else {
        const auto& ij = oj.at("initial");
        EnvironmentState st;
        st.x = vec3_from_json(ij.at("x"));
        st.w = ij.contains("w") ? code_from_json(ij.at("w")) : o.style;
        st.pi = ij.contains("pi") ? code_from_json(ij.at("pi")) : o.pose;
        d.initial_states[o.id] = st;
      }
    }
    s.objects.push_back(std::move(o));
  }
  if (backgrounds != 1)
    violations.push_back("scene needs exactly one background, found " + std::to_string(backgrounds));

  if (j.contains("camera")) d.camera = camera_from_json(j.at("camera"));

  if (j.contains("actions")) {
    const auto& aj = j.at("actions");
    for (const auto& c : aj.at("centroids")) d.action_model.centroids.push_back(vec3_from_json(c));
    if (aj.contains("pose_bank"))
      for (const auto& p : aj.at("pose_bank"))
        d.action_model.pose_update.cyclic_bank.push_back(code_from_json(p));
  }
  return d;
}

}  // namespace

std::vector<std::string> validate_scene(const SceneDescription& d) {
  std::vector<std::string> v;
  const Scene& s = d.scene;
  const auto where = [](const ObjectSpec& o) { return "object " + std::to_string(o.id) + ": "; };

  std::set<int> ids;
  for (const auto& o : s.objects)
    if (!ids.insert(o.id).second) v.push_back("duplicate object id " + std::to_string(o.id));

  if (!s.background.is_background()) {
    v.push_back("background field must be of type sphere_background");
  } else {
    try {
      s.background.validate(s.style_dim);
      if (s.background.feature_dim() != s.feature_dim)
        v.push_back("background feature dimension differs from the scene's");
    } catch (const DomainError& e) {
      v.push_back(std::string("background: ") + e.what());
    }
  }

  for (const auto& o : s.objects) {
    if (o.samples_per_ray < 1) v.push_back(where(o) + "samples per ray must be >= 1");
    if (!o.volume.valid()) v.push_back(where(o) + "volume corners are inverted");
    if (!o.field) {
      v.push_back(where(o) + "missing field");
    } else if (o.field->is_background()) {
      v.push_back(where(o) + "a bounded object cannot use a background field");
    } else {
      try {
        o.field->validate(s.style_dim);
        if (o.field->feature_dim() != s.feature_dim)
          v.push_back(where(o) + "field feature dimension differs from the scene's");
      } catch (const DomainError& e) {
        v.push_back(where(o) + e.what());
      }
    }
    if (o.style.size() != s.style_dim) v.push_back(where(o) + "style code has the wrong dimension");
    if (o.pose.size() != s.pose_dim) v.push_back(where(o) + "pose code has the wrong dimension");
    if (o.kind == ObjectKind::Playable) {
      if (!o.bend) v.push_back(where(o) + "playable objects need a bend descriptor");
      const auto it = d.initial_states.find(o.id);
      if (it != d.initial_states.end()) {
        const auto& st = it->second;
        if (!st.x.allFinite() || !st.w.allFinite() || !st.pi.allFinite())
          v.push_back(where(o) + "initial state must be finite");
        if (st.x.y() != 0.0) v.push_back(where(o) + "playable objects must start on the ground (y = 0)");
        if (st.w.size() != s.style_dim || st.pi.size() != s.pose_dim)
          v.push_back(where(o) + "initial state codes have the wrong dimension");
      }
    }
  }

  const auto& r = s.render;
  if (r.width < 1 || r.height < 1) v.push_back("render size must be positive");
  if (!(r.range.t_near >= 0.0 && r.range.t_near <= r.range.t_far))
    v.push_back("render range must satisfy 0 <= t_near <= t_far");
  if (r.mode == RenderMode::MultiScale) {
    if (r.factors.empty()) v.push_back("multiscale rendering needs at least one factor");
    for (int f : r.factors)
      if (f < 1 || r.width % f != 0 || r.height % f != 0)
        v.push_back("factor " + std::to_string(f) + " does not divide the render size");
  }

  if (!d.playable_ids().empty() && d.action_model.centroids.empty())
    v.push_back("scenes with playable objects need an action model");
  for (const auto& c : d.action_model.centroids)
    if (!c.allFinite()) v.push_back("action centroids must be finite");
  for (const auto& p : d.action_model.pose_update.cyclic_bank)
    if (p.size() != s.pose_dim) v.push_back("pose bank entries have the wrong dimension");
  return v;
}

SceneDescription parse_scene(std::string_view text) {
  const json j = parse_json_text(text);
  std::vector<std::string> violations;
  SceneDescription d;
  try {
    d = scene_from_json(j, violations);
  } catch (const json::exception& e) {
    throw ParseError(std::string("scene: ") + e.what(), 0);
  }
  auto more = validate_scene(d);
  violations.insert(violations.end(), more.begin(), more.end());
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return d;
}

SceneDescription load_scene(const std::filesystem::path& path) {
  return parse_scene(read_text_file(path));
}

CameraModel camera_from_json(const json& j) {
  try {
    CameraModel cam;
    if (j.contains("look_at")) {
      const auto& la = j.at("look_at");
      const Vec3 up = la.contains("up") ? vec3_from_json(la.at("up")) : Vec3::UnitY();
      cam = look_at(vec3_from_json(la.at("eye")), vec3_from_json(la.at("target")), up,
                    j.at("fx").get<double>(), j.value("fy", j.at("fx").get<double>()),
                    j.at("width").get<int>(), j.at("height").get<int>());
      cam.cx = j.value("cx", cam.cx);
      cam.cy = j.value("cy", cam.cy);
    } else {
      const auto& r = j.at("R");
      if (r.size() != 9) throw ParseError("camera R needs 9 entries", 0);
      for (int i = 0; i < 9; ++i) cam.rotation(i / 3, i % 3) = r[i].get<double>();
      cam.translation = vec3_from_json(j.at("t"));
      cam.fx = j.at("fx").get<double>();
      cam.fy = j.at("fy").get<double>();
      cam.cx = j.at("cx").get<double>();
      cam.cy = j.at("cy").get<double>();
      cam.width = j.value("width", static_cast<int>(std::lround(2.0 * cam.cx)));
      cam.height = j.value("height", static_cast<int>(std::lround(2.0 * cam.cy)));
    }
    cam.validate();
    return cam;
  } catch (const json::exception& e) {
    throw ParseError(std::string("camera: ") + e.what(), 0);
  }
}

json camera_to_json(const CameraModel& camera) {
  json r = json::array();
  for (int i = 0; i < 9; ++i) r.push_back(camera.rotation(i / 3, i % 3));
  return json{{"R", r},
              {"t", to_json_array(camera.translation)},
              {"fx", camera.fx},
              {"fy", camera.fy},
              {"cx", camera.cx},
              {"cy", camera.cy},
              {"width", camera.width},
              {"height", camera.height}};
}

json state_to_json(int id, const EnvironmentState& state) {
  return json{{"id", id},
              {"x", to_json_array(state.x)},
              {"w", to_json_array(state.w)},
              {"pi", to_json_array(state.pi)},
              {"valid", state.valid}};
}

FieldModel parse_field_model(const json& j) {
  try {
    FieldModel f;
    f.name = j.value("name", std::string("field"));
    for (const auto& [name, p] : j.at("points").items()) {
      if (!p.is_array() || p.size() != 2) throw ParseError("field point '" + name + "' needs 2 coordinates", 0);
      f.points[name] = Vec2(p[0].get<double>(), p[1].get<double>());
    }
    if (f.points.size() < 4) throw ValidationError({"field model needs at least 4 points"});
    return f;
  } catch (const json::exception& e) {
    throw ParseError(std::string("field model: ") + e.what(), 0);
  }
}

Intrinsics intrinsics_from_json(const json& j) {
  Intrinsics k;
  k.fx = j.at("fx").get<double>();
  k.fy = j.value("fy", k.fx);
  k.width = j.at("width").get<int>();
  k.height = j.at("height").get<int>();
  k.cx = j.value("cx", 0.5 * k.width);
  k.cy = j.value("cy", 0.5 * k.height);
  return k;
}

LandmarkFile parse_landmarks(const json& j) {
  try {
    LandmarkFile f;
    if (j.contains("intrinsics")) f.intrinsics = intrinsics_from_json(j.at("intrinsics"));
    std::int64_t next_t = 0;
    for (const auto& fj : j.at("frames")) {
      LandmarkFrame frame;
      frame.t = fj.value("t", next_t);
      next_t = frame.t + 1;
      for (const auto& [name, p] : fj.at("points").items())
        frame.points[name] = Vec2(p.at(0).get<double>(), p.at(1).get<double>());
      f.frames.push_back(std::move(frame));
    }
    return f;
  } catch (const json::exception& e) {
    throw ParseError(std::string("landmarks: ") + e.what(), 0);
  }
}

}  // namespace playenv
