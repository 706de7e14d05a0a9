#include "playenv/trajectory.hpp"

#include <fstream>
#include <set>

#include "playenv/errors.hpp"
#include "playenv/scene_io.hpp"

namespace playenv {

using nlohmann::json;

json record_to_json(const TrajectoryRecord& record) {
  json objects = json::array();
  for (const auto& o : record.objects) {
    json oj = state_to_json(o.id, o.state);
    if (o.bbox) oj["bbox"] = {o.bbox->x_min, o.bbox->y_min, o.bbox->x_max, o.bbox->y_max};
    objects.push_back(std::move(oj));
  }
  json j{{"version", kSchemaVersion},
         {"t", record.t},
         {"objects", std::move(objects)},
         {"camera", camera_to_json(record.camera)}};
  if (!record.actions.empty()) {
    json actions = json::array();
    for (const auto& a : record.actions)
      actions.push_back({{"id", a.id}, {"a", a.action}, {"v", to_json_array(a.variability)}});
    j["actions"] = std::move(actions);
  }
  return j;
}

TrajectoryRecord record_from_json(const json& j) {
  TrajectoryRecord r;
  if (j.value("version", kSchemaVersion) != kSchemaVersion)
    throw ParseError("unsupported log version", 0);
  r.t = j.at("t").get<std::int64_t>();
  for (const auto& oj : j.at("objects")) {
    ObjectRecord o;
    o.id = oj.at("id").get<int>();
    o.state.x = vec3_from_json(oj.at("x"));
    o.state.w = oj.contains("w") ? code_from_json(oj.at("w")) : StyleCode();
    o.state.pi = oj.contains("pi") ? code_from_json(oj.at("pi")) : PoseCode();
    o.state.valid = oj.value("valid", true);
    if (oj.contains("bbox") && !oj.at("bbox").is_null()) {
      const auto& b = oj.at("bbox");
      o.bbox = BoundingBox2D{b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                             b.at(3).get<double>()};
    }
    r.objects.push_back(std::move(o));
  }
  r.camera = camera_from_json(j.at("camera"));
  if (j.contains("actions")) {
    for (const auto& aj : j.at("actions")) {
      ActionRecord a;
      a.id = aj.at("id").get<int>();
      a.action = aj.at("a").get<int>();
      if (aj.contains("v")) a.variability = vec3_from_json(aj.at("v"));
      r.actions.push_back(a);
    }
  }
  return r;
}

std::string serialize_log(const std::vector<TrajectoryRecord>& log) {
  std::string out;
  for (const auto& r : log) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<TrajectoryRecord> parse_log(std::string_view text) {
  std::vector<TrajectoryRecord> log;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      log.push_back(record_from_json(json::parse(line.begin(), line.end())));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return log;
}

void write_log(const std::vector<TrajectoryRecord>& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << serialize_log(log);
}

std::vector<TrajectoryRecord> read_log(const std::filesystem::path& path) {
  return parse_log(read_text_file(path));
}

std::vector<DetectionFrame> detections_from_log(const std::vector<TrajectoryRecord>& log) {
  std::vector<DetectionFrame> frames;
  frames.reserve(log.size());
  for (const auto& r : log) {
    DetectionFrame f;
    for (const auto& o : r.objects) {
      Detection d;
      d.object_id = o.id;
      d.valid = o.state.valid && o.bbox.has_value();
      if (o.bbox) d.bbox = *o.bbox;
      f.push_back(d);
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

LabeledDeltas deltas_from_log(const std::vector<TrajectoryRecord>& log) {
  LabeledDeltas out;
  std::set<int> dropped;  // objects past their valid prefix
  const auto find = [](const TrajectoryRecord& r, int id) -> const ObjectRecord* {
    for (const auto& o : r.objects)
      if (o.id == id) return &o;
    return nullptr;
  };
  for (const auto& o : log.empty() ? std::vector<ObjectRecord>{} : log.front().objects)
    if (!o.state.valid) dropped.insert(o.id);
  for (std::size_t t = 1; t < log.size(); ++t) {
    for (const auto& cur : log[t].objects) {
      if (dropped.count(cur.id)) continue;
      const ObjectRecord* prev = find(log[t - 1], cur.id);
      const auto delta = prev ? extract_delta(prev->state, cur.state, log[t].camera) : std::nullopt;
      if (!delta) {
        dropped.insert(cur.id);
        continue;
      }
      out.deltas.push_back(*delta);
      std::optional<int> label;
      for (const auto& a : log[t].actions)
        if (a.id == cur.id) label = a.action;
      out.actions.push_back(label);
    }
  }
  return out;
}

MetricsReport evaluate_log(const std::vector<TrajectoryRecord>& log,
                           const std::vector<TrajectoryRecord>* reference,
                           const MetricsOptions& options) {
  MetricsReport report;
  const auto labeled = deltas_from_log(log);
  std::vector<int> labels;
  const bool all_labeled =
      !labeled.deltas.empty() &&
      std::all_of(labeled.actions.begin(), labeled.actions.end(), [](auto& a) { return a.has_value(); });
  if (all_labeled) {
    for (const auto& a : labeled.actions) labels.push_back(*a);
  } else if (options.fit_actions && !labeled.deltas.empty()) {
    try {
      const auto model = fit_action_space(labeled.deltas, *options.fit_actions, options.seed);
      for (const auto& d : labeled.deltas) labels.push_back(nearest_action(d, model));
    } catch (const DomainError&) {
      labels.clear();
    }
  }
  if (!labels.empty()) {
    try {
      report.delta_mse = delta_mse(labeled.deltas, labels);
    } catch (const DomainError&) {
    }
    report.delta_acc = delta_acc(labeled.deltas, labels);
  }
  if (reference) {
    const auto gt = detections_from_log(*reference);
    const auto rec = detections_from_log(log);
    if (gt.size() != rec.size()) throw DomainError("log and reference differ in frame count");
    report.add = add_metric(gt, rec);
    try {
      report.mdr = mdr(gt, rec);
    } catch (const DomainError&) {
    }
  }
  return report;
}

json report_to_json(const MetricsReport& r) {
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return json{{"delta_mse", opt(r.delta_mse)}, {"delta_acc", opt(r.delta_acc)},
              {"add", opt(r.add)},             {"mdr", opt(r.mdr)},
              {"warp_l1", opt(r.warp_l1)},     {"coverage", opt(r.coverage)}};
}

}  // namespace playenv
