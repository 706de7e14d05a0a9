#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "playenv/calibration.hpp"
#include "playenv/errors.hpp"
#include "playenv/metrics.hpp"
#include "playenv/protocol.hpp"
#include "playenv/scene_io.hpp"
#include "playenv/server.hpp"
#include "playenv/session.hpp"
#include "playenv/trajectory.hpp"

using namespace playenv;
using nlohmann::json;

namespace {

void write_json(const json& j, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot write " + out);
  f << j.dump(2) << '\n';
}

// {"H":[9 row-major]} or a bare 3x3 nested array.
Homography read_homography(const std::string& path) {
  const json j = parse_json_text(read_text_file(path));
  const json& h = j.is_object() ? j.at("H") : j;
  Mat3 m;
  if (h.size() == 9) {
    for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = h.at(i).get<double>();
  } else {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) m(r, c) = h.at(r).at(c).get<double>();
  }
  return Homography::canonical(m);
}

struct RenderArgs {
  std::string scene, script, out;
};

int cmd_render(const RenderArgs& a) {
  const auto scene = load_scene(a.scene);
  const auto script = load_script(a.script);
  const auto run = run_script(scene, script, a.out);
  spdlog::info("rendered {} frames to {}", run.frame_hashes.size(), a.out);
  std::cout << hash_hex(run.frame_hashes.back()) << '\n';
  return 0;
}

struct MetricsArgs {
  std::string log, reference, out, original, rendered, homography;
  std::optional<int> k;
  std::uint64_t seed = 0;
};

int cmd_metrics(const MetricsArgs& a) {
  MetricsReport report;
  if (!a.log.empty()) {
    const auto log = read_log(a.log);
    std::optional<std::vector<TrajectoryRecord>> ref;
    if (!a.reference.empty()) ref = read_log(a.reference);
    report = evaluate_log(log, ref ? &*ref : nullptr, MetricsOptions{a.k, a.seed});
  }
  if (!a.original.empty()) {
    const auto w = warp_eval(read_png(a.original), read_png(a.rendered), read_homography(a.homography));
    report.warp_l1 = w.l1;
    report.coverage = w.coverage;
  }
  write_json(report_to_json(report), a.out);
  return 0;
}

struct CalibrateArgs {
  std::string landmarks, field, out;
  std::optional<double> fx, fy, cx, cy;
  std::optional<int> width, height;
  double threshold = 1.0;
};

int cmd_calibrate(const CalibrateArgs& a) {
  const auto marks = parse_landmarks(parse_json_text(read_text_file(a.landmarks)));
  const FieldModel field =
      a.field.empty() ? tennis_court() : parse_field_model(parse_json_text(read_text_file(a.field)));

  std::optional<Intrinsics> k = marks.intrinsics;
  if (a.fx) {
    if (!a.width || !a.height) throw DomainError("--fx requires --width and --height");
    Intrinsics in;
    in.fx = *a.fx;
    in.fy = a.fy.value_or(*a.fx);
    in.width = *a.width;
    in.height = *a.height;
    in.cx = a.cx.value_or(in.width / 2.0);
    in.cy = a.cy.value_or(in.height / 2.0);
    k = in;
  }
  if (!k) throw DomainError("no intrinsics: give --fx/--width/--height or put them in the landmarks file");

  std::vector<std::optional<CameraModel>> seq;
  json frames = json::array();
  for (const auto& f : marks.frames) {
    json fj{{"t", f.t}};
    try {
      const auto r = calibrate_from_field(f.points, field, *k);
      seq.push_back(r.camera);
      fj["rms_px"] = r.rms_reprojection_error;
      fj["landmarks_used"] = r.landmarks_used;
    } catch (const DomainError& e) {
      seq.push_back(std::nullopt);
      fj["error"] = e.what();
      spdlog::warn("frame {}: {}", f.t, e.what());
    }
    frames.push_back(std::move(fj));
  }
  if (std::none_of(seq.begin(), seq.end(), [](const auto& c) { return c.has_value(); }))
    throw DomainError("no frame could be calibrated");

  const auto cameras = interpolate_cameras(seq);
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    frames[i]["camera"] = camera_to_json(cameras[i]);
    frames[i]["interpolated"] = !seq[i].has_value();
  }
  json out{{"frames", std::move(frames)}};
  if (cameras.size() >= 2) {
    out["center_variance"] = camera_center_variance(cameras);
    out["threshold"] = a.threshold;
    out["verdict"] =
        sequence_quality_filter(cameras, a.threshold) == SequenceVerdict::Accept ? "accept" : "reject";
  }
  write_json(out, a.out);
  return 0;
}

struct ServeArgs {
  std::string scene_dir = "data/scenes";
  std::string address = "127.0.0.1";
  std::uint16_t port = 8765;
  int width = 256, height = 144;
  std::size_t max_sessions = 16;
};

int cmd_serve(const ServeArgs& a) {
  const auto scenes = load_scene_library(a.scene_dir);
  if (scenes.empty()) throw DomainError("no scenes found in " + a.scene_dir);
  SessionManager sessions(SessionLimits{a.max_sessions, std::chrono::seconds(600)});
  ProtocolHandler handler(sessions, scenes, ServiceOptions{a.width, a.height, {8, 4}});
  WebSocketServer server(handler, a.address, a.port);
  spdlog::info("serving {} scenes on ws://{}:{}", scenes.size(), a.address, server.port());
  server.run();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* lvl = std::getenv("PLAYENV_LOG_LEVEL"))
    spdlog::set_level(spdlog::level::from_str(lvl));

  CLI::App app{"Playable environment engine"};
  app.require_subcommand(1);

  RenderArgs ra;
  auto* render = app.add_subcommand("render", "Run a scripted session and write frames and a trajectory log");
  render->add_option("--scene", ra.scene, "Scene JSON")->required()->check(CLI::ExistingFile);
  render->add_option("--script", ra.script, "Script JSON")->required()->check(CLI::ExistingFile);
  render->add_option("--out", ra.out, "Output directory")->required();

  MetricsArgs ma;
  auto* metrics = app.add_subcommand("metrics", "Evaluate a trajectory log and/or a warp pair");
  metrics->add_option("--log", ma.log, "Trajectory JSONL")->check(CLI::ExistingFile);
  metrics->add_option("--reference", ma.reference, "Reference trajectory JSONL for ADD/MDR")
      ->check(CLI::ExistingFile);
  metrics->add_option("--k", ma.k, "Fit this many actions when the log has no labels");
  metrics->add_option("--seed", ma.seed, "Seed for action fitting");
  auto* orig = metrics->add_option("--original", ma.original, "Original frame PNG")->check(CLI::ExistingFile);
  auto* rend = metrics->add_option("--rendered", ma.rendered, "Rendered frame PNG")->check(CLI::ExistingFile);
  auto* hom = metrics->add_option("--homography", ma.homography, "Original-to-rendered homography JSON")
                  ->check(CLI::ExistingFile);
  orig->needs(rend)->needs(hom);
  rend->needs(orig);
  hom->needs(orig);
  metrics->add_option("--out", ma.out, "Report path (stdout when omitted)");

  CalibrateArgs ca;
  auto* calibrate = app.add_subcommand("calibrate", "Per-frame cameras from ground landmarks");
  calibrate->add_option("--landmarks", ca.landmarks, "Landmarks JSON")->required()->check(CLI::ExistingFile);
  calibrate->add_option("--field", ca.field, "Field model JSON (tennis court when omitted)")
      ->check(CLI::ExistingFile);
  calibrate->add_option("--fx", ca.fx);
  calibrate->add_option("--fy", ca.fy);
  calibrate->add_option("--cx", ca.cx);
  calibrate->add_option("--cy", ca.cy);
  calibrate->add_option("--width", ca.width);
  calibrate->add_option("--height", ca.height);
  calibrate->add_option("--threshold", ca.threshold, "Camera-center variance threshold");
  calibrate->add_option("--out", ca.out, "Output path (stdout when omitted)");

  ServeArgs sa;
  auto* serve = app.add_subcommand("serve", "Websocket session service");
  serve->add_option("--scene-dir", sa.scene_dir)->check(CLI::ExistingDirectory);
  serve->add_option("--address", sa.address);
  serve->add_option("--port", sa.port);
  serve->add_option("--width", sa.width, "Preview width");
  serve->add_option("--height", sa.height, "Preview height");
  serve->add_option("--max-sessions", sa.max_sessions);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*render) return cmd_render(ra);
    if (*metrics) {
      if (ma.log.empty() && ma.original.empty()) throw DomainError("metrics needs --log or --original");
      return cmd_metrics(ma);
    }
    if (*calibrate) return cmd_calibrate(ca);
    if (*serve) return cmd_serve(sa);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    for (const auto& v : e.violations()) std::cerr << "  " << v << '\n';
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
