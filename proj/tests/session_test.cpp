#include <gtest/gtest.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <filesystem>
#include <numbers>

#include "playenv/errors.hpp"
#include "playenv/protocol.hpp"
#include "playenv/server.hpp"
#include "playenv/session.hpp"
#include "test_util.hpp"

namespace playenv {
namespace {

using nlohmann::json;

const std::filesystem::path kData = PLAYENV_DATA_DIR;

// First frame of the demo scene at the demo script's size and camera, seed 7.
constexpr std::uint64_t kDemoFirstFrameHash = 0x4777878e47b77338;

const SceneDescription& demo() {
  static const SceneDescription d = load_scene(kData / "scenes/tennis_demo.json");
  return d;
}

SceneDescription small_demo() {
  SceneDescription d = demo();
  d.scene.render.width = 64;
  d.scene.render.height = 32;
  return d;
}

CameraModel level_camera() { return look_at({0, 1.5, -22}, {0, 1.5, 0}, Vec3::UnitY(), 420, 420, 512, 288); }

CommandMap both(int a10, int a11) { return {{10, {a10, std::nullopt}}, {11, {a11, std::nullopt}}}; }

TEST(Session, FirstFrameGoldenHash) {
  const Script script = load_script(kData / "scripts/demo_16tick.json");
  SceneDescription d = demo();
  d.scene.render.width = *script.width;
  d.scene.render.height = *script.height;
  const auto s = create_session(d, script.camera, script.seed);
  EXPECT_EQ(s->tick(), 0);
  EXPECT_EQ(s->last_frame().image.width, 128);
  EXPECT_EQ(hash_hex(content_hash(s->last_frame().image)), hash_hex(kDemoFirstFrameHash));
}

TEST(Session, DeterministicInSceneCameraSeed) {
  const auto a = create_session(small_demo(), *demo().camera, 3);
  const auto b = create_session(small_demo(), *demo().camera, 3);
  for (int t = 0; t < 4; ++t) {
    a->step(both(t % 7, (t + 3) % 7), a->camera());
    b->step(both(t % 7, (t + 3) % 7), b->camera());
    EXPECT_EQ(a->last_frame().image, b->last_frame().image);
    EXPECT_EQ(a->states(), b->states());
  }
}

TEST(Session, RepeatedForwardStepsAccumulate) {
  CameraModel cam = testing::forward_camera(512, 288, 420);
  cam.translation = Vec3(0, 2, -25);
  const auto s = create_session(small_demo(), cam, 0);
  const Vec3 start = s->states().at(10).x;
  for (int i = 0; i < 5; ++i) s->step(both(3, 0), cam);
  EXPECT_EQ(s->tick(), 5);
  EXPECT_NEAR((s->states().at(10).x - (start + Vec3(0, 0, 1.5))).norm(), 0.0, 1e-12);
  EXPECT_EQ(s->states().at(11).x, demo().initial_states.at(11).x);
  EXPECT_EQ(s->last_frame().tick, 5);
  ASSERT_EQ(s->last_frame().actions.size(), 2u);
  EXPECT_EQ(s->last_frame().actions[0].action, 3);
}

TEST(Session, ForwardFollowsCameraYaw) {
  CameraModel cam = testing::forward_camera(512, 288, 420);
  cam.rotation = yaw_rotation(std::numbers::pi / 2);
  cam.translation = Vec3(-20, 2, 0);
  const auto s = create_session(small_demo(), cam, 0);
  const Vec3 start = s->states().at(10).x;
  s->step(both(3, 0), cam);
  EXPECT_NEAR((s->states().at(10).x - (start + Vec3(0.3, 0, 0))).norm(), 0.0, 1e-12);
}

TEST(Session, PitchedCameraKeepsObjectsOnGround) {
  const auto s = create_session(small_demo(), *demo().camera, 0);
  for (int i = 0; i < 3; ++i) s->step(both(3, 4), s->camera());
  for (const auto& [id, st] : s->states()) EXPECT_EQ(st.x.y(), 0.0);
}

TEST(Session, PoseFollowsBank) {
  const auto s = create_session(small_demo(), *demo().camera, 0);
  const auto& bank = demo().action_model.pose_update.cyclic_bank;
  for (int t = 1; t <= 6; ++t) {
    s->step(both(0, 0), s->camera());
    EXPECT_EQ(s->states().at(10).pi, bank[t % bank.size()]);
  }
}

TEST(Session, IdentityStyleOverrideChangesNothing) {
  const auto a = create_session(small_demo(), *demo().camera, 1);
  const auto b = create_session(small_demo(), *demo().camera, 1);
  a->step(both(1, 2), a->camera());
  b->step(both(1, 2), b->camera(), {{10, demo().initial_states.at(10).w}});
  EXPECT_EQ(a->last_frame().image, b->last_frame().image);

  StyleCode w = StyleCode::Zero(8);
  w[0] = 1.0;
  const auto c = create_session(small_demo(), *demo().camera, 1);
  c->step(both(1, 2), c->camera(), {{10, w}});
  EXPECT_EQ(c->states().at(10).w, w);
}

TEST(Session, InvalidCommandsLeaveStateUntouched) {
  const auto s = create_session(small_demo(), *demo().camera, 0);
  const StateMap before = s->states();
  EXPECT_THROW(s->step({{10, {1, std::nullopt}}}, s->camera()), DomainError);
  EXPECT_THROW(s->step(both(7, 0), s->camera()), DomainError);
  EXPECT_THROW(s->step(both(-1, 0), s->camera()), DomainError);
  CommandMap extra = both(0, 0);
  extra[2] = {0, std::nullopt};
  EXPECT_THROW(s->step(extra, s->camera()), DomainError);
  EXPECT_THROW(s->step(both(0, 0), s->camera(), {{10, StyleCode::Zero(3)}}), DomainError);
  CommandMap nan_v = both(0, 0);
  nan_v[10].variability = Vec3(std::nan(""), 0, 0);
  EXPECT_THROW(s->step(nan_v, s->camera()), DomainError);
  EXPECT_EQ(s->tick(), 0);
  EXPECT_EQ(s->states(), before);
}

TEST(Session, RecordBoxesMatchDetection) {
  const auto s = create_session(small_demo(), *demo().camera, 0);
  const TrajectoryRecord r = s->record();
  ASSERT_EQ(r.objects.size(), 2u);
  for (const auto& o : r.objects) {
    ASSERT_TRUE(o.bbox);
    const Detection d = detect_volume(o.id, demo().find_object(o.id)->volume.translated(o.state.x), s->camera());
    EXPECT_EQ(o.bbox->x_min, d.bbox.x_min);
    EXPECT_EQ(o.bbox->y_max, d.bbox.y_max);
  }
}

TEST(RunScript, DemoScriptReplaysIdentically) {
  const Script script = load_script(kData / "scripts/demo_16tick.json");
  ASSERT_EQ(script.ticks.size(), 16u);
  const auto out = std::filesystem::temp_directory_path() / "playenv_session_test_run";
  std::filesystem::remove_all(out);
  const ScriptRun a = run_script(demo(), script, out);
  const ScriptRun b = run_script(demo(), script);
  EXPECT_EQ(a.log.size(), 17u);
  EXPECT_EQ(a.frame_hashes, b.frame_hashes);
  EXPECT_EQ(a.frame_hashes.front(), kDemoFirstFrameHash);
  EXPECT_TRUE(std::filesystem::exists(out / "frame_0016.png"));
  EXPECT_EQ(read_log(out / "trajectory.jsonl").size(), 17u);
  EXPECT_TRUE(std::filesystem::exists(out / "hashes.txt"));
  std::filesystem::remove_all(out);
}

Script level_script(int ticks) {
  Script s;
  s.seed = 5;
  s.camera = level_camera();
  s.width = 64;
  s.height = 32;
  std::mt19937_64 rng(9);
  for (int i = 0; i < ticks; ++i) s.ticks.push_back({both(rng() % 7, rng() % 7), std::nullopt, {}});
  return s;
}

TEST(RunScript, LoggedActionsExplainDisplacementsExactly) {
  const Script script = level_script(30);
  const ScriptRun run = run_script(demo(), script);
  const MetricsReport report = evaluate_log(run.log, &run.log);
  ASSERT_TRUE(report.delta_mse);
  EXPECT_LT(*report.delta_mse, 1e-20);
  EXPECT_EQ(*report.delta_acc, 100.0);
  EXPECT_EQ(*report.add, 0.0);
  EXPECT_EQ(*report.mdr, 0.0);

  for (std::size_t t = 1; t < run.log.size(); ++t)
    for (std::size_t i = 0; i < run.log[t].objects.size(); ++i) {
      const auto inferred = infer_action(run.log[t - 1].objects[i].state, run.log[t].objects[i].state,
                                         run.log[t].camera, demo().action_model);
      ASSERT_TRUE(inferred);
      EXPECT_EQ(inferred->action, script.ticks[t - 1].commands.at(run.log[t].objects[i].id).action);
      EXPECT_LT(inferred->variability.norm(), 1e-12);
    }
}

TEST(RunScript, ErrorsNameTheTick) {
  Script script = level_script(3);
  script.ticks[2].commands[10].action = 9;
  try {
    run_script(demo(), script);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("script.ticks[2]"), std::string::npos);
  }
}

TEST(ParseScript, Errors) {
  json j = parse_json_text(read_text_file(kData / "scripts/demo_16tick.json"));
  json bad = j;
  bad["version"] = 2;
  EXPECT_THROW(parse_script(bad.dump()), ValidationError);
  bad = j;
  bad["ticks"][4]["commands"][0].erase("a");
  try {
    parse_script(bad.dump());
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("script.ticks[4]"), std::string::npos);
  }
  bad = j;
  bad["ticks"][1]["commands"][1]["id"] = 10;
  EXPECT_THROW(parse_script(bad.dump()), ParseError);
  try {
    parse_script("{\n\"version\": 1,\n,\n}");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(SessionManager, CapacityAndEviction) {
  using namespace std::chrono_literals;
  SessionManager m({2, 60s});
  const auto t0 = SessionManager::Clock::time_point{} + 1000s;
  const auto a = m.create(small_demo(), *demo().camera, 0, t0);
  const auto b = m.create(small_demo(), *demo().camera, 0, t0 + 10s);
  EXPECT_NE(a->session->id(), b->session->id());
  EXPECT_EQ(m.size(), 2u);
  EXPECT_THROW(m.create(small_demo(), *demo().camera, 0, t0 + 20s), DomainError);

  EXPECT_EQ(m.find(a->session->id(), t0 + 50s), a);
  EXPECT_EQ(m.evict_idle(t0 + 100s), 1u);
  EXPECT_EQ(m.find(b->session->id(), t0 + 100s), nullptr);
  EXPECT_NE(m.find(a->session->id(), t0 + 100s), nullptr);

  // a was last touched at t0 + 100s, so creating at t0 + 200s evicts it first
  const auto c = m.create(small_demo(), *demo().camera, 0, t0 + 200s);
  EXPECT_EQ(m.size(), 1u);
  EXPECT_EQ(m.find(a->session->id(), t0 + 200s), nullptr);
  m.erase(c->session->id());
  EXPECT_EQ(m.size(), 0u);
  EXPECT_EQ(m.find("nope"), nullptr);
}

class ProtocolTest : public ::testing::Test {
protected:
  ProtocolTest() : sessions({4, std::chrono::seconds(600)}), handler(sessions, scenes, {64, 32, {8, 4}}) {
    scenes.emplace("tennis_demo", demo());
  }

  SceneLibrary scenes;
  SessionManager sessions;
  ProtocolHandler handler;
  Connection conn;
};

TEST_F(ProtocolTest, CreateStepClose) {
  auto out = handler.handle(json{{"type", "create"}, {"scene", "tennis_demo"}, {"seed", 2}}, conn);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0]["type"], "session");
  EXPECT_EQ(out[0]["width"], 64);
  EXPECT_EQ(out[0]["actions"]["K"], 7);
  EXPECT_EQ(out[0]["objects"].size(), 4u);
  EXPECT_EQ(out[1]["type"], "frame");
  EXPECT_EQ(out[1]["tick"], 0);
  EXPECT_EQ(out[1]["png_base64"].get<std::string>().rfind("iVBORw0KGgo", 0), 0u);
  EXPECT_FALSE(conn.session_id.empty());

  out = handler.handle_text(R"({"type":"step","commands":[{"id":10,"a":3},{"id":11,"a":0,"v":[0,0,0]}]})", conn);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0]["type"], "frame");
  EXPECT_EQ(out[0]["tick"], 1);
  EXPECT_EQ(out[0]["states"].size(), 2u);
  EXPECT_EQ(out[0]["states"][0]["id"], 10);

  out = handler.handle(json{{"type", "close"}}, conn);
  EXPECT_EQ(out.at(0)["type"], "closed");
  EXPECT_EQ(sessions.size(), 0u);
  EXPECT_TRUE(conn.session_id.empty());
}

TEST_F(ProtocolTest, ErrorsAreMessages) {
  EXPECT_EQ(handler.handle_text("{oops", conn).at(0)["type"], "error");
  EXPECT_EQ(handler.handle(json{{"type", "dance"}}, conn).at(0)["type"], "error");
  EXPECT_EQ(handler.handle(json{{"type", "step"}, {"commands", json::array()}}, conn).at(0)["type"], "error");
  EXPECT_EQ(handler.handle(json{{"type", "create"}, {"scene", "nope"}}, conn).at(0)["type"], "error");

  handler.handle(json{{"type", "create"}, {"scene", "tennis_demo"}}, conn);
  const auto out = handler.handle_text(R"({"type":"step","commands":[{"id":10,"a":12},{"id":11,"a":0}]})", conn);
  EXPECT_EQ(out.at(0)["type"], "error");
  EXPECT_EQ(out.at(0)["tick"], 0);
  EXPECT_EQ(handler.handle_text(R"({"type":"step","commands":[{"id":10}]})", conn).at(0)["type"], "error");
}

TEST_F(ProtocolTest, RecreateReplacesConnectionSession) {
  handler.handle(json{{"type", "create"}, {"scene", "tennis_demo"}}, conn);
  const std::string first = conn.session_id;
  handler.handle(json{{"type", "create"}, {"scene", "tennis_demo"}}, conn);
  EXPECT_NE(conn.session_id, first);
  EXPECT_EQ(sessions.size(), 1u);
  Connection other;
  handler.handle(json{{"type", "create"}, {"scene", "tennis_demo"}}, other);
  EXPECT_EQ(sessions.size(), 2u);
  handler.disconnect(other);
  EXPECT_EQ(sessions.size(), 1u);
}

TEST_F(ProtocolTest, SameCommandsSameFramesAsDirectSession) {
  handler.handle(json{{"type", "create"}, {"scene", "tennis_demo"}, {"seed", 4}}, conn);
  const auto out = handler.handle_text(R"({"type":"step","commands":[{"id":10,"a":1},{"id":11,"a":2}]})", conn);

  SceneDescription d = demo();
  d.scene.render.width = 64;
  d.scene.render.height = 32;
  const auto s = create_session(d, *demo().camera, 4);
  s->step(both(1, 2), s->camera());
  EXPECT_EQ(out.at(0)["png_base64"], frame_message(*s)["png_base64"]);
}

TEST(Base64, KnownVectors) {
  const std::string text = "foobar";
  const std::vector<std::uint8_t> bytes(text.begin(), text.end());
  EXPECT_EQ(base64_encode(std::span(bytes).first(0)), "");
  EXPECT_EQ(base64_encode(std::span(bytes).first(1)), "Zg==");
  EXPECT_EQ(base64_encode(std::span(bytes).first(2)), "Zm8=");
  EXPECT_EQ(base64_encode(bytes), "Zm9vYmFy");
}

TEST(WebSocket, LoopbackSession) {
  namespace beast = boost::beast;
  namespace ws = beast::websocket;
  using tcp = boost::asio::ip::tcp;

  SceneLibrary scenes{{"tennis_demo", demo()}};
  SessionManager sessions;
  ProtocolHandler handler(sessions, scenes, {64, 32, {8, 4}});
  WebSocketServer server(handler, "127.0.0.1", 0);
  server.start();

  boost::asio::io_context ioc;
  tcp::resolver resolver(ioc);
  ws::stream<tcp::socket> client(ioc);
  boost::asio::connect(client.next_layer(), resolver.resolve("127.0.0.1", std::to_string(server.port())));
  client.handshake("127.0.0.1", "/");

  const auto exchange = [&](const json& msg, int replies) {
    client.write(boost::asio::buffer(msg.dump()));
    std::vector<json> out;
    for (int i = 0; i < replies; ++i) {
      beast::flat_buffer buf;
      client.read(buf);
      out.push_back(json::parse(beast::buffers_to_string(buf.data())));
    }
    return out;
  };

  auto out = exchange({{"type", "create"}, {"scene", "tennis_demo"}}, 2);
  EXPECT_EQ(out[0]["type"], "session");
  EXPECT_EQ(out[1]["tick"], 0);
  out = exchange(json::parse(R"({"type":"step","commands":[{"id":10,"a":3},{"id":11,"a":4}]})"), 1);
  EXPECT_EQ(out[0]["type"], "frame");
  EXPECT_EQ(out[0]["tick"], 1);
  EXPECT_EQ(sessions.size(), 1u);

  client.close(ws::close_code::normal);
  for (int i = 0; i < 200 && sessions.size() != 0; ++i)
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  EXPECT_EQ(sessions.size(), 0u);
  server.stop();
}

}  // namespace
}  // namespace playenv
