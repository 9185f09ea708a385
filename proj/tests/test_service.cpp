#include <gtest/gtest.h>
#include <httplib.h>

#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <thread>

#include "evg/service.hpp"
#include "test_support.hpp"

namespace evg {
namespace {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using namespace std::chrono_literals;

Checkpoint tiny_checkpoint() {
  return {ModelConfig::tiny(), test::trained_tiny().params};
}

class WsClient {
 public:
  WsClient(unsigned short port, const std::string& target) : ws_(ioc_) {
    beast::get_lowest_layer(ws_).connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port));
    ws_.handshake("127.0.0.1", target);
  }

  void text(const Json& j) {
    ws_.text(true);
    ws_.write(net::buffer(j.dump()));
  }
  void text_raw(const std::string& s) {
    ws_.text(true);
    ws_.write(net::buffer(s));
  }
  void binary(const std::vector<std::uint8_t>& bytes) {
    ws_.binary(true);
    ws_.write(net::buffer(bytes));
  }

  /// Next frame, or nothing once the server has closed the connection.
  std::optional<Json> read(std::chrono::milliseconds timeout = 10s) {
    beast::get_lowest_layer(ws_).expires_after(timeout);
    beast::flat_buffer buf;
    beast::error_code ec;
    bool done = false;
    ws_.async_read(buf, [&](beast::error_code e, std::size_t) {
      ec = e;
      done = true;
    });
    ioc_.restart();
    ioc_.run();
    if (!done || ec) return std::nullopt;
    return Json::parse(beast::buffers_to_string(buf.data()));
  }

  /// Reads until a frame satisfies `pred`; everything read is kept.
  std::optional<Json> read_until(const std::function<bool(const Json&)>& pred,
                                 std::chrono::milliseconds timeout = 20s) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline) {
      auto m = read(std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now()));
      if (!m) return std::nullopt;
      seen.push_back(*m);
      if (pred(*m)) return m;
    }
    return std::nullopt;
  }

  void close() {
    beast::error_code ec;
    ws_.close(websocket::close_code::normal, ec);
  }

  std::vector<Json> seen;

 private:
  net::io_context ioc_;
  websocket::stream<beast::tcp_stream> ws_;
};

bool has_type(const Json& m, const char* type) { return m.value("type", "") == type; }

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override { start({}); }
  void TearDown() override { server_->stop(); }

  void start(ServiceConfig config) {
    if (server_) server_->stop();
    config.port = 0;
    config.model_name = "tiny";
    server_ = std::make_unique<Server>(tiny_checkpoint(), config);
    port_ = server_->start();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(30, 0);
  }

  Json create(const Json& body, int expected_status = 201) {
    auto res = client_->Post("/sessions", body.dump(), "application/json");
    EXPECT_TRUE(res);
    if (!res) return {};
    EXPECT_EQ(res->status, expected_status) << res->body;
    return Json::parse(res->body);
  }

  Json get(const std::string& path, int expected_status = 200) {
    auto res = client_->Get(path);
    EXPECT_TRUE(res);
    if (!res) return {};
    EXPECT_EQ(res->status, expected_status) << res->body;
    return Json::parse(res->body, nullptr, false);
  }

  static Json data_session(int repetitions) {
    return {{"clock", "data"}, {"repetitions", repetitions}, {"seed", 4}, {"threshold", 0.4}};
  }

  std::unique_ptr<Server> server_;
  std::unique_ptr<httplib::Client> client_;
  unsigned short port_ = 0;
};

TEST_F(ServiceTest, HealthAndModelInfo) {
  EXPECT_EQ(get("/health")["status"], "ok");
  const Json m = get("/model");
  EXPECT_EQ(m["name"], "tiny");
  EXPECT_EQ(m["param_count"], count_params(ModelConfig::tiny()));
  EXPECT_EQ(m["threshold"], 0.7);
  EXPECT_EQ(m["window_length_us"], 500'000);
  EXPECT_EQ(m["stride_us"], 80'000);
  EXPECT_EQ(get("/nope", 404)["error"], "not_found");
}

TEST_F(ServiceTest, CorsPreflight) {
  auto res = client_->Options("/sessions");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 204);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
}

TEST_F(ServiceTest, CreateSessionValidatesItsBody) {
  EXPECT_EQ(create(Json::parse("[1]"), 400)["error"], "bad_json");
  EXPECT_EQ(create({{"clock", "sundial"}}, 400)["error"], "bad_request");
  EXPECT_EQ(create({{"gestures", {"wave"}}}, 400)["error"], "bad_request");
  EXPECT_EQ(create({{"repetitions", 1001}}, 400)["error"], "bad_request");
  EXPECT_EQ(create({{"threshold", 1.5}}, 400)["error"], "bad_request");
  auto res = client_->Post("/sessions", "{not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);

  const Json s = create(Json::object());
  EXPECT_EQ(s["clock"], "wall");
  EXPECT_EQ(s["total"], 30);
  EXPECT_EQ(s["schedule"].size(), 30u);
  EXPECT_EQ(s["threshold"], 0.7);
  EXPECT_EQ(s["live"], "/sessions/" + s["id"].get<std::string>() + "/live");
  EXPECT_EQ(get("/sessions").size(), 1u);
  EXPECT_EQ(server_->session_count(), 1u);
}

TEST_F(ServiceTest, SessionLimitIsEnforced) {
  ServiceConfig config;
  config.max_sessions = 2;
  start(config);
  create(Json::object());
  create(Json::object());
  EXPECT_EQ(create(Json::object(), 503)["error"], "too_many_sessions");
}

TEST_F(ServiceTest, UnknownSessionsAndPlainLiveRequests) {
  EXPECT_EQ(get("/sessions/s999999/report", 404)["error"], "not_found");
  const Json s = create(Json::object());
  EXPECT_EQ(get(s["live"].get<std::string>(), 426)["error"], "upgrade_required");
  EXPECT_THROW(WsClient(port_, "/sessions/s999999/live"), beast::system_error);
}

TEST_F(ServiceTest, InferMatchesTheLibraryPipeline) {
  const auto& tm = test::trained_tiny();
  const auto spec = make_scenario(GestureClass::kSwipeLeft, {16, 16}, 31);
  const EventStream stream = generate_events(spec, EsimConfig{});
  const auto bytes = encode_events(stream);
  auto res = client_->Post("/infer?threshold=0.3", std::string(bytes.begin(), bytes.end()),
                           "application/octet-stream");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200) << res->body;
  const Json j = Json::parse(res->body);
  EXPECT_EQ(j["events"], stream.events.size());
  EXPECT_EQ(j["threshold"], 0.3);

  PipelineConfig pc;
  pc.policy = ThresholdPolicy::uniform(0.3);
  const Timestamp end = stream.events.back().t + pc.aggregator.window_length;
  PipelineStats stats;
  const auto expected = run_pipeline(tm.model, tm.params, stream, pc, end, &stats);
  EXPECT_EQ(j["windows"], stats.windows_processed);
  ASSERT_EQ(j["detections"].size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(j["detections"][i]["gesture"], class_name(expected[i].gesture));
    EXPECT_EQ(j["detections"][i]["t_us"], expected[i].window_end);
  }
}

TEST_F(ServiceTest, InferRejectsBadPayloads) {
  auto res = client_->Post("/infer", std::string("garbage"), "application/octet-stream");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(Json::parse(res->body)["error"], "truncated_header");

  const auto wrong = encode_events(EventStream{{64, 64}, {{1, 1, 1, 10}}});
  res = client_->Post("/infer", std::string(wrong.begin(), wrong.end()), "application/octet-stream");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(Json::parse(res->body)["error"], "geometry_mismatch");

  const auto ok = encode_events(EventStream{{16, 16}, {{1, 1, 1, 10}}});
  res = client_->Post("/infer?threshold=2", std::string(ok.begin(), ok.end()), "application/octet-stream");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
}

TEST_F(ServiceTest, LiveChannelReportsMalformedFrames) {
  const Json s = create(data_session(1));
  WsClient ws(port_, s["live"]);
  auto expect_error = [&](const char* code) {
    const auto m = ws.read_until([](const Json& j) { return has_type(j, "error"); });
    ASSERT_TRUE(m.has_value()) << code;
    EXPECT_EQ((*m)["code"], code);
  };
  ws.text_raw("{oops");
  expect_error("bad_json");
  ws.text({{"type", "dance"}});
  expect_error("unknown_type");
  ws.text({{"type", "pointer_batch"}, {"samples", {{{"x", 0.5}}}}});
  expect_error("bad_message");
  ws.text({{"type", "pointer_batch"}, {"samples", Json::array()}, {"t_us", -5}});
  expect_error("bad_message");
  ws.binary({1, 2, 3});
  expect_error("truncated_header");
  ws.binary(encode_events(EventStream{{64, 64}, {}}));
  expect_error("geometry_mismatch");
  // The channel is still usable afterwards.
  ws.text({{"type", "pointer_batch"}, {"samples", Json::array()}, {"t_us", 2'000'000}});
  const auto prompt = ws.read_until([](const Json& j) { return has_type(j, "prompt"); });
  ASSERT_TRUE(prompt.has_value());
}

TEST_F(ServiceTest, DataModeTrialOverTheLiveChannel) {
  const Json s = create(data_session(2));
  const std::string id = s["id"];
  const auto session = server_->find_session(id);
  ASSERT_TRUE(session);
  const auto performer = simulator_performer({16, 16}, EsimConfig{}, 8);
  const EventStream stream = build_trial_stream(session->schedule(), performer, {16, 16});
  const Timestamp end = schedule_end(session->schedule());

  WsClient ws(port_, s["live"]);
  std::size_t i = 0;
  for (Timestamp t = 250'000; t <= end; t += 250'000) {
    EventStream chunk{{16, 16}, {}};
    while (i < stream.events.size() && stream.events[i].t <= t) chunk.events.push_back(stream.events[i++]);
    if (!chunk.events.empty()) ws.binary(encode_events(chunk));
    ws.text({{"type", "pointer_batch"}, {"samples", Json::array()}, {"t_us", t}});
  }
  const auto done = ws.read_until([](const Json& j) { return has_type(j, "stats") && j["finished"] == true; });
  ASSERT_TRUE(done.has_value());
  EXPECT_EQ((*done)["records"], 6);

  // Give the last detections a moment to drain, then compare with the report.
  ws.read_until([](const Json&) { return false; }, 300ms);
  std::size_t prompts = 0, detections = 0;
  for (const auto& m : ws.seen) {
    prompts += has_type(m, "prompt");
    detections += has_type(m, "detection");
  }
  EXPECT_EQ(prompts, 6u);
  const Json report = get("/sessions/" + id + "/report");
  EXPECT_EQ(report["records"].size(), 6u);
  EXPECT_EQ(report["detections"].size(), detections);
  EXPECT_EQ(report["finished"], true);

  // Offline reference over the same schedule and events.
  PipelineConfig pc;
  pc.policy = ThresholdPolicy::uniform(0.4);
  const auto& tm = test::trained_tiny();
  const auto ref = score_trial(session->schedule(), run_pipeline(tm.model, tm.params, stream, pc, end),
                               session->options().trial.gestures);
  ASSERT_EQ(report["records"].size(), ref.records.size());
  for (std::size_t k = 0; k < ref.records.size(); ++k) {
    EXPECT_EQ(report["records"][k]["outcome"], to_string(ref.records[k].outcome));
  }

  const Json surface = get("/sessions/" + id + "/surface");
  EXPECT_EQ(surface["available"], true);
  EXPECT_EQ(surface["width"], 16);
  ASSERT_EQ(surface["channels"].size(), 2u);
  EXPECT_EQ(surface["channels"][0].size(), 256u);
}

TEST_F(ServiceTest, OneConnectionPerSessionAndReconnect) {
  const Json s = create(data_session(1));
  const auto session = server_->find_session(s["id"]);
  {
    WsClient first(port_, s["live"]);
    // The first client is registered once the server has started its feed.
    for (int k = 0; k < 200 && !session->connected(); ++k) std::this_thread::sleep_for(5ms);
    ASSERT_TRUE(session->connected());
    WsClient second(port_, s["live"]);
    const auto m = second.read();
    ASSERT_TRUE(m.has_value());
    EXPECT_EQ((*m)["code"], "already_connected");
    EXPECT_FALSE(second.read(2s).has_value());
    first.close();
  }
  for (int k = 0; k < 400 && session->connected(); ++k) std::this_thread::sleep_for(5ms);
  EXPECT_FALSE(session->connected());
  WsClient again(port_, s["live"]);
  again.text({{"type", "pointer_batch"}, {"samples", Json::array()}, {"t_us", 1'600'000}});
  EXPECT_TRUE(again.read_until([](const Json& j) { return has_type(j, "prompt"); }).has_value());
}

TEST_F(ServiceTest, DeleteMidTrialKeepsOnlyClosedWindows) {
  const Json s = create(data_session(2));
  const std::string id = s["id"];
  const auto schedule = server_->find_session(id)->schedule();
  {
    WsClient ws(port_, s["live"]);
    // Past the first window, inside the second.
    const Timestamp t = schedule[1].window_start + 500'000;
    ws.text({{"type", "pointer_batch"}, {"samples", Json::array()}, {"t_us", t}});
    ASSERT_TRUE(ws.read_until([](const Json& j) { return has_type(j, "stats"); }).has_value());
  }
  auto res = client_->Delete("/sessions/" + id);
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200);
  const Json report = Json::parse(res->body);
  ASSERT_EQ(report["records"].size(), 1u);
  EXPECT_EQ(report["records"][0]["outcome"], "timeout");
  EXPECT_EQ(report["finished"], false);
  EXPECT_EQ(get("/sessions/" + id + "/report", 404)["error"], "not_found");
  EXPECT_EQ(server_->session_count(), 0u);
}

TEST_F(ServiceTest, IdleDisconnectedSessionsAreReaped) {
  ServiceConfig config;
  config.idle_timeout_s = 0.2;
  start(config);
  const Json s = create(Json::object());
  EXPECT_EQ(server_->session_count(), 1u);
  for (int k = 0; k < 300 && server_->session_count() > 0; ++k) std::this_thread::sleep_for(10ms);
  EXPECT_EQ(server_->session_count(), 0u);
  get("/sessions/" + s["id"].get<std::string>() + "/report", 404);
}

TEST_F(ServiceTest, ConnectedSessionsAreNotReaped) {
  ServiceConfig config;
  config.idle_timeout_s = 0.2;
  start(config);
  const Json s = create(data_session(1));
  WsClient ws(port_, s["live"]);
  std::this_thread::sleep_for(600ms);
  EXPECT_EQ(server_->session_count(), 1u);
}

TEST_F(ServiceTest, StopInterruptsOpenConnections) {
  const Json s = create(data_session(1));
  WsClient ws(port_, s["live"]);
  const auto t0 = std::chrono::steady_clock::now();
  server_->stop();
  EXPECT_LT(std::chrono::steady_clock::now() - t0, 3s);
  EXPECT_FALSE(ws.read(3s).has_value());
}

}  // namespace
}  // namespace evg
