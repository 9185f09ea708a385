#include "evg/service.hpp"

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <sys/socket.h>

#include <condition_variable>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <list>
#include <sstream>

namespace evg {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

using Request = http::request<http::string_body>;
using Response = http::response<http::string_body>;

constexpr std::size_t kMaxBodyBytes = 64u << 20;
constexpr auto kPollInterval = std::chrono::milliseconds(10);

class HttpError : public std::runtime_error {
 public:
  HttpError(http::status status, std::string code, const std::string& message)
      : std::runtime_error(message), status_(status), code_(std::move(code)) {}
  http::status status() const noexcept { return status_; }
  const std::string& code() const noexcept { return code_; }

 private:
  http::status status_;
  std::string code_;
};

std::vector<std::string> split_path(std::string_view target) {
  target = target.substr(0, target.find('?'));
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < target.size()) {
    const std::size_t j = target.find('/', i);
    const std::size_t end = j == std::string_view::npos ? target.size() : j;
    if (end > i) parts.emplace_back(target.substr(i, end - i));
    i = end + 1;
  }
  return parts;
}

std::optional<std::string> query_param(std::string_view target, std::string_view key) {
  const std::size_t q = target.find('?');
  if (q == std::string_view::npos) return std::nullopt;
  std::istringstream query{std::string(target.substr(q + 1))};
  std::string pair;
  while (std::getline(query, pair, '&')) {
    const std::size_t eq = pair.find('=');
    if (pair.compare(0, eq, key) == 0 && (eq == std::string::npos ? pair.size() : eq) == key.size()) {
      return eq == std::string::npos ? std::string() : pair.substr(eq + 1);
    }
  }
  return std::nullopt;
}

std::string_view mime_type(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".html") return "text/html; charset=utf-8";
  if (ext == ".js" || ext == ".mjs") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json" || ext == ".map") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".wasm") return "application/wasm";
  return "application/octet-stream";
}

Json error_body(std::string_view code, std::string_view message) {
  return {{"error", std::string(code)}, {"message", std::string(message)}};
}

Json error_frame(std::string_view code, std::string_view message) {
  return {{"type", "error"}, {"code", std::string(code)}, {"message", std::string(message)}};
}

template <typename T>
T json_field(const Json& body, const char* key, T fallback) {
  if (!body.contains(key)) return fallback;
  try {
    return body.at(key).get<T>();
  } catch (const Json::exception&) {
    throw HttpError(http::status::bad_request, "bad_request", std::string("bad field '") + key + "'");
  }
}

struct SessionRequest {
  SessionOptions options;
  double threshold;
  Timestamp refractory;
};

SessionRequest parse_session_request(const std::string& body_text, double default_threshold) {
  Json body = Json::object();
  if (!body_text.empty()) {
    body = Json::parse(body_text, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      throw HttpError(http::status::bad_request, "bad_json", "body must be a JSON object");
    }
  }
  SessionRequest r;
  TrialConfig& trial = r.options.trial;
  if (body.contains("gestures")) {
    if (!body["gestures"].is_array()) {
      throw HttpError(http::status::bad_request, "bad_request", "gestures must be an array");
    }
    trial.gestures.clear();
    for (const auto& g : body["gestures"]) {
      const auto c = g.is_string() ? parse_class(g.get<std::string>()) : std::nullopt;
      if (!c) throw HttpError(http::status::bad_request, "bad_request", "unknown gesture " + g.dump());
      trial.gestures.push_back(*c);
    }
  }
  trial.repetitions = json_field(body, "repetitions", trial.repetitions);
  trial.gap_s = json_field(body, "gap_s", trial.gap_s);
  trial.window_s = json_field(body, "window_s", trial.window_s);
  trial.seed = json_field(body, "seed", trial.seed);
  const std::string clock = json_field<std::string>(body, "clock", "wall");
  if (clock == "wall") {
    r.options.clock = SessionClock::kWall;
  } else if (clock == "data") {
    r.options.clock = SessionClock::kData;
  } else {
    throw HttpError(http::status::bad_request, "bad_request", "clock must be 'wall' or 'data'");
  }
  r.options.pointer.mirror_x = json_field(body, "mirror_x", false);
  r.threshold = json_field(body, "threshold", default_threshold);
  const double refractory_ms = json_field(body, "refractory_ms", 500.0);
  if (!(refractory_ms >= 0.0 && refractory_ms <= 60'000.0)) {
    throw HttpError(http::status::bad_request, "bad_request", "refractory_ms out of range");
  }
  r.refractory = static_cast<Timestamp>(std::llround(refractory_ms * 1000.0));
  if (trial.repetitions > 1000) {
    throw HttpError(http::status::bad_request, "bad_request", "at most 1000 repetitions");
  }
  try {
    trial.validate();
    ThresholdPolicy::uniform(r.threshold).validate();
  } catch (const std::invalid_argument& e) {
    throw HttpError(http::status::bad_request, "bad_request", e.what());
  }
  return r;
}

std::vector<PointerSample> parse_samples(const Json& samples) {
  if (!samples.is_array()) throw std::invalid_argument("samples must be an array");
  std::vector<PointerSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (!s.is_object() || !s.contains("x") || !s.contains("y") || !s.contains("t_us") ||
        !s["x"].is_number() || !s["y"].is_number() || !s["t_us"].is_number_integer()) {
      throw std::invalid_argument("each sample needs numeric x, y and integer t_us");
    }
    const auto t = s["t_us"].get<std::int64_t>();
    if (t < 0) throw std::invalid_argument("t_us must be non-negative");
    PointerSample p;
    p.x = s["x"].get<double>();
    p.y = s["y"].get<double>();
    p.pressed = s.value("pressed", false);
    p.t = static_cast<Timestamp>(t);
    out.push_back(p);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

struct Connection {
  net::io_context ioc;
  tcp::socket socket{ioc};
  std::thread thread;
  std::atomic<bool> done{false};
  std::mutex fd_mutex;
  int fd = -1;

  void interrupt() {
    {
      std::lock_guard lock(fd_mutex);
      if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
    }
    ioc.stop();
  }
  void forget_fd() {
    std::lock_guard lock(fd_mutex);
    fd = -1;
  }
};

struct Server::Impl {
  Impl(Checkpoint ck, ServiceConfig cfg)
      : checkpoint(std::move(ck)), model(checkpoint.config), config(std::move(cfg)) {}

  Checkpoint checkpoint;
  Model model;
  ServiceConfig config;

  net::io_context accept_ioc;
  tcp::acceptor acceptor{accept_ioc};
  std::thread accept_thread, ticker_thread;
  bool running = false;

  std::mutex conn_mutex;
  std::list<std::unique_ptr<Connection>> connections;

  mutable std::mutex sessions_mutex;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::uint64_t next_session = 1;

  std::mutex stop_mutex;
  std::condition_variable stop_cv;
  bool stopping = false;

  PipelineConfig pipeline_config(double threshold, Timestamp refractory) const {
    PipelineConfig p;
    p.policy = ThresholdPolicy::uniform(threshold, refractory);
    return p;
  }

  std::shared_ptr<Session> find(const std::string& id) const {
    std::lock_guard lock(sessions_mutex);
    const auto it = sessions.find(id);
    return it == sessions.end() ? nullptr : it->second;
  }

  // Accepting --------------------------------------------------------------

  void do_accept() {
    auto conn = std::make_unique<Connection>();
    Connection* raw = conn.get();
    acceptor.async_accept(raw->socket, [this, c = std::move(conn)](beast::error_code ec) mutable {
      if (ec) {
        if (ec == net::error::operation_aborted || !acceptor.is_open()) return;
      } else {
        launch(std::move(c));
      }
      do_accept();
    });
  }

  void launch(std::unique_ptr<Connection> conn) {
    Connection* raw = conn.get();
    std::lock_guard lock(conn_mutex);
    for (auto it = connections.begin(); it != connections.end();) {
      if ((*it)->done) {
        (*it)->thread.join();
        it = connections.erase(it);
      } else {
        ++it;
      }
    }
    raw->fd = raw->socket.native_handle();
    raw->thread = std::thread([this, raw] {
      try {
        serve_connection(*raw);
      } catch (const std::exception&) {
        // A broken client connection only ends that connection.
      }
      raw->forget_fd();
      raw->done = true;
    });
    connections.push_back(std::move(conn));
  }

  // HTTP -------------------------------------------------------------------

  void serve_connection(Connection& conn) {
    beast::flat_buffer buffer;
    for (;;) {
      http::request_parser<http::string_body> parser;
      parser.body_limit(kMaxBodyBytes);
      beast::error_code ec;
      http::read(conn.socket, buffer, parser, ec);
      if (ec) return;
      Request req = parser.release();
      if (websocket::is_upgrade(req)) {
        serve_websocket(conn, std::move(req));
        return;
      }
      Response res = respond(req);
      res.keep_alive(req.keep_alive());
      http::write(conn.socket, res, ec);
      if (ec || !res.keep_alive()) break;
    }
    beast::error_code ignored;
    conn.socket.shutdown(tcp::socket::shutdown_send, ignored);
  }

  static Response make_response(const Request& req, http::status status, std::string body,
                                std::string_view content_type) {
    Response res{status, req.version()};
    res.set(http::field::server, "evgesture");
    res.set(http::field::content_type, beast::string_view(content_type.data(), content_type.size()));
    res.set(http::field::access_control_allow_origin, "*");
    res.body() = std::move(body);
    res.prepare_payload();
    return res;
  }

  static Response json_response(const Request& req, http::status status, const Json& body) {
    return make_response(req, status, body.dump(), "application/json");
  }

  Response respond(const Request& req) {
    try {
      return route(req);
    } catch (const HttpError& e) {
      return json_response(req, e.status(), error_body(e.code(), e.what()));
    } catch (const std::exception& e) {
      return json_response(req, http::status::internal_server_error, error_body("internal", e.what()));
    }
  }

  Response route(const Request& req) {
    const auto method = req.method();
    const std::string_view target(req.target().data(), req.target().size());
    const auto path = split_path(target);

    if (method == http::verb::options) {
      Response res = make_response(req, http::status::no_content, "", "text/plain");
      res.set(http::field::access_control_allow_methods, "GET, POST, DELETE, OPTIONS");
      res.set(http::field::access_control_allow_headers, "Content-Type");
      return res;
    }
    if (path.size() == 1 && path[0] == "health" && method == http::verb::get) {
      return json_response(req, http::status::ok, {{"status", "ok"}});
    }
    if (path.size() == 1 && path[0] == "model" && method == http::verb::get) {
      Json info = model_info(checkpoint.config);
      const AggregatorConfig aggregator;
      info["name"] = config.model_name;
      info["threshold"] = config.threshold;
      info["window_length_us"] = aggregator.window_length;
      info["stride_us"] = aggregator.stride;
      return json_response(req, http::status::ok, info);
    }
    if (path.size() == 1 && path[0] == "infer") {
      if (method != http::verb::post) throw HttpError(http::status::method_not_allowed, "method", "use POST");
      return json_response(req, http::status::ok, infer(req.body(), target));
    }
    if (!path.empty() && path[0] == "sessions") {
      if (path.size() == 1 && method == http::verb::post) {
        return json_response(req, http::status::created, create_session(req.body()));
      }
      if (path.size() == 1 && method == http::verb::get) return json_response(req, http::status::ok, list_sessions());
      if (path.size() >= 2) {
        const auto session = find(path[1]);
        if (!session) throw HttpError(http::status::not_found, "not_found", "no session " + path[1]);
        if (path.size() == 2 && method == http::verb::delete_) {
          session->flush();
          Json report = session->report();
          std::lock_guard lock(sessions_mutex);
          sessions.erase(path[1]);
          return json_response(req, http::status::ok, report);
        }
        if (path.size() == 3 && path[2] == "report" && method == http::verb::get) {
          return json_response(req, http::status::ok, session->report());
        }
        if (path.size() == 3 && path[2] == "surface" && method == http::verb::get) {
          return json_response(req, http::status::ok, surface_json(session->last_surface()));
        }
        if (path.size() == 3 && path[2] == "live") {
          throw HttpError(http::status::upgrade_required, "upgrade_required", "connect with a WebSocket");
        }
      }
      throw HttpError(http::status::not_found, "not_found", "no such endpoint");
    }
    if (method == http::verb::get && !config.static_dir.empty()) return static_file(req, target);
    throw HttpError(http::status::not_found, "not_found", "no such endpoint");
  }

  Json infer(const std::string& body, std::string_view target) {
    EventStream stream;
    try {
      stream = decode_events(std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()));
    } catch (const DecodeError& e) {
      throw HttpError(http::status::bad_request, std::string(to_string(e.code())), e.what());
    }
    if (stream.geometry != checkpoint.config.input) {
      throw HttpError(http::status::bad_request, "geometry_mismatch",
                      "stream is " + std::to_string(stream.geometry.width) + "x" +
                          std::to_string(stream.geometry.height) + ", model expects " +
                          std::to_string(checkpoint.config.input.width) + "x" +
                          std::to_string(checkpoint.config.input.height));
    }
    double threshold = config.threshold;
    if (const auto q = query_param(target, "threshold")) {
      try {
        threshold = std::stod(*q);
      } catch (const std::exception&) {
        throw HttpError(http::status::bad_request, "bad_request", "bad threshold");
      }
    }
    PipelineConfig pipeline;
    try {
      pipeline = pipeline_config(threshold, ThresholdPolicy{}.refractory);
      pipeline.validate();
    } catch (const std::invalid_argument& e) {
      throw HttpError(http::status::bad_request, "bad_request", e.what());
    }
    const Timestamp end =
        (stream.events.empty() ? 0 : stream.events.back().t) + pipeline.aggregator.window_length;
    PipelineStats stats;
    const auto detections = run_pipeline(model, checkpoint.params, stream, pipeline, end, &stats);
    Json list = Json::array();
    for (const auto& d : detections) list.push_back(to_json(d));
    return {{"detections", list},
            {"events", stream.events.size()},
            {"windows", stats.windows_processed},
            {"threshold", threshold}};
  }

  Json create_session(const std::string& body) {
    const SessionRequest r = parse_session_request(body, config.threshold);
    std::string id;
    {
      std::lock_guard lock(sessions_mutex);
      if (sessions.size() >= config.max_sessions) {
        throw HttpError(http::status::service_unavailable, "too_many_sessions", "session limit reached");
      }
      char buf[32];
      std::snprintf(buf, sizeof buf, "s%06llu", static_cast<unsigned long long>(next_session++));
      id = buf;
    }
    auto session = std::make_shared<Session>(id, model, checkpoint.params,
                                             pipeline_config(r.threshold, r.refractory), r.options);
    Json schedule = Json::array();
    for (const auto& s : session->schedule()) schedule.push_back(to_json(s));
    {
      std::lock_guard lock(sessions_mutex);
      sessions.emplace(id, session);
    }
    return {{"id", id},
            {"clock", r.options.clock == SessionClock::kWall ? "wall" : "data"},
            {"total", session->schedule().size()},
            {"threshold", r.threshold},
            {"schedule", schedule},
            {"live", "/sessions/" + id + "/live"}};
  }

  Json list_sessions() const {
    Json out = Json::array();
    std::lock_guard lock(sessions_mutex);
    for (const auto& [id, s] : sessions) {
      out.push_back({{"id", id}, {"connected", s->connected()}, {"finished", s->finished()}});
    }
    return out;
  }

  static Json surface_json(const std::optional<TimeSurface>& surface) {
    if (!surface) return {{"available", false}};
    const std::size_t n = surface->geometry.pixel_count();
    Json channels = Json::array();
    for (int c = 0; c < TimeSurface::kChannels; ++c) {
      // Quantized to bytes; the view only needs intensities.
      std::vector<int> v(n);
      for (std::size_t i = 0; i < n; ++i) {
        v[i] = static_cast<int>(std::lround(surface->values[c * n + i] * 255.0F));
      }
      channels.push_back(std::move(v));
    }
    return {{"available", true},
            {"width", surface->geometry.width},
            {"height", surface->geometry.height},
            {"window_end_us", surface->window_end},
            {"window_length_us", surface->window_length},
            {"channels", channels}};
  }

  Response static_file(const Request& req, std::string_view target) {
    namespace fs = std::filesystem;
    std::string rel(target.substr(0, target.find('?')));
    if (rel.empty() || rel == "/") rel = "/index.html";
    if (rel.find("..") != std::string::npos) throw HttpError(http::status::bad_request, "bad_request", "bad path");
    const fs::path path = fs::path(config.static_dir) / rel.substr(1);
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) throw HttpError(http::status::not_found, "not_found", "no such file");
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return make_response(req, http::status::ok, ss.str(), mime_type(path));
  }

  // WebSocket --------------------------------------------------------------

  void serve_websocket(Connection& conn, Request req) {
    const auto path = split_path(std::string_view(req.target().data(), req.target().size()));
    std::shared_ptr<Session> session;
    if (path.size() == 3 && path[0] == "sessions" && path[2] == "live") session = find(path[1]);
    if (!session) {
      Response res = json_response(req, http::status::not_found, error_body("not_found", "no such session"));
      res.keep_alive(false);
      beast::error_code ec;
      http::write(conn.socket, res, ec);
      return;
    }
    websocket::stream<tcp::socket> ws(std::move(conn.socket));
    ws.accept(req);
    if (session->connected()) {
      const std::string msg = error_frame("already_connected", "session has a live connection").dump();
      ws.text(true);
      beast::error_code ec;
      ws.write(net::buffer(msg), ec);
      ws.close(websocket::close_code::policy_error, ec);
      return;
    }
    session->set_connected(true);
    session->start();
    LiveChannel channel(ws, std::move(session), conn.ioc);
    channel.run();
    conn.ioc.run();
    channel.finish();
  }

  /// One client's feed. All handlers run on the connection's own thread.
  class LiveChannel {
   public:
    LiveChannel(websocket::stream<tcp::socket>& ws, std::shared_ptr<Session> session,
                net::io_context& ioc)
        : ws_(ws), session_(std::move(session)), timer_(ioc),
          detections_(session_->subscribe_detections()) {}

    void run() {
      do_read();
      poll();
    }

    void finish() {
      detections_->close();
      session_->set_connected(false);
    }

   private:
    void do_read() {
      ws_.async_read(read_buffer_, [this](beast::error_code ec, std::size_t) {
        if (ec) {
          closing_ = true;
          timer_.cancel();
          return;
        }
        const bool binary = ws_.got_binary();
        const std::string data = beast::buffers_to_string(read_buffer_.data());
        read_buffer_.consume(read_buffer_.size());
        handle(data, binary);
        do_read();
      });
    }

    void handle(const std::string& data, bool binary) {
      session_->touch();
      if (binary) {
        try {
          EventStream stream =
              decode_events(std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
          if (stream.geometry != session_->geometry()) {
            send(error_frame("geometry_mismatch", "HEV1 geometry does not match the model input"));
            return;
          }
          session_->ingest_events(std::move(stream.events));
        } catch (const DecodeError& e) {
          send(error_frame(to_string(e.code()), e.what()));
        }
        return;
      }
      const Json msg = Json::parse(data, nullptr, false);
      if (msg.is_discarded() || !msg.is_object()) {
        send(error_frame("bad_json", "text frames must be JSON objects"));
        return;
      }
      const std::string type = msg.contains("type") && msg["type"].is_string() ? msg["type"].get<std::string>() : "";
      if (type != "pointer_batch") {
        send(error_frame("unknown_type", "unsupported message type '" + type + "'"));
        return;
      }
      try {
        session_->ingest_pointer(parse_samples(msg.value("samples", Json::array())));
        if (msg.contains("t_us")) {
          if (!msg["t_us"].is_number_integer() || msg["t_us"].get<std::int64_t>() < 0) {
            throw std::invalid_argument("t_us must be a non-negative integer");
          }
          session_->advance_to(msg["t_us"].get<Timestamp>());
        }
      } catch (const std::invalid_argument& e) {
        send(error_frame("bad_message", e.what()));
      }
    }

    void poll() {
      if (closing_) return;
      for (auto& m : session_->take_messages()) send(m);
      while (auto d = detections_->pop(std::chrono::milliseconds(0))) {
        Json j = to_json(*d);
        j["type"] = "detection";
        send(j);
      }
      timer_.expires_after(kPollInterval);
      timer_.async_wait([this](beast::error_code ec) {
        if (!ec) poll();
      });
    }

    void send(const Json& msg) {
      if (closing_) return;
      outgoing_.push_back(msg.dump());
      if (!writing_) do_write();
    }

    void do_write() {
      writing_ = true;
      ws_.text(true);
      ws_.async_write(net::buffer(outgoing_.front()), [this](beast::error_code ec, std::size_t) {
        outgoing_.pop_front();
        writing_ = false;
        if (ec) {
          closing_ = true;
          timer_.cancel();
          return;
        }
        if (!outgoing_.empty()) do_write();
      });
    }

    websocket::stream<tcp::socket>& ws_;
    std::shared_ptr<Session> session_;
    net::steady_timer timer_;
    std::shared_ptr<DropOldestQueue<DetectionEvent>> detections_;
    beast::flat_buffer read_buffer_;
    std::deque<std::string> outgoing_;
    bool writing_ = false;
    bool closing_ = false;
  };

  // Ticker -----------------------------------------------------------------

  void tick_loop() {
    const auto idle = std::chrono::duration_cast<Session::Clock::duration>(
        std::chrono::duration<double>(config.idle_timeout_s));
    std::unique_lock lock(stop_mutex);
    while (!stop_cv.wait_for(lock, kPollInterval, [&] { return stopping; })) {
      lock.unlock();
      std::vector<std::shared_ptr<Session>> live;
      const auto now = Session::Clock::now();
      {
        std::lock_guard guard(sessions_mutex);
        for (auto it = sessions.begin(); it != sessions.end();) {
          const auto& s = it->second;
          if (!s->connected() && now - s->last_active() > idle) {
            it = sessions.erase(it);
          } else {
            live.push_back(s);
            ++it;
          }
        }
      }
      for (const auto& s : live) s->tick(now);
      lock.lock();
    }
  }
};

// ---------------------------------------------------------------------------

Server::Server(Checkpoint checkpoint, ServiceConfig config)
    : impl_(std::make_unique<Impl>(std::move(checkpoint), std::move(config))) {}

Server::~Server() { stop(); }

unsigned short Server::start() {
  Impl& s = *impl_;
  if (s.running) return s.acceptor.local_endpoint().port();
  const tcp::endpoint endpoint(net::ip::make_address(s.config.host), s.config.port);
  s.acceptor.open(endpoint.protocol());
  s.acceptor.set_option(net::socket_base::reuse_address(true));
  s.acceptor.bind(endpoint);
  s.acceptor.listen();
  s.running = true;
  s.stopping = false;
  s.do_accept();
  s.accept_thread = std::thread([&s] { s.accept_ioc.run(); });
  s.ticker_thread = std::thread([&s] { s.tick_loop(); });
  return s.acceptor.local_endpoint().port();
}

void Server::stop() {
  Impl& s = *impl_;
  if (!s.running) return;
  net::post(s.accept_ioc, [&s] {
    beast::error_code ec;
    s.acceptor.close(ec);
  });
  s.accept_thread.join();
  {
    std::lock_guard lock(s.stop_mutex);
    s.stopping = true;
  }
  s.stop_cv.notify_all();
  s.ticker_thread.join();
  {
    std::lock_guard lock(s.conn_mutex);
    for (auto& c : s.connections) c->interrupt();
    for (auto& c : s.connections) c->thread.join();
    s.connections.clear();
  }
  {
    std::lock_guard lock(s.sessions_mutex);
    s.sessions.clear();
  }
  s.accept_ioc.restart();
  s.running = false;
}

std::shared_ptr<Session> Server::find_session(const std::string& id) const { return impl_->find(id); }

std::size_t Server::session_count() const {
  std::lock_guard lock(impl_->sessions_mutex);
  return impl_->sessions.size();
}

void run_service(const Checkpoint& checkpoint, const ServiceConfig& config) {
  Server server(checkpoint, config);
  const unsigned short port = server.start();
  std::printf("listening on http://%s:%u\n", config.host.c_str(), static_cast<unsigned>(port));
  std::fflush(stdout);
  net::io_context signals_ioc;
  net::signal_set signals(signals_ioc, SIGINT, SIGTERM);
  signals.async_wait([](beast::error_code, int) {});
  signals_ioc.run();
  server.stop();
}

}  // namespace evg
