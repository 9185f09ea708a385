#include "evg/session.hpp"

#include <algorithm>
#include <cmath>

namespace evg {

// ---------------------------------------------------------------------------
// PointerRenderer

namespace {

std::vector<double> static_background(SensorGeometry geometry, std::uint64_t seed) {
  ScenarioSpec spec;
  spec.label = GestureClass::kNoHand;
  spec.geometry = geometry;
  spec.seed = seed;
  return SceneRenderer(spec).render(0.0).values;
}

}  // namespace

PointerRenderer::PointerRenderer(SensorGeometry geometry, EsimConfig esim, PointerScene scene)
    : geometry_(geometry),
      esim_(esim),
      scene_(scene),
      scale_(std::min(geometry.width, geometry.height) / 64.0),
      background_(static_background(geometry, scene.background_seed)),
      generator_(geometry, esim, scene.background_seed) {}

HandPose PointerRenderer::pose(double x, double y, double closure) const {
  if (scene_.mirror_x) x = 1.0 - x;
  HandPose p;
  p.visible = true;
  p.palm_x = geometry_.width / 2.0;
  p.palm_y = geometry_.height / 2.0;
  p.palm_rx = scene_.palm_rx * scale_;
  p.palm_ry = scene_.palm_ry * scale_;
  p.thumb_r = scene_.thumb_r * scale_;
  p.thumb_x = p.palm_x + (x - 0.5) * 2.0 * scene_.thumb_travel_x * scale_;
  p.thumb_y = p.palm_y + scene_.thumb_rest_dy * scale_ +
              (y - 0.5) * 2.0 * scene_.thumb_travel_y * scale_ -
              scene_.pinch_distance * scale_ * closure;
  return p;
}

LogFrame PointerRenderer::frame_at(Timestamp t, double x, double y, double closure) const {
  LogFrame frame;
  frame.geometry = geometry_;
  frame.values = background_;
  frame.timestamp = t;
  draw_hand(pose(x, y, closure), geometry_, frame.values);
  return frame;
}

void PointerRenderer::add(PointerSample sample, std::vector<Event>& out) {
  sample.x = std::clamp(std::isfinite(sample.x) ? sample.x : 0.5, 0.0, 1.0);
  sample.y = std::clamp(std::isfinite(sample.y) ? sample.y : 0.5, 0.0, 1.0);
  if (!last_) {
    origin_ = sample.t;
    frames_ = 0;
    closure_ = sample.pressed ? 1.0 : 0.0;
    generator_.reset(frame_at(sample.t, sample.x, sample.y, closure_));
    last_ = sample;
    return;
  }
  const PointerSample prev = *last_;
  if (sample.t < prev.t) return;
  const double period_us = 1e6 / esim_.sample_rate;
  const double rate = 1.0 / (scene_.pinch_time_s * 1e6);  // closure per µs
  Timestamp frame_t = origin_ + static_cast<Timestamp>(std::llround(frames_ * period_us));
  for (;;) {
    const Timestamp next_t = origin_ + static_cast<Timestamp>(std::llround((frames_ + 1) * period_us));
    if (next_t > sample.t) break;
    const double span = static_cast<double>(sample.t - prev.t);
    const double u = span > 0 ? static_cast<double>(next_t - prev.t) / span : 1.0;
    const double x = prev.x + (sample.x - prev.x) * u;
    const double y = prev.y + (sample.y - prev.y) * u;
    const double target = prev.pressed ? 1.0 : 0.0;
    const double step = rate * static_cast<double>(next_t - frame_t);
    closure_ = target > closure_ ? std::min(target, closure_ + step) : std::max(target, closure_ - step);
    generator_.add_frame(frame_at(next_t, x, y, closure_), out);
    frame_t = next_t;
    ++frames_;
  }
  last_ = sample;
}

EventStream pointer_to_events(const std::vector<PointerSample>& samples, SensorGeometry geometry,
                              const EsimConfig& esim, const PointerScene& scene) {
  EventStream stream;
  stream.geometry = geometry;
  if (samples.size() < 2) return stream;
  PointerRenderer renderer(geometry, esim, scene);
  for (const auto& s : samples) renderer.add(s, stream.events);
  return stream;
}

// ---------------------------------------------------------------------------
// Session

Session::Session(std::string id, const Model& model, const ModelParams& params,
                 PipelineConfig pipeline, SessionOptions options)
    : id_(std::move(id)),
      geometry_(model.config().input),
      options_(std::move(options)),
      schedule_(make_schedule(options_.trial)),
      end_(schedule_end(schedule_)),
      renderer_(model.config().input, EsimConfig{}, options_.pointer),
      last_active_(Clock::now()) {
  pipeline.origin = 0;
  pipeline.latest_window_wins = options_.clock == SessionClock::kWall;
  pipeline_ = std::make_unique<LivePipeline>(model, params, pipeline);
  pipeline_->set_listener([this](const DetectionEvent& d) { on_detection(d); });
  pipeline_->set_progress_listener([this](std::optional<Timestamp> w) { on_progress(w); });
}

Session::~Session() { pipeline_->close(); }

void Session::start(Clock::time_point now) {
  std::lock_guard lock(mutex_);
  if (options_.clock == SessionClock::kWall && !wall_origin_) wall_origin_ = now;
}

bool Session::started() const {
  std::lock_guard lock(mutex_);
  return options_.clock == SessionClock::kData || wall_origin_.has_value();
}

Timestamp Session::wall_time_locked(Clock::time_point now) const {
  if (!wall_origin_ || now < *wall_origin_) return 0;
  return static_cast<Timestamp>(
      std::chrono::duration_cast<std::chrono::microseconds>(now - *wall_origin_).count());
}

void Session::submit_events(std::vector<Event> events) {
  if (events.empty()) return;
  LivePipeline::Batch batch;
  batch.events = std::move(events);
  pipeline_->submit(std::move(batch));
}

void Session::ingest_events(std::vector<Event> events) {
  std::lock_guard submit(submit_mutex_);
  touch();
  submit_events(std::move(events));
}

void Session::ingest_pointer(const std::vector<PointerSample>& samples) {
  std::lock_guard submit(submit_mutex_);
  const auto now = Clock::now();
  std::vector<Event> events;
  for (PointerSample s : samples) {
    {
      std::lock_guard lock(mutex_);
      last_active_ = now;
      if (options_.clock == SessionClock::kWall) {
        if (!wall_origin_) wall_origin_ = now;
        if (!client_epoch_) client_epoch_ = {s.t, wall_time_locked(now)};
        const auto [client0, session0] = *client_epoch_;
        s.t = s.t >= client0 ? session0 + (s.t - client0) : session0;
      }
    }
    renderer_.add(s, events);
  }
  submit_events(std::move(events));
}

void Session::advance_to(Timestamp t) {
  if (options_.clock != SessionClock::kData) return;
  std::lock_guard submit(submit_mutex_);
  advance_submitted(t, t);
}

void Session::tick(Clock::time_point now) {
  if (options_.clock != SessionClock::kWall) return;
  std::lock_guard submit(submit_mutex_);
  Timestamp t = 0;
  {
    std::lock_guard lock(mutex_);
    if (!wall_origin_) return;
    t = wall_time_locked(now);
  }
  advance_submitted(t, t > options_.wall_slack ? t - options_.wall_slack : 0);
}

void Session::advance_submitted(Timestamp prompt_time, Timestamp advance_time) {
  {
    std::lock_guard lock(mutex_);
    while (prompts_sent_ < schedule_.size() &&
           schedule_[prompts_sent_].window_start <= prompt_time) {
      Json msg = to_json(schedule_[prompts_sent_]);
      msg["type"] = "prompt";
      msg["index"] = prompts_sent_;
      msg["total"] = schedule_.size();
      msg["window_s"] = options_.trial.window_s;
      outbox_.push_back(std::move(msg));
      ++prompts_sent_;
    }
    advance_time = std::min(advance_time, end_);
    if (advance_time <= submitted_time_) return;
    submitted_time_ = advance_time;
  }
  LivePipeline::Batch batch;
  batch.advance_to = advance_time;
  pipeline_->submit(std::move(batch));
}

void Session::flush() { pipeline_->flush(); }

void Session::on_detection(const DetectionEvent& d) {
  std::lock_guard lock(mutex_);
  detections_.push_back(d);
}

void Session::on_progress(std::optional<Timestamp> watermark) {
  std::lock_guard lock(mutex_);
  if (!watermark) return;
  processed_ = watermark;
  const TrialResult r = score_trial(schedule_, detections_, options_.trial.gestures, *watermark);
  const bool done = *watermark >= end_;
  if (r.records.size() == records_reported_ && done == finished_) return;
  records_reported_ = r.records.size();
  finished_ = done;
  Json scores = Json::array();
  for (const auto& s : r.scores) scores.push_back(to_json(s));
  outbox_.push_back({{"type", "stats"},
                     {"records", r.records.size()},
                     {"total", schedule_.size()},
                     {"finished", finished_},
                     {"last", r.records.empty() ? Json(nullptr) : to_json(r.records.back())},
                     {"scores", scores}});
}

std::vector<Json> Session::take_messages() {
  std::lock_guard lock(mutex_);
  std::vector<Json> out;
  out.swap(outbox_);
  return out;
}

std::shared_ptr<DropOldestQueue<DetectionEvent>> Session::subscribe_detections(std::size_t capacity) {
  return pipeline_->subscribe(capacity);
}

PipelineStats Session::pipeline_stats() const { return pipeline_->stats(); }

TrialResult Session::result() const {
  std::lock_guard lock(mutex_);
  return score_trial(schedule_, detections_, options_.trial.gestures, processed_.value_or(0));
}

Json Session::report() const {
  const TrialResult r = result();
  Json j = to_json(r);
  Json gestures = Json::array();
  for (auto g : options_.trial.gestures) gestures.push_back(std::string(class_name(g)));
  const PipelineStats stats = pipeline_stats();
  j["id"] = id_;
  j["clock"] = options_.clock == SessionClock::kWall ? "wall" : "data";
  j["finished"] = finished();
  j["session_time_us"] = session_time();
  j["trial"] = {{"gestures", gestures},
                {"repetitions", options_.trial.repetitions},
                {"gap_s", options_.trial.gap_s},
                {"window_s", options_.trial.window_s},
                {"seed", options_.trial.seed}};
  j["pipeline"] = {{"events_accepted", stats.events_accepted},
                   {"events_dropped", stats.events_dropped},
                   {"windows_processed", stats.windows_processed},
                   {"windows_skipped", stats.windows_skipped},
                   {"detections", stats.detections}};
  return j;
}

bool Session::finished() const {
  std::lock_guard lock(mutex_);
  return finished_;
}

Timestamp Session::session_time() const {
  std::lock_guard lock(mutex_);
  return options_.clock == SessionClock::kData ? submitted_time_ : wall_time_locked(Clock::now());
}

std::optional<TimeSurface> Session::last_surface() const { return pipeline_->last_surface(); }

void Session::touch(Clock::time_point now) {
  std::lock_guard lock(mutex_);
  last_active_ = now;
}

Session::Clock::time_point Session::last_active() const {
  std::lock_guard lock(mutex_);
  return last_active_;
}

void Session::set_connected(bool connected) {
  std::lock_guard lock(mutex_);
  connected_ = connected;
  last_active_ = Clock::now();
}

bool Session::connected() const {
  std::lock_guard lock(mutex_);
  return connected_;
}

}  // namespace evg
