#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "evg/json_io.hpp"
#include "evg/pipeline.hpp"
#include "evg/protocol.hpp"
#include "evg/simulator.hpp"

namespace evg {

// ---------------------------------------------------------------------------
// Pointer-driven hand proxy

struct PointerSample {
  double x = 0.5;  // normalized, clamped to [0, 1]
  double y = 0.5;
  bool pressed = false;
  Timestamp t = 0;  // µs
};

/// Fixed layout of the pointer scene, in units of min(width, height) / 64.
/// The palm sits still at the frame center; the pointer steers the thumb
/// across it and a press pulls the thumb toward the palm top (a pinch).
struct PointerScene {
  double palm_rx = 9.5, palm_ry = 11.5, thumb_r = 3.5;
  double thumb_travel_x = 14.0;  // thumb offset at x = 0 or 1
  double thumb_travel_y = 4.0;
  double thumb_rest_dy = 3.5;
  double pinch_distance = 6.5;
  double pinch_time_s = 0.15;  // time for a full close or open
  bool mirror_x = false;       // camera facing the user flips left and right
  std::uint64_t background_seed = 4242;
};

/// Incremental renderer: each sample extends the scene up to its timestamp
/// (linear pointer interpolation at the simulator rate) and appends events.
class PointerRenderer {
 public:
  PointerRenderer(SensorGeometry geometry, EsimConfig esim, PointerScene scene = {});

  /// Samples with a timestamp earlier than the previous one are ignored.
  void add(PointerSample sample, std::vector<Event>& out);
  HandPose pose(double x, double y, double closure) const;
  bool started() const noexcept { return last_.has_value(); }

 private:
  LogFrame frame_at(Timestamp t, double x, double y, double closure) const;

  SensorGeometry geometry_;
  EsimConfig esim_;
  PointerScene scene_;
  double scale_;
  std::vector<double> background_;
  EventGenerator generator_;
  std::optional<PointerSample> last_;
  Timestamp origin_ = 0;
  std::uint64_t frames_ = 0;  // frames emitted since origin
  double closure_ = 0.0;
};

/// Whole-trace conversion; fewer than two samples yield an empty stream.
EventStream pointer_to_events(const std::vector<PointerSample>& samples, SensorGeometry geometry,
                              const EsimConfig& esim, const PointerScene& scene = {});

// ---------------------------------------------------------------------------
// Interactive trial session

enum class SessionClock {
  kWall,  // session time follows the server clock from the first connection
  kData,  // session time advances only with client-supplied timestamps
};

struct SessionOptions {
  TrialConfig trial;
  SessionClock clock = SessionClock::kWall;
  /// Wall mode: windows close this long after real time passes them, to
  /// absorb network jitter on pointer batches.
  Timestamp wall_slack = 60'000;
  PointerScene pointer;
};

/// A prompt-and-score run against one live pipeline. Thread-safe.
class Session {
 public:
  using Clock = std::chrono::steady_clock;

  Session(std::string id, const Model& model, const ModelParams& params, PipelineConfig pipeline,
          SessionOptions options);
  ~Session();

  const std::string& id() const noexcept { return id_; }
  const SessionOptions& options() const noexcept { return options_; }
  const std::vector<PromptSlot>& schedule() const noexcept { return schedule_; }
  SensorGeometry geometry() const noexcept { return geometry_; }

  /// Wall mode: starts the session clock on first call. No-op otherwise.
  void start(Clock::time_point now = Clock::now());
  bool started() const;

  /// Events in session time.
  void ingest_events(std::vector<Event> events);
  /// Pointer samples in client time; re-based on the first sample.
  void ingest_pointer(const std::vector<PointerSample>& samples);
  /// Data mode: declares session time t reached. Wall mode: ignored.
  void advance_to(Timestamp t);
  /// Wall mode: advances to the current clock minus the slack.
  void tick(Clock::time_point now = Clock::now());
  /// Blocks until everything submitted so far is evaluated.
  void flush();

  /// Prompt and stats messages produced since the last call, oldest first.
  /// These are never dropped.
  std::vector<Json> take_messages();
  /// Detection feed for one client; drop-oldest when the client lags.
  std::shared_ptr<DropOldestQueue<DetectionEvent>> subscribe_detections(std::size_t capacity = 64);
  PipelineStats pipeline_stats() const;

  TrialResult result() const;
  Json report() const;
  bool finished() const;
  Timestamp session_time() const;
  std::optional<TimeSurface> last_surface() const;

  void touch(Clock::time_point now = Clock::now());
  Clock::time_point last_active() const;
  void set_connected(bool connected);
  bool connected() const;

 private:
  void on_detection(const DetectionEvent& d);
  void on_progress(std::optional<Timestamp> watermark);
  /// Emits due prompts and submits an advance; caller holds submit_mutex_.
  void advance_submitted(Timestamp prompt_time, Timestamp advance_time);
  void submit_events(std::vector<Event> events);
  Timestamp wall_time_locked(Clock::time_point now) const;

  std::string id_;
  SensorGeometry geometry_;
  SessionOptions options_;
  std::vector<PromptSlot> schedule_;
  Timestamp end_;
  std::unique_ptr<LivePipeline> pipeline_;
  PointerRenderer renderer_;

  // Lock order: submit_mutex_ before mutex_. The pipeline's listeners take
  // only mutex_, so a blocked submit never deadlocks them.
  std::mutex submit_mutex_;
  mutable std::mutex mutex_;
  std::optional<Clock::time_point> wall_origin_;
  std::optional<std::pair<Timestamp, Timestamp>> client_epoch_;  // client t, session t
  Timestamp submitted_time_ = 0;  // session time declared to the pipeline
  std::optional<Timestamp> processed_;  // pipeline watermark
  std::vector<DetectionEvent> detections_;
  std::size_t prompts_sent_ = 0;
  std::size_t records_reported_ = 0;
  std::vector<Json> outbox_;
  Clock::time_point last_active_;
  bool connected_ = false;
  bool finished_ = false;
};

}  // namespace evg
