#pragma once

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "evg/model.hpp"
#include "evg/representation.hpp"

namespace evg {

/// Per-class firing thresholds plus same-class refractory suppression.
/// no_hand and hand_unknown are never emitted.
struct ThresholdPolicy {
  std::array<double, kNumClasses> thresholds{1.0, 1.0, 0.7, 0.7, 0.7, 0.7, 0.7};
  Timestamp refractory = 500'000;

  static ThresholdPolicy uniform(double threshold, Timestamp refractory = 500'000);
  static bool emittable(GestureClass c) noexcept {
    return c != GestureClass::kNoHand && c != GestureClass::kHandUnknown;
  }
  double threshold(GestureClass c) const noexcept { return thresholds[index_of(c)]; }
  /// Throws std::invalid_argument unless every gesture threshold is in (0, 1).
  void validate() const;
};

struct DetectionEvent {
  GestureClass gesture = GestureClass::kSwipeLeft;
  double probability = 0.0;
  Timestamp window_end = 0;    // t_L, stream time
  std::int64_t compute_us = 0;  // surface + forward for this window
  std::int64_t wall_latency_us = 0;  // window-close availability to emission

  /// Equality on the stream-time fields only.
  bool same_detection(const DetectionEvent& o) const noexcept {
    return gesture == o.gesture && probability == o.probability && window_end == o.window_end;
  }
};

struct PipelineConfig {
  AggregatorConfig aggregator;
  ThresholdPolicy policy;
  /// Stream time of the first window start; windows end at origin + k * stride.
  Timestamp origin = 0;
  /// Live mode: when several windows are due at once only the newest is
  /// evaluated and the rest are counted as skipped.
  bool latest_window_wins = false;

  void validate() const;
};

/// Argmax + threshold + refractory gate applied to successive model outputs.
class Detector {
 public:
  explicit Detector(ThresholdPolicy policy);
  std::optional<DetectionEvent> consider(const ModelOutput& output, Timestamp window_end);
  const ThresholdPolicy& policy() const noexcept { return policy_; }

 private:
  ThresholdPolicy policy_;
  std::array<std::optional<Timestamp>, kNumClasses> last_fire_{};
};

/// Offline reference: slide() over the whole stream, then the detector.
std::vector<DetectionEvent> detect_offline(const Model& model, const ModelParams& params,
                                           const EventStream& stream, const PipelineConfig& config,
                                           Timestamp end);

struct PipelineStats {
  std::uint64_t events_accepted = 0;
  std::uint64_t events_dropped = 0;  // malformed, out of order, or late
  std::uint64_t windows_processed = 0;
  std::uint64_t windows_skipped = 0;
  std::uint64_t detections = 0;
};

/// Incremental sliding-window inference over an event feed. Not thread-safe;
/// one owner pushes events and advances time.
class StreamingPipeline {
 public:
  using Clock = std::chrono::steady_clock;

  StreamingPipeline(const Model& model, const ModelParams& params, PipelineConfig config);

  /// Accepts one event. Windows ending strictly before its timestamp are
  /// closed and evaluated; detections are appended to `out`.
  void push(const Event& e, std::vector<DetectionEvent>& out,
            Clock::time_point available = Clock::now());
  void push(std::span<const Event> events, std::vector<DetectionEvent>& out,
            Clock::time_point available = Clock::now());

  /// Declares that no event with timestamp <= t will follow and evaluates
  /// every window ending at or before t.
  void advance_to(Timestamp t, std::vector<DetectionEvent>& out,
                  Clock::time_point available = Clock::now());

  /// End of the next window to be evaluated.
  Timestamp next_window_end() const noexcept { return next_end_; }
  /// Everything at or before this time has been evaluated.
  std::optional<Timestamp> watermark() const noexcept { return watermark_; }
  const PipelineStats& stats() const noexcept { return stats_; }
  /// Per-window compute time and window-close-to-result latency in
  /// microseconds, in evaluation order.
  const std::vector<std::int64_t>& compute_times() const noexcept { return compute_us_; }
  const std::vector<std::int64_t>& latencies() const noexcept { return latency_us_; }
  /// The last evaluated surface, if any.
  const std::optional<TimeSurface>& last_surface() const noexcept { return last_surface_; }
  const PipelineConfig& config() const noexcept { return config_; }

 private:
  void close_windows_before(Timestamp limit, bool inclusive, std::vector<DetectionEvent>& out,
                            Clock::time_point available);
  void evaluate(Timestamp window_end, std::vector<DetectionEvent>& out, Clock::time_point available);

  const Model& model_;
  const ModelParams& params_;
  PipelineConfig config_;
  Detector detector_;
  SensorGeometry geometry_;
  std::vector<Event> buffer_;
  std::size_t head_ = 0;
  Timestamp next_end_;
  std::optional<Timestamp> last_t_;
  std::optional<Timestamp> watermark_;
  ForwardCache<float> cache_;
  PipelineStats stats_;
  std::vector<std::int64_t> compute_us_, latency_us_;
  std::optional<TimeSurface> last_surface_;
};

/// Runs a whole recorded stream through StreamingPipeline, one event at a
/// time, then advances to `end`.
std::vector<DetectionEvent> run_pipeline(const Model& model, const ModelParams& params,
                                         const EventStream& stream, const PipelineConfig& config,
                                         Timestamp end, PipelineStats* stats = nullptr);

// ---------------------------------------------------------------------------
// Benchmark

struct Distribution {
  std::size_t count = 0;
  double mean = 0, p50 = 0, p95 = 0, max = 0;
};

Distribution summarize(std::vector<double> samples);

struct BenchReport {
  int repetitions = 0;
  std::size_t strides_per_run = 0;
  std::size_t total_strides = 0;
  Distribution compute_us;  // surface build + forward, per stride
  Distribution latency_us;  // window close to emission, per stride
  double real_time_factor = 0.0;  // stride / mean compute time
};

BenchReport bench_pipeline(const Model& model, const ModelParams& params, const EventStream& stream,
                           const PipelineConfig& config, int repetitions, Timestamp end);

// ---------------------------------------------------------------------------
// Threaded live pipeline

/// Bounded drop-oldest queue feeding one subscriber.
template <typename T>
class DropOldestQueue {
 public:
  explicit DropOldestQueue(std::size_t capacity) : capacity_(capacity ? capacity : 1) {}

  void push(T value) {
    {
      std::lock_guard lock(mutex_);
      if (items_.size() == capacity_) {
        items_.pop_front();
        ++dropped_;
      }
      items_.push_back(std::move(value));
    }
    cv_.notify_one();
  }

  /// Waits up to `timeout`; empty on timeout or after close() once drained.
  std::optional<T> pop(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    cv_.wait_for(lock, timeout, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T v = std::move(items_.front());
    items_.pop_front();
    return v;
  }

  void close() {
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    cv_.notify_all();
  }
  bool closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
  }
  std::uint64_t dropped() const {
    std::lock_guard lock(mutex_);
    return dropped_;
  }
  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return items_.size();
  }

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<T> items_;
  std::size_t capacity_;
  std::uint64_t dropped_ = 0;
  bool closed_ = false;
};

/// Producer thread submits event batches through a bounded, ordered channel;
/// a consumer thread owns a StreamingPipeline and fans detections out.
class LivePipeline {
 public:
  struct Batch {
    std::vector<Event> events;
    std::optional<Timestamp> advance_to;
    StreamingPipeline::Clock::time_point submitted = StreamingPipeline::Clock::now();
  };
  using Listener = std::function<void(const DetectionEvent&)>;
  /// Called after each batch with the pipeline watermark.
  using ProgressListener = std::function<void(std::optional<Timestamp>)>;

  LivePipeline(const Model& model, const ModelParams& params, PipelineConfig config,
               std::size_t channel_capacity = 64);
  ~LivePipeline();
  LivePipeline(const LivePipeline&) = delete;
  LivePipeline& operator=(const LivePipeline&) = delete;

  /// Blocks while the channel is full. Returns false after close().
  bool submit(Batch batch);

  /// Synchronous callback run on the consumer thread for every detection;
  /// must be cheap. Register before submitting.
  void set_listener(Listener listener);
  void set_progress_listener(ProgressListener listener);
  std::shared_ptr<DropOldestQueue<DetectionEvent>> subscribe(std::size_t capacity = 256);

  /// Drains the channel, stops the consumer, and closes subscriber queues.
  void close();
  /// Blocks until every batch submitted so far has been processed.
  void flush();

  PipelineStats stats() const;
  std::vector<std::int64_t> compute_times() const;
  std::optional<TimeSurface> last_surface() const;

 private:
  void run();

  StreamingPipeline pipeline_;
  mutable std::mutex pipeline_mutex_;  // guards pipeline_
  mutable std::mutex mutex_;           // guards everything below
  std::condition_variable not_empty_, not_full_, idle_;
  std::deque<Batch> channel_;
  std::size_t capacity_;
  bool closing_ = false;
  bool busy_ = false;
  Listener listener_;
  ProgressListener progress_;
  std::vector<std::weak_ptr<DropOldestQueue<DetectionEvent>>> subscribers_;
  std::thread worker_;
};

}  // namespace evg
