#include "evg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evg {

namespace {

std::int64_t micros_since(StreamingPipeline::Clock::time_point t) {
  return std::chrono::duration_cast<std::chrono::microseconds>(StreamingPipeline::Clock::now() - t)
      .count();
}

}  // namespace

ThresholdPolicy ThresholdPolicy::uniform(double threshold, Timestamp refractory) {
  ThresholdPolicy p;
  for (GestureClass c : kAllClasses) {
    p.thresholds[index_of(c)] = emittable(c) ? threshold : 1.0;
  }
  p.refractory = refractory;
  return p;
}

void ThresholdPolicy::validate() const {
  for (GestureClass c : kAllClasses) {
    if (!emittable(c)) continue;
    const double t = threshold(c);
    if (!(t > 0.0 && t < 1.0)) {
      throw std::invalid_argument("threshold for " + std::string(class_name(c)) +
                                  " must lie in (0, 1)");
    }
  }
}

void PipelineConfig::validate() const {
  if (!aggregator.valid()) throw std::invalid_argument("aggregator needs 0 < stride <= window");
  policy.validate();
}

Detector::Detector(ThresholdPolicy policy) : policy_(policy) { policy_.validate(); }

std::optional<DetectionEvent> Detector::consider(const ModelOutput& output, Timestamp window_end) {
  const GestureClass c = output.argmax();
  if (!ThresholdPolicy::emittable(c)) return std::nullopt;
  const double p = output.final_probs[index_of(c)];
  if (p < policy_.threshold(c)) return std::nullopt;
  auto& last = last_fire_[index_of(c)];
  if (last && window_end - *last < policy_.refractory) return std::nullopt;
  last = window_end;
  DetectionEvent d;
  d.gesture = c;
  d.probability = p;
  d.window_end = window_end;
  return d;
}

std::vector<DetectionEvent> detect_offline(const Model& model, const ModelParams& params,
                                           const EventStream& stream, const PipelineConfig& config,
                                           Timestamp end) {
  config.validate();
  Detector detector(config.policy);
  std::vector<DetectionEvent> out;
  const auto surfaces = slide(stream, config.aggregator, config.origin, end);
  ForwardCache<float> cache;
  for (const auto& s : surfaces) {
    if (auto d = detector.consider(model.forward(params, s, {}, cache), s.window_end)) {
      out.push_back(*d);
    }
  }
  return out;
}

StreamingPipeline::StreamingPipeline(const Model& model, const ModelParams& params,
                                     PipelineConfig config)
    : model_(model),
      params_(params),
      config_(config),
      detector_(config.policy),
      geometry_(model.config().input),
      next_end_(config.origin + config.aggregator.stride) {
  config_.validate();
  model_.check_params(params_);
}

void StreamingPipeline::push(const Event& e, std::vector<DetectionEvent>& out,
                             Clock::time_point available) {
  const bool malformed = e.x >= geometry_.width || e.y >= geometry_.height || e.p > 1;
  const bool out_of_order = last_t_ && e.t < *last_t_;
  const bool late = watermark_ && e.t <= *watermark_;
  if (malformed || out_of_order || late) {
    ++stats_.events_dropped;
    return;
  }
  close_windows_before(e.t, false, out, available);
  buffer_.push_back(e);
  last_t_ = e.t;
  ++stats_.events_accepted;
}

void StreamingPipeline::push(std::span<const Event> events, std::vector<DetectionEvent>& out,
                             Clock::time_point available) {
  for (const Event& e : events) push(e, out, available);
}

void StreamingPipeline::advance_to(Timestamp t, std::vector<DetectionEvent>& out,
                                   Clock::time_point available) {
  close_windows_before(t, true, out, available);
  if (!watermark_ || t > *watermark_) watermark_ = t;
}

void StreamingPipeline::close_windows_before(Timestamp limit, bool inclusive,
                                             std::vector<DetectionEvent>& out,
                                             Clock::time_point available) {
  auto due = [&] { return inclusive ? next_end_ <= limit : next_end_ < limit; };
  if (!due()) return;
  const Timestamp stride = config_.aggregator.stride;
  if (config_.latest_window_wins) {
    Timestamp last = next_end_;
    std::uint64_t n = 1;
    while (inclusive ? last + stride <= limit : last + stride < limit) {
      last += stride;
      ++n;
    }
    stats_.windows_skipped += n - 1;
    evaluate(last, out, available);
    next_end_ = last + stride;
    return;
  }
  while (due()) {
    evaluate(next_end_, out, available);
    next_end_ += stride;
  }
}

void StreamingPipeline::evaluate(Timestamp window_end, std::vector<DetectionEvent>& out,
                                 Clock::time_point available) {
  const auto start = Clock::now();
  const Timestamp length = config_.aggregator.window_length;
  const Timestamp begin = window_end >= length ? window_end - length : 0;
  while (head_ < buffer_.size() && buffer_[head_].t < begin) ++head_;
  if (head_ > 4096 && 2 * head_ > buffer_.size()) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(head_));
    head_ = 0;
  }
  TimeSurface surface = build_time_surface(std::span<const Event>(buffer_).subspan(head_),
                                           geometry_, window_end, length);
  const ModelOutput output = model_.forward(params_, surface, {}, cache_);
  auto detection = detector_.consider(output, window_end);
  const std::int64_t compute = micros_since(start);
  const std::int64_t latency = micros_since(available);
  compute_us_.push_back(compute);
  latency_us_.push_back(latency);
  ++stats_.windows_processed;
  last_surface_ = std::move(surface);
  if (detection) {
    detection->compute_us = compute;
    detection->wall_latency_us = std::max(latency, compute);
    ++stats_.detections;
    out.push_back(*detection);
  }
}

std::vector<DetectionEvent> run_pipeline(const Model& model, const ModelParams& params,
                                         const EventStream& stream, const PipelineConfig& config,
                                         Timestamp end, PipelineStats* stats) {
  StreamingPipeline pipeline(model, params, config);
  std::vector<DetectionEvent> out;
  for (const Event& e : stream.events) pipeline.push(e, out);
  pipeline.advance_to(end, out);
  if (stats) *stats = pipeline.stats();
  return out;
}

Distribution summarize(std::vector<double> samples) {
  Distribution d;
  d.count = samples.size();
  if (samples.empty()) return d;
  std::sort(samples.begin(), samples.end());
  double sum = 0.0;
  for (double v : samples) sum += v;
  d.mean = sum / static_cast<double>(samples.size());
  // Nearest-rank percentiles.
  auto rank = [&](double q) {
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(samples.size())));
    return samples[std::clamp<std::size_t>(k, 1, samples.size()) - 1];
  };
  d.p50 = rank(0.50);
  d.p95 = rank(0.95);
  d.max = samples.back();
  return d;
}

BenchReport bench_pipeline(const Model& model, const ModelParams& params, const EventStream& stream,
                           const PipelineConfig& config, int repetitions, Timestamp end) {
  if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  BenchReport report;
  report.repetitions = repetitions;
  std::vector<double> compute, latency;
  for (int r = 0; r < repetitions; ++r) {
    StreamingPipeline pipeline(model, params, config);
    std::vector<DetectionEvent> out;
    for (const Event& e : stream.events) pipeline.push(e, out);
    pipeline.advance_to(end, out);
    report.strides_per_run = pipeline.stats().windows_processed;
    report.total_strides += pipeline.stats().windows_processed;
    for (auto v : pipeline.compute_times()) compute.push_back(static_cast<double>(v));
    for (auto v : pipeline.latencies()) latency.push_back(static_cast<double>(v));
  }
  report.compute_us = summarize(std::move(compute));
  report.latency_us = summarize(std::move(latency));
  // Guard against sub-microsecond means on trivial inputs.
  const double mean = std::max(report.compute_us.mean, 1.0);
  report.real_time_factor = static_cast<double>(config.aggregator.stride) / mean;
  return report;
}

// ---------------------------------------------------------------------------

LivePipeline::LivePipeline(const Model& model, const ModelParams& params, PipelineConfig config,
                           std::size_t channel_capacity)
    : pipeline_(model, params, config),
      capacity_(channel_capacity ? channel_capacity : 1),
      worker_([this] { run(); }) {}

LivePipeline::~LivePipeline() { close(); }

bool LivePipeline::submit(Batch batch) {
  std::unique_lock lock(mutex_);
  not_full_.wait(lock, [&] { return channel_.size() < capacity_ || closing_; });
  if (closing_) return false;
  channel_.push_back(std::move(batch));
  not_empty_.notify_one();
  return true;
}

void LivePipeline::set_listener(Listener listener) {
  std::lock_guard lock(mutex_);
  listener_ = std::move(listener);
}

void LivePipeline::set_progress_listener(ProgressListener listener) {
  std::lock_guard lock(mutex_);
  progress_ = std::move(listener);
}

std::shared_ptr<DropOldestQueue<DetectionEvent>> LivePipeline::subscribe(std::size_t capacity) {
  auto q = std::make_shared<DropOldestQueue<DetectionEvent>>(capacity);
  std::lock_guard lock(mutex_);
  subscribers_.push_back(q);
  return q;
}

void LivePipeline::flush() {
  std::unique_lock lock(mutex_);
  idle_.wait(lock, [&] { return (channel_.empty() && !busy_) || !worker_.joinable(); });
}

void LivePipeline::close() {
  {
    std::lock_guard lock(mutex_);
    if (closing_ && !worker_.joinable()) return;
    closing_ = true;
  }
  not_empty_.notify_all();
  not_full_.notify_all();
  if (worker_.joinable()) worker_.join();
  std::lock_guard lock(mutex_);
  for (auto& w : subscribers_) {
    if (auto q = w.lock()) q->close();
  }
  idle_.notify_all();
}

PipelineStats LivePipeline::stats() const {
  std::lock_guard lock(pipeline_mutex_);
  return pipeline_.stats();
}

std::vector<std::int64_t> LivePipeline::compute_times() const {
  std::lock_guard lock(pipeline_mutex_);
  return pipeline_.compute_times();
}

std::optional<TimeSurface> LivePipeline::last_surface() const {
  std::lock_guard lock(pipeline_mutex_);
  return pipeline_.last_surface();
}

void LivePipeline::run() {
  std::vector<DetectionEvent> out;
  for (;;) {
    Batch batch;
    {
      std::unique_lock lock(mutex_);
      not_empty_.wait(lock, [&] { return !channel_.empty() || closing_; });
      if (channel_.empty()) break;  // closing and drained
      batch = std::move(channel_.front());
      channel_.pop_front();
      busy_ = true;
    }
    not_full_.notify_one();

    out.clear();
    std::optional<Timestamp> watermark;
    {
      std::lock_guard lock(pipeline_mutex_);
      pipeline_.push(batch.events, out, batch.submitted);
      if (batch.advance_to) pipeline_.advance_to(*batch.advance_to, out, batch.submitted);
      watermark = pipeline_.watermark();
    }

    Listener listener;
    ProgressListener progress;
    std::vector<std::shared_ptr<DropOldestQueue<DetectionEvent>>> targets;
    {
      std::lock_guard lock(mutex_);
      listener = listener_;
      progress = progress_;
      for (auto& w : subscribers_) {
        if (auto q = w.lock()) targets.push_back(std::move(q));
      }
    }
    for (const auto& d : out) {
      if (listener) listener(d);
      for (auto& q : targets) q->push(d);
    }
    if (progress) progress(watermark);
    {
      std::lock_guard lock(mutex_);
      busy_ = false;
    }
    idle_.notify_all();
  }
}

}  // namespace evg
