#include "evg/json_io.hpp"

namespace evg {

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::string name(GestureClass c) { return std::string(class_name(c)); }

}  // namespace

Json to_json(const DetectionEvent& d) {
  return {{"gesture", name(d.gesture)},
          {"probability", d.probability},
          {"t_us", d.window_end},
          {"latency_us", d.wall_latency_us},
          {"compute_us", d.compute_us}};
}

Json to_json(const Proportion& p) {
  return {{"value", optional_number(p.value())},
          {"stderr", optional_number(p.standard_error())},
          {"numerator", p.numerator},
          {"denominator", p.denominator}};
}

Json to_json(const GestureScore& s) {
  return {{"gesture", name(s.gesture)},   {"prompts", s.prompts},
          {"hits", s.hits},               {"failures", s.failures},
          {"timeouts", s.timeouts},       {"false_positives", s.false_positives},
          {"precision", to_json(s.precision)}, {"recall", to_json(s.recall)}};
}

Json to_json(const TrialRecord& r) {
  Json j{{"prompted", name(r.prompted)}, {"outcome", std::string(to_string(r.outcome))}};
  j["observed"] = r.observed ? Json(name(*r.observed)) : Json(nullptr);
  j["latency_us"] = r.latency_us ? Json(*r.latency_us) : Json(nullptr);
  return j;
}

Json to_json(const PromptSlot& s) {
  return {{"gesture", name(s.gesture)},
          {"window_start_us", s.window_start},
          {"window_end_us", s.window_end}};
}

Json to_json(const TrialResult& r) {
  Json records = Json::array(), scores = Json::array(), gaps = Json::array(),
       detections = Json::array(), schedule = Json::array();
  for (const auto& x : r.schedule) schedule.push_back(to_json(x));
  for (const auto& x : r.records) records.push_back(to_json(x));
  for (const auto& x : r.scores) scores.push_back(to_json(x));
  for (auto g : r.gap_detections) gaps.push_back(name(g));
  for (const auto& d : r.detections) detections.push_back(to_json(d));
  return {{"schedule", schedule}, {"records", records}, {"scores", scores},
          {"gap_detections", gaps}, {"detections", detections}};
}

Json to_json(const ConfusionMatrix& m) {
  Json rows = Json::array();
  for (const auto& row : m.counts) rows.push_back(row);
  Json classes = Json::array();
  for (auto c : kAllClasses) classes.push_back(std::string(class_short_name(c)));
  return {{"classes", classes}, {"counts", rows}};
}

Json to_json(const SplitEvaluation& e) {
  Json per_class = Json::array();
  for (const auto& s : precision_recall(e.matrix)) per_class.push_back(to_json(s));
  return {{"accuracy", e.accuracy},
          {"surfaces", e.surfaces},
          {"mean_gesture_loss", e.mean_gesture_loss},
          {"mean_bbox_loss", e.mean_bbox_loss},
          {"matrix", to_json(e.matrix)},
          {"per_class", per_class}};
}

Json to_json(const Distribution& d) {
  return {{"count", d.count}, {"mean", d.mean}, {"p50", d.p50}, {"p95", d.p95}, {"max", d.max}};
}

Json to_json(const BenchReport& b) {
  return {{"repetitions", b.repetitions},
          {"strides_per_run", b.strides_per_run},
          {"total_strides", b.total_strides},
          {"compute_us", to_json(b.compute_us)},
          {"latency_us", to_json(b.latency_us)},
          {"real_time_factor", b.real_time_factor}};
}

Json to_json(const EpochMetrics& m) {
  return {{"epoch", m.epoch},
          {"learning_rate", m.learning_rate},
          {"train_accuracy", m.train_accuracy},
          {"train_gesture_loss", m.train_gesture_loss},
          {"train_bbox_loss", m.train_bbox_loss},
          {"val_accuracy", m.val_accuracy},
          {"val_gesture_loss", m.val_gesture_loss},
          {"val_bbox_loss", m.val_bbox_loss}};
}

Json model_info(const ModelConfig& config) {
  const Model model(config);
  Json tensors = Json::array();
  for (const auto& s : model.param_shapes()) tensors.push_back({{"name", s.name}, {"shape", s.shape}});
  Json layers = Json::array();
  for (const auto& l : layer_costs(config)) {
    layers.push_back({{"name", l.name}, {"params", l.params}, {"macs", l.macs}});
  }
  Json classes = Json::array();
  for (auto c : kAllClasses) classes.push_back(name(c));
  return {{"config", Json::parse(config.to_json())},
          {"param_count", count_params(config)},
          {"flops", flops_estimate(config)},
          {"tensors", tensors},
          {"layers", layers},
          {"classes", classes}};
}

}  // namespace evg
