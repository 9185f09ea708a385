#include "evg/eval.hpp"

#include <cmath>

namespace evg {

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t n = 0;
  for (const auto& row : counts) {
    for (auto v : row) n += v;
  }
  return n;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t n = 0;
  for (int i = 0; i < kNumClasses; ++i) n += counts[i][i];
  return n;
}

std::uint64_t ConfusionMatrix::row_sum(GestureClass truth) const {
  std::uint64_t n = 0;
  for (auto v : counts[index_of(truth)]) n += v;
  return n;
}

double ConfusionMatrix::accuracy() const {
  const auto n = total();
  return n ? static_cast<double>(trace()) / static_cast<double>(n) : 0.0;
}

SplitEvaluation evaluate_surfaces(const Model& model, const ModelParams& params,
                                  const std::vector<LabeledSurface>& surfaces) {
  SplitEvaluation ev;
  ForwardCache<float> cache;
  double gesture_sum = 0.0, bbox_sum = 0.0;
  std::size_t hands = 0;
  for (const auto& s : surfaces) {
    const ModelOutput out = model.forward(params, s.surface, {}, cache);
    const LossBreakdown loss = compute_loss(out, s.target, 1.0);
    gesture_sum += loss.gesture;
    if (s.target.label != GestureClass::kNoHand) {
      bbox_sum += loss.bbox;
      ++hands;
    }
    ev.matrix.add(s.target.label, out.argmax());
  }
  ev.surfaces = surfaces.size();
  ev.accuracy = ev.matrix.accuracy();
  ev.mean_gesture_loss = surfaces.empty() ? 0.0 : gesture_sum / static_cast<double>(surfaces.size());
  ev.mean_bbox_loss = hands ? bbox_sum / static_cast<double>(hands) : 0.0;
  return ev;
}

SplitEvaluation evaluate_split(const ModelParams& params, const ModelConfig& config,
                               const DatasetManifest& manifest, Split split,
                               const AggregatorConfig& aggregator) {
  const Model model(config);
  model.check_params(params);
  return evaluate_surfaces(model, params, extract_surfaces(manifest, split, aggregator));
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::kHit: return "hit";
    case Outcome::kFailure: return "failure";
    case Outcome::kTimeout: return "timeout";
  }
  return "unknown";
}

std::optional<double> Proportion::value() const {
  if (denominator == 0) return std::nullopt;
  return static_cast<double>(numerator) / static_cast<double>(denominator);
}

std::optional<double> Proportion::standard_error() const {
  const auto p = value();
  if (!p) return std::nullopt;
  return std::sqrt(*p * (1.0 - *p) / static_cast<double>(denominator));
}

std::vector<GestureScore> precision_recall(const std::vector<TrialRecord>& records,
                                           const std::vector<GestureClass>& gestures,
                                           const std::vector<GestureClass>& gap_detections) {
  std::vector<GestureScore> scores;
  for (GestureClass g : gestures) {
    GestureScore s;
    s.gesture = g;
    for (const auto& r : records) {
      if (r.prompted == g) {
        ++s.prompts;
        if (r.outcome == Outcome::kHit) ++s.hits;
        if (r.outcome == Outcome::kFailure) ++s.failures;
        if (r.outcome == Outcome::kTimeout) ++s.timeouts;
      } else if (r.observed == g) {
        ++s.false_positives;
      }
    }
    for (GestureClass d : gap_detections) {
      if (d == g) ++s.false_positives;
    }
    s.recall = {s.hits, s.prompts};
    s.precision = {s.hits, s.hits + s.false_positives};
    scores.push_back(s);
  }
  return scores;
}

std::vector<GestureScore> precision_recall(const ConfusionMatrix& matrix) {
  std::vector<GestureScore> scores;
  for (GestureClass g : kAllClasses) {
    const int i = index_of(g);
    GestureScore s;
    s.gesture = g;
    s.prompts = matrix.row_sum(g);
    s.hits = matrix.counts[i][i];
    s.failures = s.prompts - s.hits;
    std::uint64_t column = 0;
    for (int r = 0; r < kNumClasses; ++r) column += matrix.counts[r][i];
    s.false_positives = column - s.hits;
    s.recall = {s.hits, s.prompts};
    s.precision = {s.hits, column};
    scores.push_back(s);
  }
  return scores;
}

}  // namespace evg
