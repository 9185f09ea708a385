#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "evg/model.hpp"
#include "evg/simulator.hpp"
#include "evg/train.hpp"

namespace evg {

/// Rows are true classes, columns predicted classes, canonical class order.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> counts{};

  void add(GestureClass truth, GestureClass predicted) {
    ++counts[index_of(truth)][index_of(predicted)];
  }
  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_sum(GestureClass truth) const;
  /// trace / total; 0 for an empty matrix.
  double accuracy() const;
  bool operator==(const ConfusionMatrix&) const = default;
};

struct SplitEvaluation {
  ConfusionMatrix matrix;
  double accuracy = 0.0;
  double mean_gesture_loss = 0.0;
  double mean_bbox_loss = 0.0;  // over hand-present surfaces
  std::size_t surfaces = 0;
};

SplitEvaluation evaluate_surfaces(const Model& model, const ModelParams& params,
                                  const std::vector<LabeledSurface>& surfaces);

SplitEvaluation evaluate_split(const ModelParams& params, const ModelConfig& config,
                               const DatasetManifest& manifest, Split split,
                               const AggregatorConfig& aggregator);

// ---------------------------------------------------------------------------
// Precision / recall

enum class Outcome { kHit, kFailure, kTimeout };

std::string_view to_string(Outcome o);

struct TrialRecord {
  GestureClass prompted = GestureClass::kSwipeLeft;
  Outcome outcome = Outcome::kTimeout;
  /// Class of the first detection in the window (hit or failure).
  std::optional<GestureClass> observed;
  /// Detection t_L minus window start, for hits.
  std::optional<Timestamp> latency_us;
  bool operator==(const TrialRecord&) const = default;
};

/// A binomial proportion with its standard error sqrt(p(1-p)/n).
/// Absent when the denominator is zero.
struct Proportion {
  std::uint64_t numerator = 0;
  std::uint64_t denominator = 0;

  std::optional<double> value() const;
  std::optional<double> standard_error() const;
  bool operator==(const Proportion&) const = default;
};

struct GestureScore {
  GestureClass gesture = GestureClass::kSwipeLeft;
  std::uint64_t prompts = 0, hits = 0, failures = 0, timeouts = 0;
  /// Emissions of this class that did not answer a prompt for it: wrong
  /// answers in other windows plus detections during gaps.
  std::uint64_t false_positives = 0;
  Proportion precision;
  Proportion recall;
  bool operator==(const GestureScore&) const = default;
};

/// recall(g) = hits / prompts; precision(g) = hits / (hits + false positives).
/// `gap_detections` lists classes detected outside every response window.
std::vector<GestureScore> precision_recall(const std::vector<TrialRecord>& records,
                                           const std::vector<GestureClass>& gestures,
                                           const std::vector<GestureClass>& gap_detections = {});

/// Per-class precision and recall read off a confusion matrix.
std::vector<GestureScore> precision_recall(const ConfusionMatrix& matrix);

}  // namespace evg
