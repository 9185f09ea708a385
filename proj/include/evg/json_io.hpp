#pragma once

#include "evg/eval.hpp"
#include "evg/model.hpp"
#include "evg/pipeline.hpp"
#include "evg/protocol.hpp"
#include "evg/train.hpp"
#include "json.hpp"

namespace evg {

// JSON views of reports, shared by the CLI and the service. An undefined
// proportion serializes as null.

using Json = nlohmann::json;

Json to_json(const DetectionEvent& d);
Json to_json(const Proportion& p);
Json to_json(const GestureScore& s);
Json to_json(const TrialRecord& r);
Json to_json(const PromptSlot& s);
/// {records, scores, gap_detections, detections}
Json to_json(const TrialResult& r);
Json to_json(const ConfusionMatrix& m);
Json to_json(const SplitEvaluation& e);
Json to_json(const Distribution& d);
Json to_json(const BenchReport& b);
Json to_json(const EpochMetrics& m);

/// Name, parameter counts, FLOPs, per-tensor shapes and class list.
Json model_info(const ModelConfig& config);

}  // namespace evg
