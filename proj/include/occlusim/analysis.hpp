#pragma once

// Offline pipeline: detect events on a recorded trace, attach the detach
// mark, compute metrics.

#include <string>
#include <vector>

#include <json.hpp>

#include "occlusim/detector.hpp"
#include "occlusim/metrics.hpp"
#include "occlusim/store.hpp"

namespace occlusim {

/// Detected E1-E3 plus E4. The detach mark is taken from the record (truth
/// first, then previously detected) and falls back to the last sample.
inline std::vector<PhaseEvent> detect_with_detach(const DeploymentRecord& record,
                                                  const DetectorConfig& cfg = {}) {
  auto events = detect_offline(record.samples, cfg);
  if (record.samples.empty()) return events;
  PhaseEvent detach;
  if (const auto* e = detach_event(record)) {
    detach = *e;
  } else {
    const auto& last = record.samples.back();
    detach = {EventKind::Detached, last.t, last.displacement, last.force};
  }
  // A detection annotated at or after the detach mark cannot precede it.
  while (!events.empty() && events.back().t >= detach.t) events.pop_back();
  events.push_back(detach);
  return events;
}

struct AnalyzedTrial {
  DeploymentRecord record;  // detected_events replaced by this analysis
  TrialMetrics metrics;
};

inline AnalyzedTrial analyze_record(DeploymentRecord record, const DetectorConfig& cfg = {}) {
  record.detected_events = detect_with_detach(record, cfg);
  AnalyzedTrial out{std::move(record), {}};
  out.metrics = trial_metrics(out.record);
  return out;
}

inline nlohmann::json to_json(const TrialMetrics& m) {
  return {{"duration_s", m.duration_s},
          {"min_force_N", m.min_force_N},
          {"max_force_N", m.max_force_N},
          {"final_force_N", m.final_force_N}};
}

inline nlohmann::json to_json(const AggregateMetrics& a) {
  auto summary = [](const Summary& s) { return nlohmann::json{{"mean", s.mean}, {"std", s.std}}; };
  return {{"n", a.n},
          {"duration_s", summary(a.duration_s)},
          {"min_force_N", summary(a.min_force_N)},
          {"max_force_N", summary(a.max_force_N)},
          {"final_force_N", summary(a.final_force_N)},
          {"most_compressive_N", a.most_compressive_N},
          {"most_tensile_N", a.most_tensile_N}};
}

inline nlohmann::json summary_json(const std::vector<AnalyzedTrial>& trials, const AggregateMetrics& agg) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& t : trials) {
    nlohmann::json row = to_json(t.metrics);
    row["trial_id"] = t.record.meta.trial_id;
    row["preset_id"] = t.record.meta.preset_id;
    row["events"] = nlohmann::json::array();
    for (const auto& e : t.record.detected_events) row["events"].push_back(to_json(e));
    rows.push_back(row);
  }
  return {{"trials", rows}, {"aggregate", to_json(agg)}};
}

}  // namespace occlusim
