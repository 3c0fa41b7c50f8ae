#pragma once

// Core telemetry types shared by every module.
//
// Units: seconds, newtons, millimeters.
// Sign convention: negative force is compressive, positive is tensile.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "occlusim/error.hpp"

namespace occlusim {

inline constexpr double kNominalSampleInterval = 0.025;  // 40 Hz
inline constexpr double kRateJitterTolerance = 0.20;

struct TelemetrySample {
  double t = 0.0;             // s
  double force = 0.0;         // N, axial at the sheath/occluder junction
  double displacement = 0.0;  // mm, catheter tip along the insertion axis

  friend bool operator==(const TelemetrySample&, const TelemetrySample&) = default;
};

// Recorded values carry six decimals. A quantized value prints with "%.6f"
// and parses back to the identical double.
inline constexpr double kStorageScale = 1e6;

inline double quantize(double v) {
  return std::round(v * kStorageScale) / kStorageScale + 0.0;  // +0.0 folds -0 into 0
}

inline TelemetrySample quantize(const TelemetrySample& s) {
  return {quantize(s.t), quantize(s.force), quantize(s.displacement)};
}

enum class DeploymentPhase : std::uint8_t {
  Navigation,
  LobeDeployment,
  Repositioning,
  Deployed,
  Detached,
};

enum class EventKind : std::uint8_t {
  LobeOnset,     // E1
  LobeExpanded,  // E2
  DiskExpanded,  // E3
  Detached,      // E4
};

inline constexpr std::array<EventKind, 4> kAllEventKinds = {
    EventKind::LobeOnset, EventKind::LobeExpanded, EventKind::DiskExpanded, EventKind::Detached};

inline constexpr std::string_view to_string(DeploymentPhase phase) {
  switch (phase) {
    case DeploymentPhase::Navigation: return "NAVIGATION";
    case DeploymentPhase::LobeDeployment: return "LOBE_DEPLOYMENT";
    case DeploymentPhase::Repositioning: return "REPOSITIONING";
    case DeploymentPhase::Deployed: return "DEPLOYED";
    case DeploymentPhase::Detached: return "DETACHED";
  }
  return "UNKNOWN";
}

inline constexpr std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::LobeOnset: return "E1_LOBE_ONSET";
    case EventKind::LobeExpanded: return "E2_LOBE_EXPANDED";
    case EventKind::DiskExpanded: return "E3_DISK_EXPANDED";
    case EventKind::Detached: return "E4_DETACHED";
  }
  return "UNKNOWN";
}

inline std::optional<EventKind> parse_event_kind(std::string_view text) {
  for (EventKind kind : kAllEventKinds) {
    if (to_string(kind) == text) return kind;
  }
  return std::nullopt;
}

inline std::optional<DeploymentPhase> parse_phase(std::string_view text) {
  for (auto phase : {DeploymentPhase::Navigation, DeploymentPhase::LobeDeployment,
                     DeploymentPhase::Repositioning, DeploymentPhase::Deployed,
                     DeploymentPhase::Detached}) {
    if (to_string(phase) == text) return phase;
  }
  return std::nullopt;
}

/// Phase entered when an event of `kind` occurs.
inline constexpr DeploymentPhase phase_after(EventKind kind) {
  switch (kind) {
    case EventKind::LobeOnset: return DeploymentPhase::LobeDeployment;
    case EventKind::LobeExpanded: return DeploymentPhase::Repositioning;
    case EventKind::DiskExpanded: return DeploymentPhase::Deployed;
    case EventKind::Detached: return DeploymentPhase::Detached;
  }
  return DeploymentPhase::Navigation;
}

struct PhaseEvent {
  EventKind kind = EventKind::LobeOnset;
  double t = 0.0;
  double displacement = 0.0;
  double force = 0.0;

  friend bool operator==(const PhaseEvent&, const PhaseEvent&) = default;
};

struct RecordMeta {
  std::string trial_id;
  std::uint64_t seed = 0;
  int preset_id = 0;  // 0 = custom spec or external data
  std::string created_at;
  // Flattened spec/config values persisted alongside the trace.
  std::map<std::string, double> parameters;

  friend bool operator==(const RecordMeta&, const RecordMeta&) = default;
};

struct DeploymentRecord {
  RecordMeta meta;
  std::vector<TelemetrySample> samples;
  std::vector<PhaseEvent> truth_events;
  std::vector<PhaseEvent> detected_events;

  friend bool operator==(const DeploymentRecord&, const DeploymentRecord&) = default;
};

enum class ViolationKind : std::uint8_t { NonMonotoneTime, RateJitter, NonFinite };

struct Violation {
  ViolationKind kind;
  std::size_t index;
  std::string message;
};

struct ValidationReport {
  bool ok = true;
  std::vector<Violation> violations;
};

/// Checks the 40 Hz acquisition contract. Violations are reported, never thrown.
inline ValidationReport validate_trace(std::span<const TelemetrySample> samples) {
  ValidationReport report;
  auto add = [&](ViolationKind kind, std::size_t i, std::string what) {
    report.violations.push_back({kind, i, what + " at index " + std::to_string(i)});
  };
  const double lo = kNominalSampleInterval * (1.0 - kRateJitterTolerance);
  const double hi = kNominalSampleInterval * (1.0 + kRateJitterTolerance);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!std::isfinite(s.t) || !std::isfinite(s.force) || !std::isfinite(s.displacement)) {
      add(ViolationKind::NonFinite, i, "non-finite value");
      continue;
    }
    if (i == 0 || !std::isfinite(samples[i - 1].t)) continue;
    const double gap = s.t - samples[i - 1].t;
    if (gap <= 0.0) {
      add(ViolationKind::NonMonotoneTime, i, "non-monotone time");
    } else if (gap < lo - 1e-9 || gap > hi + 1e-9) {
      add(ViolationKind::RateJitter, i, "rate jitter");
    }
  }
  report.ok = report.violations.empty();
  return report;
}

/// Throws UnorderedEvents unless kinds and timestamps are both strictly increasing.
inline void require_ordered(std::span<const PhaseEvent> events) {
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i].kind <= events[i - 1].kind || !(events[i].t > events[i - 1].t)) {
      throw Error(ErrorCode::UnorderedEvents,
                  std::string(to_string(events[i].kind)) + " does not follow " +
                      std::string(to_string(events[i - 1].kind)));
    }
  }
}

/// Phase in force at time t. Intervals are closed on the left.
inline DeploymentPhase phase_at(std::span<const PhaseEvent> events, double t) {
  require_ordered(events);
  DeploymentPhase phase = DeploymentPhase::Navigation;
  for (const auto& e : events) {
    if (t < e.t) break;
    phase = phase_after(e.kind);
  }
  return phase;
}

inline const PhaseEvent* find_event(std::span<const PhaseEvent> events, EventKind kind) {
  for (const auto& e : events) {
    if (e.kind == kind) return &e;
  }
  return nullptr;
}

}  // namespace occlusim
