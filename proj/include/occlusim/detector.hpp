#pragma once

// Causal streaming segmentation of a force stream into deployment events.
//
//  E1  smoothed force stays at or below the onset threshold for a debounce
//      run; annotated at the first sample of the run.
//  E2  after E1, the smoothed force rebounds by at least rebound1 above its
//      running minimum, peaks, and then drops by peak_confirm below the peak.
//  E3  the same rebound rule, re-anchored after E2 with rebound2.
//
// E2/E3 are annotated at the midpoint of the contiguous band of samples
// within peak_band of the confirmed peak, and carry the peak value. With
// peak_band = 0 the annotation is the argmax sample. E4 is never inferred
// here; it comes from the operator's detach command.
//
// Smoothing is a trailing moving average whose value is attributed to the
// window's centre sample, so a linear ramp is annotated without lag.

#include <cmath>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "occlusim/error.hpp"
#include "occlusim/telemetry.hpp"

namespace occlusim {

struct DetectorConfig {
  int smoothing_window_samples = 13;
  double onset_threshold_N = -1.0;
  int onset_debounce_samples = 8;
  double rebound1_delta_N = 1.5;
  double rebound2_delta_N = 0.6;
  double peak_confirm_drop_N = 0.2;
  double peak_band_N = 0.12;

  friend bool operator==(const DetectorConfig&, const DetectorConfig&) = default;
};

inline void validate(const DetectorConfig& cfg) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (cfg.smoothing_window_samples < 1) fail("smoothing window must be >= 1");
  if (cfg.onset_debounce_samples < 1) fail("onset debounce must be >= 1");
  if (!(cfg.onset_threshold_N < 0.0)) fail("onset threshold must be < 0");
  if (!(cfg.rebound1_delta_N > cfg.rebound2_delta_N && cfg.rebound2_delta_N > cfg.peak_confirm_drop_N &&
        cfg.peak_confirm_drop_N > 0.0))
    fail("require rebound1 > rebound2 > peak_confirm > 0");
  if (!(cfg.peak_band_N >= 0.0 && cfg.peak_band_N <= cfg.peak_confirm_drop_N))
    fail("require 0 <= peak_band <= peak_confirm");
}

struct SmoothedPoint {
  double t = 0.0;
  double displacement = 0.0;
  double force = 0.0;  // smoothed

  friend bool operator==(const SmoothedPoint&, const SmoothedPoint&) = default;
};

struct DetectorState {
  enum class Stage : std::uint8_t { AwaitOnset, LobeRebound, DiskRebound, Done };

  Stage stage = Stage::AwaitOnset;
  std::optional<double> last_t;
  std::deque<TelemetrySample> window;  // last `smoothing_window_samples` raw samples

  int onset_run = 0;
  SmoothedPoint onset_start;

  double running_min = 0.0;
  bool armed = false;
  double peak = 0.0;
  // Samples since arming, pruned to start at the left edge of the band
  // around the current peak.
  std::vector<SmoothedPoint> candidates;
  std::size_t peak_index = 0;

  std::vector<PhaseEvent> emitted;

  friend bool operator==(const DetectorState&, const DetectorState&) = default;
};

struct PushResult {
  DetectorState state;
  std::optional<PhaseEvent> event;
};

namespace detail {

inline std::optional<PhaseEvent> push_in_place(DetectorState& st, const DetectorConfig& cfg,
                                               const TelemetrySample& sample) {
  if (st.last_t && !(sample.t > *st.last_t))
    throw Error(ErrorCode::OutOfOrderSample, "sample at t=" + std::to_string(sample.t) +
                                                 " does not follow t=" + std::to_string(*st.last_t));
  st.last_t = sample.t;

  const auto width = static_cast<std::size_t>(cfg.smoothing_window_samples);
  st.window.push_back(sample);
  if (st.window.size() > width) st.window.pop_front();
  if (st.window.size() < width || st.stage == DetectorState::Stage::Done) return std::nullopt;

  double sum = 0.0;
  for (const auto& s : st.window) sum += s.force;
  const auto& centre = st.window[(width - 1) / 2];
  const SmoothedPoint point{centre.t, centre.displacement, sum / static_cast<double>(width)};

  using Stage = DetectorState::Stage;
  if (st.stage == Stage::AwaitOnset) {
    if (point.force <= cfg.onset_threshold_N) {
      if (st.onset_run == 0) st.onset_start = point;
      if (++st.onset_run >= cfg.onset_debounce_samples) {
        PhaseEvent e{EventKind::LobeOnset, st.onset_start.t, st.onset_start.displacement,
                     st.onset_start.force};
        st.emitted.push_back(e);
        st.stage = Stage::LobeRebound;
        st.running_min = point.force;
        st.armed = false;
        return e;
      }
    } else {
      st.onset_run = 0;
    }
    return std::nullopt;
  }

  const double rebound =
      st.stage == Stage::LobeRebound ? cfg.rebound1_delta_N : cfg.rebound2_delta_N;
  if (!st.armed) {
    st.running_min = std::min(st.running_min, point.force);
    if (point.force >= st.running_min + rebound) {
      st.armed = true;
      st.peak = point.force;
      st.candidates.assign(1, point);
      st.peak_index = 0;
    }
    return std::nullopt;
  }

  st.candidates.push_back(point);
  if (point.force > st.peak) {
    st.peak = point.force;
    // Everything left of the last sub-band sample can never rejoin the band:
    // the band floor only rises.
    std::size_t left = st.candidates.size() - 1;
    while (left > 0 && st.candidates[left - 1].force >= st.peak - cfg.peak_band_N) --left;
    if (left > 0) st.candidates.erase(st.candidates.begin(), st.candidates.begin() + static_cast<std::ptrdiff_t>(left - 1));
    st.peak_index = st.candidates.size() - 1;
    return std::nullopt;
  }
  if (point.force > st.peak - cfg.peak_confirm_drop_N) return std::nullopt;

  std::size_t lo = st.peak_index;
  while (lo > 0 && st.candidates[lo - 1].force >= st.peak - cfg.peak_band_N) --lo;
  std::size_t hi = st.peak_index;
  while (hi + 1 < st.candidates.size() && st.candidates[hi + 1].force >= st.peak - cfg.peak_band_N)
    ++hi;
  const auto& mark = st.candidates[(lo + hi) / 2];
  PhaseEvent e{st.stage == Stage::LobeRebound ? EventKind::LobeExpanded : EventKind::DiskExpanded,
               mark.t, mark.displacement, st.peak};
  st.emitted.push_back(e);
  st.stage = st.stage == Stage::LobeRebound ? Stage::DiskRebound : Stage::Done;
  st.armed = false;
  st.running_min = point.force;
  st.candidates.clear();
  st.peak_index = 0;
  return e;
}

}  // namespace detail

/// One detector step. Pure: the input state is not modified.
inline PushResult push(const DetectorState& state, const DetectorConfig& cfg,
                       const TelemetrySample& sample) {
  validate(cfg);
  PushResult out{state, std::nullopt};
  out.event = detail::push_in_place(out.state, cfg, sample);
  return out;
}

/// Owning streaming wrapper for long-lived streams (session service).
class PhaseDetector {
 public:
  explicit PhaseDetector(DetectorConfig cfg = {}) : cfg_((validate(cfg), cfg)) {}

  std::optional<PhaseEvent> push(const TelemetrySample& sample) {
    return detail::push_in_place(state_, cfg_, sample);
  }

  const DetectorState& state() const { return state_; }
  const std::vector<PhaseEvent>& events() const { return state_.emitted; }
  const DetectorConfig& config() const { return cfg_; }
  void reset() { state_ = {}; }

 private:
  DetectorConfig cfg_;
  DetectorState state_;
};

/// Batch form: identical to folding `push` over the samples.
inline std::vector<PhaseEvent> detect_offline(std::span<const TelemetrySample> samples,
                                              const DetectorConfig& cfg = {}) {
  validate(cfg);
  const auto report = validate_trace(samples);
  if (!report.ok) throw Error(ErrorCode::InvalidTrace, report.violations.front().message);
  PhaseDetector detector(cfg);
  for (const auto& s : samples) detector.push(s);
  return detector.events();
}

}  // namespace occlusim
