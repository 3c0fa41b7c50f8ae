#pragma once

// Per-trial deployment metrics and cohort aggregates.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "occlusim/error.hpp"
#include "occlusim/telemetry.hpp"

namespace occlusim {

inline constexpr double kFinalWindowS = 0.5;

struct TrialMetrics {
  double duration_s = 0.0;
  double min_force_N = 0.0;
  double max_force_N = 0.0;
  double final_force_N = 0.0;

  friend bool operator==(const TrialMetrics&, const TrialMetrics&) = default;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // population (divide by n)

  friend bool operator==(const Summary&, const Summary&) = default;
};

struct AggregateMetrics {
  std::size_t n = 0;
  Summary duration_s;
  Summary min_force_N;
  Summary max_force_N;
  Summary final_force_N;
  double most_compressive_N = 0.0;  // smallest per-trial minimum
  double most_tensile_N = 0.0;      // largest per-trial maximum

  friend bool operator==(const AggregateMetrics&, const AggregateMetrics&) = default;
};

/// Detach mark used for metrics: ground truth when present, else detected.
inline const PhaseEvent* detach_event(const DeploymentRecord& record) {
  if (const auto* e = find_event(record.truth_events, EventKind::Detached)) return e;
  return find_event(record.detected_events, EventKind::Detached);
}

/// Index of the sample at which sheath retraction begins: the last sample of
/// the first displacement maximum within [0, end].
inline std::size_t retraction_start_index(std::span<const TelemetrySample> samples, std::size_t end) {
  std::size_t first_max = 0;
  for (std::size_t i = 1; i <= end; ++i)
    if (samples[i].displacement > samples[first_max].displacement) first_max = i;
  std::size_t i = first_max;
  while (i + 1 <= end && samples[i + 1].displacement == samples[first_max].displacement) ++i;
  return i + 1 > end ? first_max : i;
}

inline TrialMetrics trial_metrics(const DeploymentRecord& record) {
  const PhaseEvent* detach = detach_event(record);
  if (detach == nullptr) throw Error(ErrorCode::IncompleteTrial, "record has no E4 (detach) event");
  const auto& samples = record.samples;
  if (samples.empty() || samples.front().t > detach->t)
    throw Error(ErrorCode::IncompleteTrial, "no samples before detach");

  std::size_t end = 0;
  while (end + 1 < samples.size() && samples[end + 1].t <= detach->t) ++end;
  const std::size_t start = retraction_start_index(samples, end);

  TrialMetrics m;
  m.duration_s = detach->t - samples[start].t;
  m.min_force_N = std::numeric_limits<double>::infinity();
  m.max_force_N = -std::numeric_limits<double>::infinity();
  double window_sum = 0.0;
  std::size_t window_n = 0;
  for (std::size_t i = start; i <= end; ++i) {
    m.min_force_N = std::min(m.min_force_N, samples[i].force);
    m.max_force_N = std::max(m.max_force_N, samples[i].force);
    if (samples[i].t >= detach->t - kFinalWindowS - 1e-9) {
      window_sum += samples[i].force;
      ++window_n;
    }
  }
  if (window_n == 0) throw Error(ErrorCode::EmptyWindow, "no samples in the final window before detach");
  m.final_force_N = window_sum / static_cast<double>(window_n);
  return m;
}

namespace detail {
inline Summary summarize(std::span<const TrialMetrics> trials, double TrialMetrics::*field) {
  const double n = static_cast<double>(trials.size());
  double sum = 0.0;
  for (const auto& t : trials) sum += t.*field;
  const double mean = sum / n;
  double ss = 0.0;
  for (const auto& t : trials) ss += (t.*field - mean) * (t.*field - mean);
  return {mean, std::sqrt(ss / n)};
}
}  // namespace detail

inline AggregateMetrics aggregate(std::span<const TrialMetrics> trials) {
  if (trials.empty()) throw Error(ErrorCode::EmptyInput, "cannot aggregate zero trials");
  AggregateMetrics a;
  a.n = trials.size();
  a.duration_s = detail::summarize(trials, &TrialMetrics::duration_s);
  a.min_force_N = detail::summarize(trials, &TrialMetrics::min_force_N);
  a.max_force_N = detail::summarize(trials, &TrialMetrics::max_force_N);
  a.final_force_N = detail::summarize(trials, &TrialMetrics::final_force_N);
  a.most_compressive_N = trials.front().min_force_N;
  a.most_tensile_N = trials.front().max_force_N;
  for (const auto& t : trials) {
    a.most_compressive_N = std::min(a.most_compressive_N, t.min_force_N);
    a.most_tensile_N = std::max(a.most_tensile_N, t.max_force_N);
  }
  return a;
}

struct LabeledMetrics {
  std::string label;
  TrialMetrics metrics;
};

namespace detail {
inline std::string fmt(const char* pattern, auto... args) {
  char buf[160];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}
}  // namespace detail

/// Aligned plain-text table in the column order t, min F, max F, final F.
inline std::string format_table(std::span<const LabeledMetrics> rows) {
  std::string out = detail::fmt("%-10s %9s %11s %11s %13s\n", "trial", "t [s]", "min F [N]",
                                "max F [N]", "final F [N]");
  for (const auto& row : rows) {
    const auto& m = row.metrics;
    out += detail::fmt("%-10s %9.2f %11.2f %11.2f %13.2f\n", row.label.c_str(), m.duration_s,
                       m.min_force_N, m.max_force_N, m.final_force_N);
  }
  return out;
}

inline std::string format_aggregate(const AggregateMetrics& a) {
  auto line = [](const char* name, const Summary& s, const char* unit) {
    return detail::fmt("%-16s %.2f ± %.2f %s\n", name, s.mean, s.std, unit);
  };
  std::string out = detail::fmt("n = %zu\n", a.n);
  out += line("duration", a.duration_s, "s");
  out += line("min F (mean)", a.min_force_N, "N");
  out += line("max F (mean)", a.max_force_N, "N");
  out += line("final F (mean)", a.final_force_N, "N");
  out += detail::fmt("%-16s %.2f N\n", "most compressive", a.most_compressive_N);
  out += detail::fmt("%-16s %.2f N\n", "most tensile", a.most_tensile_N);
  return out;
}

}  // namespace occlusim
