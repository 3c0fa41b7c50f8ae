#pragma once

// Record bundles on disk:
//
//   <root>/<trial_id>/samples.csv   header `t_s,force_N,disp_mm`, "%.6f" fields
//   <root>/<trial_id>/events.json   {"truth": [...], "detected": [...]}
//   <root>/<trial_id>/meta.json     trial id, seed, preset id, created_at, parameters
//
// Bundles are written into a temporary sibling directory and renamed into
// place, so readers never observe a half-written record.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "occlusim/error.hpp"
#include "occlusim/telemetry.hpp"

namespace occlusim {

namespace fs = std::filesystem;

inline constexpr std::string_view kSamplesHeader = "t_s,force_N,disp_mm";
inline constexpr const char* kSamplesFile = "samples.csv";
inline constexpr const char* kEventsFile = "events.json";
inline constexpr const char* kMetaFile = "meta.json";

struct RecordBundle {
  fs::path dir;
  fs::path samples() const { return dir / kSamplesFile; }
  fs::path events() const { return dir / kEventsFile; }
  fs::path meta() const { return dir / kMetaFile; }
};

inline nlohmann::json to_json(const PhaseEvent& e) {
  return {{"kind", std::string(to_string(e.kind))},
          {"t", e.t},
          {"disp_mm", e.displacement},
          {"force_N", e.force}};
}

inline PhaseEvent event_from_json(const nlohmann::json& j) {
  const auto text = j.at("kind").get<std::string>();
  const auto kind = parse_event_kind(text);
  if (!kind) throw Error(ErrorCode::UnknownEventKind, text);
  return {*kind, j.at("t").get<double>(), j.at("disp_mm").get<double>(), j.at("force_N").get<double>()};
}

inline nlohmann::json to_json(const RecordMeta& meta) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [k, v] : meta.parameters) params[k] = v;
  return {{"trial_id", meta.trial_id},
          {"seed", meta.seed},
          {"preset_id", meta.preset_id},
          {"created_at", meta.created_at},
          {"parameters", params}};
}

inline RecordMeta meta_from_json(const nlohmann::json& j) {
  RecordMeta meta;
  meta.trial_id = j.value("trial_id", std::string{});
  meta.seed = j.value("seed", std::uint64_t{0});
  meta.preset_id = j.value("preset_id", 0);
  meta.created_at = j.value("created_at", std::string{});
  if (j.contains("parameters"))
    for (const auto& [k, v] : j.at("parameters").items()) meta.parameters[k] = v.get<double>();
  return meta;
}

inline std::string format_sample_row(const TelemetrySample& s) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f", s.t, s.force, s.displacement);
  return buf;
}

namespace detail {

inline void write_file(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out << body;
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline double parse_field(std::string_view field, std::size_t line_no, const fs::path& path) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
    field.remove_suffix(1);
  double value = 0.0;
  const auto* first = field.data();
  if (!field.empty() && field.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, field.data() + field.size(), value);
  if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size())
    throw Error(ErrorCode::MalformedRow, path.string() + ":" + std::to_string(line_no) +
                                             ": cannot parse '" + std::string(field) + "'");
  return value;
}

}  // namespace detail

inline std::string samples_csv(std::span<const TelemetrySample> samples) {
  std::string body(kSamplesHeader);
  body += '\n';
  for (const auto& s : samples) {
    body += format_sample_row(s);
    body += '\n';
  }
  return body;
}

inline std::vector<TelemetrySample> parse_samples_csv(const std::string& text,
                                                      const fs::path& origin = "samples.csv") {
  std::vector<TelemetrySample> samples;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header_seen) {
      if (line != kSamplesHeader)
        throw Error(ErrorCode::MalformedHeader,
                    origin.string() + ": expected '" + std::string(kSamplesHeader) + "'");
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (auto comma = rest.find(','); comma != std::string_view::npos; comma = rest.find(',')) {
      fields.push_back(rest.substr(0, comma));
      rest.remove_prefix(comma + 1);
    }
    fields.push_back(rest);
    if (fields.size() != 3)
      throw Error(ErrorCode::MalformedRow, origin.string() + ":" + std::to_string(line_no) +
                                               ": expected 3 fields, got " +
                                               std::to_string(fields.size()));
    samples.push_back({detail::parse_field(fields[0], line_no, origin),
                       detail::parse_field(fields[1], line_no, origin),
                       detail::parse_field(fields[2], line_no, origin)});
  }
  if (!header_seen) throw Error(ErrorCode::MalformedHeader, origin.string() + ": empty file");
  return samples;
}

inline void check_events_in_range(const DeploymentRecord& record) {
  if (record.samples.empty()) return;
  const double lo = record.samples.front().t;
  const double hi = record.samples.back().t;
  for (const auto* list : {&record.truth_events, &record.detected_events})
    for (const auto& e : *list)
      if (e.t < lo || e.t > hi)
        throw Error(ErrorCode::EventOutOfRange,
                    std::string(to_string(e.kind)) + " at t=" + std::to_string(e.t));
}

/// Writes `<root>/<trial_id>/`. Refuses to replace an existing bundle unless
/// `overwrite` is set.
inline RecordBundle write_record(const DeploymentRecord& record, const fs::path& root,
                                 bool overwrite = false) {
  if (record.meta.trial_id.empty() || record.meta.trial_id.find('/') != std::string::npos ||
      record.meta.trial_id == "." || record.meta.trial_id == "..")
    throw Error(ErrorCode::InvalidArgument, "trial id '" + record.meta.trial_id + "' is not a valid directory name");
  const auto report = validate_trace(record.samples);
  if (!report.ok) throw Error(ErrorCode::InvalidTrace, report.violations.front().message);
  check_events_in_range(record);

  const RecordBundle bundle{root / record.meta.trial_id};
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + root.string() + ": " + ec.message());
  if (fs::exists(bundle.dir) && !overwrite)
    throw Error(ErrorCode::AlreadyExists, bundle.dir.string() + " (use overwrite to replace)");

  std::random_device rd;
  const fs::path staging = root / ("." + record.meta.trial_id + ".tmp-" + std::to_string(rd()));
  fs::create_directory(staging, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + staging.string() + ": " + ec.message());
  try {
    nlohmann::json events = {{"truth", nlohmann::json::array()}, {"detected", nlohmann::json::array()}};
    for (const auto& e : record.truth_events) events["truth"].push_back(to_json(e));
    for (const auto& e : record.detected_events) events["detected"].push_back(to_json(e));
    detail::write_file(staging / kSamplesFile, samples_csv(record.samples));
    detail::write_file(staging / kEventsFile, events.dump(2) + "\n");
    detail::write_file(staging / kMetaFile, to_json(record.meta).dump(2) + "\n");
    if (fs::exists(bundle.dir)) fs::remove_all(bundle.dir);
    fs::rename(staging, bundle.dir);
  } catch (const fs::filesystem_error& err) {
    fs::remove_all(staging, ec);
    throw Error(ErrorCode::Io, bundle.dir.string() + ": " + err.what());
  } catch (...) {
    fs::remove_all(staging, ec);
    throw;
  }
  return bundle;
}

/// Loads and validates a bundle. Missing sidecars are tolerated and reported
/// through `warnings` so bare force logs can still be analyzed.
inline DeploymentRecord read_record(const fs::path& dir, std::vector<std::string>& warnings) {
  const RecordBundle bundle{dir};
  if (!fs::exists(bundle.samples())) throw Error(ErrorCode::Io, bundle.samples().string() + " not found");

  DeploymentRecord record;
  record.samples = parse_samples_csv(detail::read_file(bundle.samples()), bundle.samples());
  const auto report = validate_trace(record.samples);
  if (!report.ok) {
    auto it = std::find_if(report.violations.begin(), report.violations.end(),
                           [](const Violation& v) { return v.kind == ViolationKind::NonMonotoneTime; });
    if (it != report.violations.end())
      throw Error(ErrorCode::NonMonotoneTime, bundle.samples().string() + ": " + it->message);
    throw Error(ErrorCode::InvalidTrace, bundle.samples().string() + ": " + report.violations.front().message);
  }

  auto parse_json = [&](const fs::path& path) {
    try {
      return nlohmann::json::parse(detail::read_file(path));
    } catch (const nlohmann::json::exception& err) {
      throw Error(ErrorCode::MalformedSidecar, path.string() + ": " + err.what());
    }
  };

  if (fs::exists(bundle.events())) {
    const auto events = parse_json(bundle.events());
    try {
      for (const char* key : {"truth", "detected"}) {
        if (!events.contains(key)) continue;
        auto& target = std::string_view(key) == "truth" ? record.truth_events : record.detected_events;
        for (const auto& e : events.at(key)) target.push_back(event_from_json(e));
      }
    } catch (const nlohmann::json::exception& err) {
      throw Error(ErrorCode::MalformedSidecar, bundle.events().string() + ": " + err.what());
    }
    check_events_in_range(record);
  } else {
    warnings.push_back(bundle.events().string() + " missing; loading with no events");
  }

  if (fs::exists(bundle.meta())) {
    try {
      record.meta = meta_from_json(parse_json(bundle.meta()));
    } catch (const nlohmann::json::exception& err) {
      throw Error(ErrorCode::MalformedSidecar, bundle.meta().string() + ": " + err.what());
    }
  } else {
    warnings.push_back(bundle.meta().string() + " missing; using directory name as trial id");
  }
  if (record.meta.trial_id.empty()) record.meta.trial_id = fs::absolute(dir).lexically_normal().filename().string();
  return record;
}

inline DeploymentRecord read_record(const fs::path& dir) {
  std::vector<std::string> warnings;
  auto record = read_record(dir, warnings);
  for (const auto& w : warnings) std::clog << "warning: " << w << '\n';
  return record;
}

/// Record directories under `path`: the path itself if it holds samples.csv,
/// otherwise its immediate subdirectories that do, sorted by name.
inline std::vector<fs::path> find_records(const fs::path& path) {
  if (fs::exists(path / kSamplesFile)) return {path};
  std::vector<fs::path> found;
  if (!fs::is_directory(path)) return found;
  for (const auto& entry : fs::directory_iterator(path)) {
    const auto name = entry.path().filename().string();
    if (entry.is_directory() && !name.starts_with(".") && fs::exists(entry.path() / kSamplesFile))
      found.push_back(entry.path());
  }
  std::sort(found.begin(), found.end());
  return found;
}

/// Paced sample stream. `next()` blocks until the sample is due: original
/// inter-sample intervals divided by `speed_factor`; 0 means no pacing.
class ReplayStream {
 public:
  using Clock = std::chrono::steady_clock;

  ReplayStream(std::vector<TelemetrySample> samples, double speed_factor)
      : samples_(std::move(samples)), factor_(speed_factor) {
    if (!(speed_factor >= 0.0) || !std::isfinite(speed_factor))
      throw Error(ErrorCode::InvalidArgument, "speed factor must be >= 0");
  }

  std::optional<TelemetrySample> next() {
    if (index_ >= samples_.size()) return std::nullopt;
    if (index_ == 0) {
      start_ = Clock::now();
    } else if (factor_ > 0.0) {
      const double offset = (samples_[index_].t - samples_.front().t) / factor_;
      std::this_thread::sleep_until(start_ + std::chrono::duration_cast<Clock::duration>(
                                                 std::chrono::duration<double>(offset)));
    }
    return samples_[index_++];
  }

  std::size_t size() const { return samples_.size(); }

 private:
  std::vector<TelemetrySample> samples_;
  double factor_;
  std::size_t index_ = 0;
  Clock::time_point start_{};
};

inline ReplayStream replay(const DeploymentRecord& record, double speed_factor) {
  return ReplayStream(record.samples, speed_factor);
}

}  // namespace occlusim
