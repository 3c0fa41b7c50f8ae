#pragma once

// Live operator session: one simulator, one detector, one record.
//
// Not internally synchronized. The owner serializes `handle_message` and
// `tick` (the WebSocket server runs both on the connection's strand).

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "occlusim/detector.hpp"
#include "occlusim/metrics.hpp"
#include "occlusim/occluder.hpp"
#include "occlusim/protocol.hpp"
#include "occlusim/simulator.hpp"
#include "occlusim/store.hpp"

namespace occlusim {

struct SessionConfig {
  int preset_id = 1;
  std::optional<OccluderSpec> custom_spec;  // takes precedence over preset_id
  std::uint64_t seed = 0;
  SimConfig sim;
  DetectorConfig detector;
  bool expose_truth = false;  // also stream ground-truth events
  std::string trial_prefix = "session";

  OccluderSpec resolve_spec() const {
    if (custom_spec) {
      validate(*custom_spec);
      return *custom_spec;
    }
    return reference_preset(preset_id).spec;
  }
};

namespace detail {
template <typename T>
void override_field(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}
}  // namespace detail

/// Applies a JSON config on top of `base`. Recognized keys:
///   preset, seed, expose_truth,
///   spec     {flattened OccluderSpec parameters, e.g. "lobe.compression_depth_N"},
///   sim      {dt, nav_depth_mm, nav_noise_sigma_N, deploy_noise_sigma_N, max_speed_mm_s, nav_speed_mm_s},
///   detector {smoothing_window_samples, onset_threshold_N, onset_debounce_samples,
///             rebound1_delta_N, rebound2_delta_N, peak_confirm_drop_N, peak_band_N}
inline SessionConfig apply_config(const nlohmann::json& j, SessionConfig base = {}) {
  try {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
    detail::override_field(j, "preset", base.preset_id);
    detail::override_field(j, "seed", base.seed);
    detail::override_field(j, "expose_truth", base.expose_truth);
    if (j.contains("spec")) {
      auto params = to_parameters(base.resolve_spec());
      for (const auto& [k, v] : j.at("spec").items()) {
        if (!params.contains(k)) throw Error(ErrorCode::InvalidConfig, "unknown spec parameter " + k);
        params[k] = v.get<double>();
      }
      base.custom_spec = spec_from_parameters(params);
    }
    if (j.contains("sim")) {
      const auto& s = j.at("sim");
      detail::override_field(s, "dt", base.sim.dt);
      detail::override_field(s, "nav_depth_mm", base.sim.nav_depth_mm);
      detail::override_field(s, "nav_noise_sigma_N", base.sim.nav_noise_sigma_N);
      detail::override_field(s, "deploy_noise_sigma_N", base.sim.deploy_noise_sigma_N);
      detail::override_field(s, "max_speed_mm_s", base.sim.max_speed_mm_s);
      detail::override_field(s, "nav_speed_mm_s", base.sim.nav_speed_mm_s);
    }
    if (j.contains("detector")) {
      const auto& d = j.at("detector");
      detail::override_field(d, "smoothing_window_samples", base.detector.smoothing_window_samples);
      detail::override_field(d, "onset_threshold_N", base.detector.onset_threshold_N);
      detail::override_field(d, "onset_debounce_samples", base.detector.onset_debounce_samples);
      detail::override_field(d, "rebound1_delta_N", base.detector.rebound1_delta_N);
      detail::override_field(d, "rebound2_delta_N", base.detector.rebound2_delta_N);
      detail::override_field(d, "peak_confirm_drop_N", base.detector.peak_confirm_drop_N);
      detail::override_field(d, "peak_band_N", base.detector.peak_band_N);
    }
  } catch (const nlohmann::json::exception& err) {
    throw Error(ErrorCode::InvalidConfig, err.what());
  }
  base.sim.seed = base.seed;
  base.resolve_spec();
  validate(base.sim);
  validate(base.detector);
  return base;
}

inline SessionConfig load_session_config(const std::filesystem::path& path, SessionConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
  try {
    return apply_config(nlohmann::json::parse(in), std::move(base));
  } catch (const nlohmann::json::exception& err) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + err.what());
  }
}

class Session {
 public:
  using Messages = std::vector<protocol::ServerMessage>;

  explicit Session(SessionConfig cfg) : cfg_(std::move(cfg)) { restart(); }

  /// Raw wire text in, replies out. Malformed input never changes state.
  Messages handle_message(std::string_view text) {
    Messages out;
    const auto decoded = protocol::decode_client(text);
    if (const auto* err = std::get_if<protocol::ErrorReply>(&decoded)) {
      emit(out, *err);
      return out;
    }
    return handle(std::get<protocol::ClientCommand>(decoded));
  }

  Messages handle(const protocol::ClientCommand& cmd) {
    using protocol::CommandAction;
    Messages out;
    auto reject = [&](std::string_view code, std::string message) {
      emit(out, protocol::ErrorReply{std::string(code), std::move(message)});
      return out;
    };
    if (cmd.action == CommandAction::Reset) {
      if (cmd.preset) {
        if (*cmd.preset < 1 || *cmd.preset > 10)
          return reject(protocol::codes::kBadCmd, "preset must be 1..10");
        cfg_.preset_id = *cmd.preset;
        cfg_.custom_spec.reset();
      }
      if (cmd.seed) cfg_.seed = *cmd.seed;
      ++generation_;
      restart();
      emit(out, protocol::Ack{cmd.action});
      return out;
    }
    if (closed_) return reject(protocol::codes::kSessionClosed, "occluder detached; send reset to start over");

    switch (cmd.action) {
      case CommandAction::Advance:
        pending_ = OperatorCommand::advance(*cmd.speed_mm_s);
        break;
      case CommandAction::Retract:
        pending_ = OperatorCommand::retract(*cmd.speed_mm_s);
        break;
      case CommandAction::Stop:
        pending_ = OperatorCommand::stop();
        break;
      case CommandAction::Detach:
        if (sim_->state().mode == SimMode::Navigating)
          return reject(protocol::codes::kBadState, "cannot detach before deployment has begun");
        emit(out, protocol::Ack{cmd.action});
        advance(OperatorCommand::detach(), out);
        return out;
      case CommandAction::Reset:
        break;
    }
    emit(out, protocol::Ack{cmd.action});
    return out;
  }

  /// One simulator tick: exactly one telemetry message plus any events.
  Messages tick() {
    Messages out;
    if (closed_) return out;
    advance(pending_, out);
    return out;
  }

  bool closed() const { return closed_; }
  const DeploymentRecord& record() const { return record_; }
  const SessionConfig& config() const { return cfg_; }
  const SimState& sim_state() const { return sim_->state(); }
  std::uint64_t next_seq() const { return seq_; }

 private:
  void restart() {
    cfg_.sim.seed = cfg_.seed;
    const OccluderSpec spec = cfg_.resolve_spec();
    sim_.emplace(spec, cfg_.sim);
    detector_.emplace(cfg_.detector);
    pending_ = OperatorCommand::stop();
    closed_ = false;
    record_ = {};
    record_.meta.trial_id = cfg_.trial_prefix + "-" + std::to_string(generation_);
    record_.meta.seed = cfg_.seed;
    record_.meta.preset_id = cfg_.custom_spec ? 0 : cfg_.preset_id;
    record_.meta.parameters = to_parameters(spec);
    for (const auto& [k, v] : sim_parameters(cfg_.sim)) record_.meta.parameters[k] = v;
  }

  void advance(const OperatorCommand& cmd, Messages& out) {
    std::vector<PhaseEvent> truth;
    const TelemetrySample sample = sim_->step(cmd, &truth);
    record_.samples.push_back(sample);
    for (const auto& e : truth) record_.truth_events.push_back(e);

    std::vector<PhaseEvent> detected;
    if (auto e = detector_->push(sample)) detected.push_back(*e);
    if (cmd.action == Action::Detach) {
      detected.push_back({EventKind::Detached, sample.t, sample.displacement, sample.force});
      closed_ = true;
    }
    for (const auto& e : detected) record_.detected_events.push_back(e);

    emit(out, protocol::Telemetry{sample, phase_at(record_.detected_events, sample.t)});
    for (const auto& e : detected) emit(out, protocol::Event{e, protocol::EventSource::Detected});
    if (cfg_.expose_truth)
      for (const auto& e : truth) emit(out, protocol::Event{e, protocol::EventSource::Truth});
    if (closed_) emit(out, protocol::Metrics{trial_metrics(record_)});
  }

  void emit(Messages& out, protocol::Payload payload) { out.push_back({seq_++, std::move(payload)}); }

  SessionConfig cfg_;
  std::optional<Simulator> sim_;
  std::optional<PhaseDetector> detector_;
  OperatorCommand pending_;
  DeploymentRecord record_;
  bool closed_ = false;
  std::uint64_t seq_ = 0;
  std::uint64_t generation_ = 0;
};

}  // namespace occlusim
