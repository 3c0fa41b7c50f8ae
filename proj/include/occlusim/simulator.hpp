#pragma once

// Time-domain deployment session engine.
//
// One axial degree of freedom: the catheter tip advances to the target depth,
// then the sheath is retracted while the occluder is held in place. The
// relative retraction x exposes the occluder elements and drives the
// quasi-static force law.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "occlusim/error.hpp"
#include "occlusim/occluder.hpp"
#include "occlusim/telemetry.hpp"

namespace occlusim {

struct SimConfig {
  double dt = kNominalSampleInterval;
  double nav_depth_mm = 40.0;
  double nav_noise_sigma_N = 0.15;
  double deploy_noise_sigma_N = 0.10;
  double max_speed_mm_s = 10.0;
  double nav_speed_mm_s = 5.0;   // autopilot navigation speed
  double truth_onset_N = -1.0;   // lobe force that marks ground-truth E1
  std::uint64_t seed = 0;

  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

inline void validate(const SimConfig& cfg) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) fail("dt must be > 0");
  if (!(cfg.nav_depth_mm > 0.0) || !std::isfinite(cfg.nav_depth_mm)) fail("nav_depth must be > 0");
  if (!(cfg.nav_noise_sigma_N >= 0.0) || !std::isfinite(cfg.nav_noise_sigma_N))
    fail("nav noise sigma must be >= 0");
  if (!(cfg.deploy_noise_sigma_N >= 0.0) || !std::isfinite(cfg.deploy_noise_sigma_N))
    fail("deploy noise sigma must be >= 0");
  if (!(cfg.max_speed_mm_s > 0.0) || !std::isfinite(cfg.max_speed_mm_s)) fail("max speed must be > 0");
  if (!(cfg.nav_speed_mm_s > 0.0) || !std::isfinite(cfg.nav_speed_mm_s)) fail("nav speed must be > 0");
  if (!(cfg.truth_onset_N < 0.0)) fail("truth onset threshold must be < 0");
}

enum class SimMode : std::uint8_t { Navigating, Deploying, Detached };

inline constexpr std::string_view to_string(SimMode mode) {
  switch (mode) {
    case SimMode::Navigating: return "NAVIGATING";
    case SimMode::Deploying: return "DEPLOYING";
    case SimMode::Detached: return "DETACHED";
  }
  return "UNKNOWN";
}

enum class Action : std::uint8_t { Advance, Retract, Stop, Detach };

inline constexpr std::string_view to_string(Action a) {
  switch (a) {
    case Action::Advance: return "advance";
    case Action::Retract: return "retract";
    case Action::Stop: return "stop";
    case Action::Detach: return "detach";
  }
  return "unknown";
}

struct OperatorCommand {
  Action action = Action::Stop;
  double speed_mm_s = 0.0;

  static OperatorCommand advance(double speed) { return {Action::Advance, speed}; }
  static OperatorCommand retract(double speed) { return {Action::Retract, speed}; }
  static OperatorCommand stop() { return {Action::Stop, 0.0}; }
  static OperatorCommand detach() { return {Action::Detach, 0.0}; }

  friend bool operator==(const OperatorCommand&, const OperatorCommand&) = default;
};

struct SimState {
  std::uint64_t tick = 0;
  double t = 0.0;
  double tip_displacement_mm = 0.0;
  double sheath_retraction_mm = 0.0;
  SimMode mode = SimMode::Navigating;
  std::array<bool, 4> truth_emitted{};
  std::mt19937_64 rng;
  std::normal_distribution<double> gauss{0.0, 1.0};

  static SimState initial(std::uint64_t seed) {
    SimState s;
    s.rng.seed(seed);
    return s;
  }

  friend bool operator==(const SimState&, const SimState&) = default;
};

struct StepResult {
  SimState state;
  TelemetrySample sample;
  std::vector<PhaseEvent> events;  // ground truth crossed during this tick
};

namespace detail {

inline void advance_in_place(SimState& s, const SimConfig& cfg, const ForceLaw& law,
                             const OperatorCommand& cmd, TelemetrySample& sample,
                             std::vector<PhaseEvent>& events) {
  if (s.mode == SimMode::Detached && cmd.action != Action::Stop)
    throw Error(ErrorCode::InvalidCommand, "occluder already detached; only STOP is accepted");
  if (!(cmd.speed_mm_s >= 0.0) || !std::isfinite(cmd.speed_mm_s))
    throw Error(ErrorCode::InvalidCommand, "speed must be finite and >= 0");
  if (cmd.action == Action::Detach && s.mode == SimMode::Navigating)
    throw Error(ErrorCode::InvalidCommand, "cannot detach before deployment has begun");

  const double travel = std::min(cmd.speed_mm_s, cfg.max_speed_mm_s) * cfg.dt;
  switch (cmd.action) {
    case Action::Advance:
      // During deployment this is a repositioning jog: x is unchanged.
      s.tip_displacement_mm += travel;
      break;
    case Action::Retract:
      if (s.mode == SimMode::Navigating && s.tip_displacement_mm >= cfg.nav_depth_mm - 1e-9)
        s.mode = SimMode::Deploying;
      if (s.mode == SimMode::Deploying) {
        s.sheath_retraction_mm += travel;
        s.tip_displacement_mm -= travel;
      } else {
        s.tip_displacement_mm = std::max(0.0, s.tip_displacement_mm - travel);
      }
      break;
    case Action::Stop:
      break;
    case Action::Detach:
      s.mode = SimMode::Detached;
      break;
  }

  s.tick += 1;
  s.t = static_cast<double>(s.tick) * cfg.dt;
  const double sigma =
      s.mode == SimMode::Navigating ? cfg.nav_noise_sigma_N : cfg.deploy_noise_sigma_N;
  const double noise = sigma * s.gauss(s.rng);
  const double x = s.sheath_retraction_mm;
  sample = quantize(TelemetrySample{s.t, law(x) + noise, s.tip_displacement_mm});

  auto emit = [&](EventKind kind) {
    auto& done = s.truth_emitted[static_cast<std::size_t>(kind)];
    if (done) return;
    done = true;
    events.push_back({kind, sample.t, sample.displacement, sample.force});
  };
  if (s.mode == SimMode::Deploying) {
    const auto& spec = law.spec();
    if (x >= lobe_onset_retraction(spec, cfg.truth_onset_N)) emit(EventKind::LobeOnset);
    if (x >= lobe_snap_peak_retraction(spec)) emit(EventKind::LobeExpanded);
    if (x >= disk_snap_peak_retraction(spec)) emit(EventKind::DiskExpanded);
  } else if (cmd.action == Action::Detach) {
    emit(EventKind::Detached);
  }
}

}  // namespace detail

/// Pure transition: returns the next state, the emitted sample and any
/// ground-truth events crossed during the tick.
inline StepResult step(const SimState& state, const SimConfig& cfg, const OccluderSpec& spec,
                       const OperatorCommand& cmd) {
  validate(cfg);
  ForceLaw law(spec);
  StepResult out{state, {}, {}};
  detail::advance_in_place(out.state, cfg, law, cmd, out.sample, out.events);
  return out;
}

/// Mutable single-owner engine around `step`.
class Simulator {
 public:
  Simulator(OccluderSpec spec, SimConfig cfg)
      : cfg_((validate(cfg), cfg)), law_(std::move(spec)), state_(SimState::initial(cfg.seed)) {}

  TelemetrySample step(const OperatorCommand& cmd, std::vector<PhaseEvent>* events = nullptr) {
    TelemetrySample sample;
    std::vector<PhaseEvent> local;
    detail::advance_in_place(state_, cfg_, law_, cmd, sample, events ? *events : local);
    return sample;
  }

  const SimState& state() const { return state_; }
  const SimConfig& config() const { return cfg_; }
  const OccluderSpec& spec() const { return law_.spec(); }

 private:
  SimConfig cfg_;
  ForceLaw law_;
  SimState state_;
};

struct ScriptSegment {
  OperatorCommand command;
  double duration_s = 0.0;
};

struct TrialScript {
  std::vector<ScriptSegment> segments;

  double total_retraction_mm() const {
    double total = 0.0;
    for (const auto& seg : segments)
      if (seg.command.action == Action::Retract) total += seg.command.speed_mm_s * seg.duration_s;
    return total;
  }
};

namespace detail {
// Splits a move of `distance` at `speed` into whole ticks so that the tick
// count is the nearest integer to distance / (speed * dt). The remainder is
// carried by one adjusted tick (slower, or faster when it is under half a tick).
inline void append_move(TrialScript& script, Action action, double distance, double speed,
                        double dt, double max_speed) {
  const double per_tick = speed * dt;
  auto full = static_cast<std::uint64_t>(std::floor(distance / per_tick + 1e-9));
  double rest = distance - static_cast<double>(full) * per_tick;
  if (rest > 1e-12 && rest < 0.5 * per_tick && full > 0 && speed + rest / dt <= max_speed) {
    --full;
    rest += per_tick;
  }
  if (full > 0) script.segments.push_back({{action, speed}, static_cast<double>(full) * dt});
  if (rest > 1e-12) script.segments.push_back({{action, rest / dt}, dt});
}
}  // namespace detail

/// Autopilot: navigate to depth, retract the full travel at `speed`, hold for
/// `wait_s`, then detach. The detach tick closes the hold, so E4 lands exactly
/// `wait_s` after the last retraction tick.
inline TrialScript make_script(const OccluderSpec& spec, double retraction_speed_mm_s,
                               double wait_s, const SimConfig& cfg) {
  validate(cfg);
  validate(spec);
  if (!(retraction_speed_mm_s > 0.0) || retraction_speed_mm_s > cfg.max_speed_mm_s)
    throw Error(ErrorCode::InvalidArgument, "retraction speed must be in (0, max_speed]");
  if (!(wait_s >= cfg.dt)) throw Error(ErrorCode::InvalidArgument, "wait must cover the detach tick");
  TrialScript script;
  detail::append_move(script, Action::Advance, cfg.nav_depth_mm,
                      std::min(cfg.nav_speed_mm_s, cfg.max_speed_mm_s), cfg.dt, cfg.max_speed_mm_s);
  detail::append_move(script, Action::Retract, spec.total_retraction_mm(), retraction_speed_mm_s,
                      cfg.dt, cfg.max_speed_mm_s);
  const auto hold_ticks = static_cast<std::uint64_t>(std::llround(wait_s / cfg.dt)) - 1;
  if (hold_ticks > 0)
    script.segments.push_back({OperatorCommand::stop(), static_cast<double>(hold_ticks) * cfg.dt});
  script.segments.push_back({OperatorCommand::detach(), cfg.dt});
  return script;
}

inline TrialScript make_script(const ReferencePreset& preset, const SimConfig& cfg) {
  return make_script(preset.spec, preset.retraction_speed_mm_s, preset.post_deploy_wait_s, cfg);
}

inline std::map<std::string, double> sim_parameters(const SimConfig& cfg) {
  return {{"sim.dt", cfg.dt},
          {"sim.nav_depth_mm", cfg.nav_depth_mm},
          {"sim.nav_noise_sigma_N", cfg.nav_noise_sigma_N},
          {"sim.deploy_noise_sigma_N", cfg.deploy_noise_sigma_N},
          {"sim.max_speed_mm_s", cfg.max_speed_mm_s},
          {"sim.nav_speed_mm_s", cfg.nav_speed_mm_s},
          {"sim.truth_onset_N", cfg.truth_onset_N}};
}

inline DeploymentRecord run_script(const OccluderSpec& spec, const TrialScript& script,
                                   const SimConfig& cfg, RecordMeta meta = {}) {
  Simulator sim(spec, cfg);
  DeploymentRecord record;
  record.meta = std::move(meta);
  record.meta.seed = cfg.seed;
  for (const auto& [key, value] : to_parameters(spec)) record.meta.parameters[key] = value;
  for (const auto& [key, value] : sim_parameters(cfg)) record.meta.parameters[key] = value;
  for (const auto& seg : script.segments) {
    const auto ticks = std::llround(seg.duration_s / cfg.dt);
    for (long long i = 0; i < ticks; ++i)
      record.samples.push_back(sim.step(seg.command, &record.truth_events));
  }
  return record;
}

inline std::string preset_trial_id(int preset_id) {
  std::string id = std::to_string(preset_id);
  return "trial_" + std::string(id.size() < 2 ? 2 - id.size() : 0, '0') + id;
}

inline DeploymentRecord run_script(const ReferencePreset& preset, const SimConfig& cfg) {
  RecordMeta meta;
  meta.trial_id = preset_trial_id(preset.preset_id);
  meta.preset_id = preset.preset_id;
  meta.parameters["retraction_speed_mm_s"] = preset.retraction_speed_mm_s;
  meta.parameters["post_deploy_wait_s"] = preset.post_deploy_wait_s;
  return run_script(preset.spec, make_script(preset, cfg), cfg, std::move(meta));
}

}  // namespace occlusim
