#pragma once

// JSON wire messages exchanged between a live session and its operator.
//
// client -> server
//   {"type":"cmd","action":"advance|retract|stop|detach|reset",
//    "speed_mm_s":2.0, "preset":1, "seed":7, "seq":12}
// server -> client (every message carries a per-session gapless "seq")
//   {"type":"telemetry","t","force_N","disp_mm","phase"}
//   {"type":"event","kind","t","disp_mm","force_N","source":"truth|detected"}
//   {"type":"metrics","duration_s","min_force_N","max_force_N","final_force_N"}
//   {"type":"ack","action"}
//   {"type":"error","code","message"}

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

#include "occlusim/metrics.hpp"
#include "occlusim/telemetry.hpp"

namespace occlusim::protocol {

enum class CommandAction : std::uint8_t { Advance, Retract, Stop, Detach, Reset };

inline constexpr std::string_view to_string(CommandAction a) {
  switch (a) {
    case CommandAction::Advance: return "advance";
    case CommandAction::Retract: return "retract";
    case CommandAction::Stop: return "stop";
    case CommandAction::Detach: return "detach";
    case CommandAction::Reset: return "reset";
  }
  return "unknown";
}

inline std::optional<CommandAction> parse_action(std::string_view text) {
  for (auto a : {CommandAction::Advance, CommandAction::Retract, CommandAction::Stop,
                 CommandAction::Detach, CommandAction::Reset})
    if (to_string(a) == text) return a;
  return std::nullopt;
}

struct ClientCommand {
  CommandAction action = CommandAction::Stop;
  std::optional<double> speed_mm_s;
  std::optional<int> preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> seq;

  friend bool operator==(const ClientCommand&, const ClientCommand&) = default;
};

namespace codes {
inline constexpr std::string_view kBadMessage = "bad_message";
inline constexpr std::string_view kBadCmd = "bad_cmd";
inline constexpr std::string_view kBadState = "bad_state";
inline constexpr std::string_view kSessionClosed = "session_closed";
}  // namespace codes

enum class EventSource : std::uint8_t { Truth, Detected };

inline constexpr std::string_view to_string(EventSource s) {
  return s == EventSource::Truth ? "truth" : "detected";
}

struct Telemetry {
  TelemetrySample sample;
  DeploymentPhase phase = DeploymentPhase::Navigation;
  friend bool operator==(const Telemetry&, const Telemetry&) = default;
};

struct Event {
  PhaseEvent event;
  EventSource source = EventSource::Detected;
  friend bool operator==(const Event&, const Event&) = default;
};

struct Metrics {
  TrialMetrics metrics;
  friend bool operator==(const Metrics&, const Metrics&) = default;
};

struct Ack {
  CommandAction action = CommandAction::Stop;
  friend bool operator==(const Ack&, const Ack&) = default;
};

struct ErrorReply {
  std::string code;
  std::string message;
  friend bool operator==(const ErrorReply&, const ErrorReply&) = default;
};

using Payload = std::variant<Telemetry, Event, Metrics, Ack, ErrorReply>;

struct ServerMessage {
  std::uint64_t seq = 0;
  Payload payload;
  friend bool operator==(const ServerMessage&, const ServerMessage&) = default;
};

/// Decoding outcome for inbound text: a command, or the error to send back.
using Decoded = std::variant<ClientCommand, ErrorReply>;

inline Decoded decode_client(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    return ErrorReply{std::string(codes::kBadMessage), "message is not valid JSON"};
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string() || j["type"] != "cmd")
    return ErrorReply{std::string(codes::kBadMessage), "expected an object with type \"cmd\""};
  if (!j.contains("action") || !j["action"].is_string())
    return ErrorReply{std::string(codes::kBadCmd), "missing action"};
  const auto action = parse_action(j["action"].get<std::string>());
  if (!action)
    return ErrorReply{std::string(codes::kBadCmd), "unknown action '" + j["action"].get<std::string>() + "'"};

  ClientCommand cmd;
  cmd.action = *action;
  if (j.contains("speed_mm_s")) {
    const auto& v = j["speed_mm_s"];
    if (!v.is_number() || !std::isfinite(v.get<double>()) || v.get<double>() < 0.0)
      return ErrorReply{std::string(codes::kBadCmd), "speed_mm_s must be a finite number >= 0"};
    cmd.speed_mm_s = v.get<double>();
  }
  if ((cmd.action == CommandAction::Advance || cmd.action == CommandAction::Retract) && !cmd.speed_mm_s)
    return ErrorReply{std::string(codes::kBadCmd), "speed_mm_s required for " + std::string(to_string(cmd.action))};
  if (j.contains("preset")) {
    if (!j["preset"].is_number_integer()) return ErrorReply{std::string(codes::kBadCmd), "preset must be an integer"};
    cmd.preset = j["preset"].get<int>();
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) return ErrorReply{std::string(codes::kBadCmd), "seed must be a non-negative integer"};
    cmd.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("seq")) {
    if (!j["seq"].is_number_unsigned()) return ErrorReply{std::string(codes::kBadMessage), "seq must be a non-negative integer"};
    cmd.seq = j["seq"].get<std::uint64_t>();
  }
  return cmd;
}

inline nlohmann::json encode(const ClientCommand& cmd) {
  nlohmann::json j = {{"type", "cmd"}, {"action", std::string(to_string(cmd.action))}};
  if (cmd.speed_mm_s) j["speed_mm_s"] = *cmd.speed_mm_s;
  if (cmd.preset) j["preset"] = *cmd.preset;
  if (cmd.seed) j["seed"] = *cmd.seed;
  if (cmd.seq) j["seq"] = *cmd.seq;
  return j;
}

inline nlohmann::json encode(const ServerMessage& msg) {
  nlohmann::json j;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Telemetry>) {
          j = {{"type", "telemetry"},
               {"t", p.sample.t},
               {"force_N", p.sample.force},
               {"disp_mm", p.sample.displacement},
               {"phase", std::string(to_string(p.phase))}};
        } else if constexpr (std::is_same_v<T, Event>) {
          j = {{"type", "event"},
               {"kind", std::string(to_string(p.event.kind))},
               {"t", p.event.t},
               {"disp_mm", p.event.displacement},
               {"force_N", p.event.force},
               {"source", std::string(to_string(p.source))}};
        } else if constexpr (std::is_same_v<T, Metrics>) {
          j = {{"type", "metrics"},
               {"duration_s", p.metrics.duration_s},
               {"min_force_N", p.metrics.min_force_N},
               {"max_force_N", p.metrics.max_force_N},
               {"final_force_N", p.metrics.final_force_N}};
        } else if constexpr (std::is_same_v<T, Ack>) {
          j = {{"type", "ack"}, {"action", std::string(to_string(p.action))}};
        } else {
          j = {{"type", "error"}, {"code", p.code}, {"message", p.message}};
        }
      },
      msg.payload);
  j["seq"] = msg.seq;
  return j;
}

/// Inverse of `encode(ServerMessage)`; used by headless clients and tests.
inline ServerMessage decode_server(const nlohmann::json& j) {
  ServerMessage msg;
  msg.seq = j.at("seq").get<std::uint64_t>();
  const auto type = j.at("type").get<std::string>();
  if (type == "telemetry") {
    const auto phase = parse_phase(j.at("phase").get<std::string>());
    if (!phase) throw Error(ErrorCode::InvalidArgument, "unknown phase");
    msg.payload = Telemetry{{j.at("t").get<double>(), j.at("force_N").get<double>(), j.at("disp_mm").get<double>()}, *phase};
  } else if (type == "event") {
    const auto kind = parse_event_kind(j.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::UnknownEventKind, j.at("kind").get<std::string>());
    msg.payload = Event{{*kind, j.at("t").get<double>(), j.at("disp_mm").get<double>(), j.at("force_N").get<double>()},
                        j.at("source").get<std::string>() == "truth" ? EventSource::Truth : EventSource::Detected};
  } else if (type == "metrics") {
    msg.payload = Metrics{{j.at("duration_s").get<double>(), j.at("min_force_N").get<double>(),
                           j.at("max_force_N").get<double>(), j.at("final_force_N").get<double>()}};
  } else if (type == "ack") {
    const auto action = parse_action(j.at("action").get<std::string>());
    if (!action) throw Error(ErrorCode::InvalidArgument, "unknown action in ack");
    msg.payload = Ack{*action};
  } else if (type == "error") {
    msg.payload = ErrorReply{j.at("code").get<std::string>(), j.at("message").get<std::string>()};
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown message type '" + type + "'");
  }
  return msg;
}

}  // namespace occlusim::protocol
