#include <gtest/gtest.h>

#include <fstream>

#include "occlusim/detector.hpp"
#include "occlusim/protocol.hpp"
#include "occlusim/session.hpp"
#include "support/test_support.hpp"

using namespace occlusim;
using namespace occlusim::protocol;
using occlusim::testing::TempDir;

namespace {

SessionConfig quiet_config(int preset = 1) {
  SessionConfig cfg;
  cfg.preset_id = preset;
  cfg.sim.nav_noise_sigma_N = 0.0;
  cfg.sim.deploy_noise_sigma_N = 0.0;
  return cfg;
}

template <typename T>
std::vector<T> of_type(const Session::Messages& msgs) {
  std::vector<T> out;
  for (const auto& m : msgs)
    if (const auto* p = std::get_if<T>(&m.payload)) out.push_back(*p);
  return out;
}

void run_ticks(Session& s, int n, Session::Messages* sink = nullptr) {
  for (int i = 0; i < n; ++i) {
    auto msgs = s.tick();
    if (sink) sink->insert(sink->end(), msgs.begin(), msgs.end());
  }
}

// Advance to the navigation depth at 10 mm/s (4 s of ticks).
void navigate(Session& s) {
  s.handle_message(R"({"type":"cmd","action":"advance","speed_mm_s":10})");
  run_ticks(s, 160);
  s.handle_message(R"({"type":"cmd","action":"stop"})");
}

}  // namespace

TEST(Protocol, DecodesCommand) {
  const auto d = decode_client(R"({"type":"cmd","action":"retract","speed_mm_s":2.5,"seq":4})");
  const auto* cmd = std::get_if<ClientCommand>(&d);
  ASSERT_NE(cmd, nullptr);
  EXPECT_EQ(cmd->action, CommandAction::Retract);
  EXPECT_EQ(cmd->speed_mm_s, 2.5);
  EXPECT_EQ(cmd->seq, 4u);
}

TEST(Protocol, RejectsMalformedInput) {
  auto code = [](std::string_view text) {
    const auto d = decode_client(text);
    const auto* err = std::get_if<ErrorReply>(&d);
    return err ? err->code : std::string("accepted");
  };
  EXPECT_EQ(code("not json"), codes::kBadMessage);
  EXPECT_EQ(code(R"({"action":"stop"})"), codes::kBadMessage);
  EXPECT_EQ(code(R"({"type":"cmd","action":"teleport"})"), codes::kBadCmd);
  EXPECT_EQ(code(R"({"type":"cmd","action":"advance","speed_mm_s":-3})"), codes::kBadCmd);
  EXPECT_EQ(code(R"({"type":"cmd","action":"retract"})"), codes::kBadCmd);
  EXPECT_EQ(code(R"({"type":"cmd","action":"stop"})"), "accepted");
}

TEST(Protocol, ClientCommandRoundTrip) {
  ClientCommand cmd{CommandAction::Reset, std::nullopt, 4, 99, 7};
  const auto d = decode_client(encode(cmd).dump());
  EXPECT_EQ(std::get<ClientCommand>(d), cmd);
}

TEST(Protocol, ServerMessageRoundTrip) {
  const std::vector<ServerMessage> msgs = {
      {0, Telemetry{{1.025, -0.123456, 39.5}, DeploymentPhase::LobeDeployment}},
      {1, Event{{EventKind::DiskExpanded, 30.1, 12.0, 0.7}, EventSource::Truth}},
      {2, Metrics{{33.675, -5.319999, 1.120001, -0.5300004}}},
      {3, Ack{CommandAction::Detach}},
      {4, ErrorReply{"bad_cmd", "nope"}},
  };
  for (const auto& m : msgs) EXPECT_EQ(decode_server(nlohmann::json::parse(encode(m).dump())), m);
}

TEST(Session, IdleNavigationIsQuiet) {
  Session s(quiet_config());
  Session::Messages msgs;
  run_ticks(s, 40, &msgs);
  const auto telemetry = of_type<Telemetry>(msgs);
  ASSERT_EQ(telemetry.size(), 40u);
  for (const auto& t : telemetry) {
    EXPECT_EQ(t.sample.force, 0.0);
    EXPECT_EQ(t.phase, DeploymentPhase::Navigation);
  }
}

TEST(Session, OneTelemetryPerTick) {
  Session s(SessionConfig{});
  Session::Messages msgs;
  run_ticks(s, 400, &msgs);
  const auto telemetry = of_type<Telemetry>(msgs);
  ASSERT_EQ(telemetry.size(), 400u);
  for (std::size_t i = 1; i < telemetry.size(); ++i)
    EXPECT_NEAR(telemetry[i].sample.t - telemetry[i - 1].sample.t, 0.025, 1e-9);
}

TEST(Session, RetractAcknowledgedAndDisplacementFalls) {
  Session s(quiet_config());
  navigate(s);
  const auto reply = s.handle_message(R"({"type":"cmd","action":"retract","speed_mm_s":2})");
  ASSERT_EQ(reply.size(), 1u);
  EXPECT_EQ(std::get<Ack>(reply[0].payload).action, CommandAction::Retract);
  Session::Messages msgs;
  run_ticks(s, 100, &msgs);
  const auto telemetry = of_type<Telemetry>(msgs);
  for (std::size_t i = 1; i < telemetry.size(); ++i)
    EXPECT_LT(telemetry[i].sample.displacement, telemetry[i - 1].sample.displacement);
  EXPECT_GT(s.sim_state().sheath_retraction_mm, 0.0);
}

TEST(Session, DetachEmitsEventThenMetrics) {
  Session s(quiet_config(2));
  navigate(s);
  s.handle_message(R"({"type":"cmd","action":"retract","speed_mm_s":2})");
  run_ticks(s, 400);
  const auto msgs = s.handle_message(R"({"type":"cmd","action":"detach"})");
  ASSERT_GE(msgs.size(), 4u);
  EXPECT_TRUE(std::holds_alternative<Ack>(msgs[0].payload));
  EXPECT_TRUE(std::holds_alternative<Telemetry>(msgs[1].payload));
  const auto& last_event = std::get<Event>(msgs[msgs.size() - 2].payload);
  EXPECT_EQ(last_event.event.kind, EventKind::Detached);
  const auto& metrics = std::get<Metrics>(msgs.back().payload);
  EXPECT_EQ(metrics.metrics, trial_metrics(s.record()));
  EXPECT_TRUE(s.closed());
}

TEST(Session, NegativeSpeedRejectedWithoutStateChange) {
  Session s(quiet_config());
  const auto seq = s.next_seq();
  const auto before = s.sim_state();
  const auto reply = s.handle_message(R"({"type":"cmd","action":"advance","speed_mm_s":-3})");
  ASSERT_EQ(reply.size(), 1u);
  EXPECT_EQ(std::get<ErrorReply>(reply[0].payload).code, codes::kBadCmd);
  EXPECT_EQ(s.sim_state(), before);
  EXPECT_EQ(reply[0].seq, seq);
  // The rejected command did not replace the pending STOP.
  s.tick();
  EXPECT_EQ(s.sim_state().tip_displacement_mm, 0.0);
}

TEST(Session, DetachWhileNavigatingIsBadState) {
  Session s(quiet_config());
  const auto reply = s.handle_message(R"({"type":"cmd","action":"detach"})");
  EXPECT_EQ(std::get<ErrorReply>(reply.at(0).payload).code, codes::kBadState);
  EXPECT_FALSE(s.closed());
}

TEST(Session, ClosedAfterDetachUntilReset) {
  Session s(quiet_config());
  navigate(s);
  s.handle_message(R"({"type":"cmd","action":"retract","speed_mm_s":2})");
  s.tick();
  s.handle_message(R"({"type":"cmd","action":"detach"})");
  const auto reply = s.handle_message(R"({"type":"cmd","action":"advance","speed_mm_s":1})");
  EXPECT_EQ(std::get<ErrorReply>(reply.at(0).payload).code, codes::kSessionClosed);
  EXPECT_TRUE(s.tick().empty());

  const auto reset = s.handle_message(R"({"type":"cmd","action":"reset","preset":3,"seed":5})");
  EXPECT_EQ(std::get<Ack>(reset.at(0).payload).action, CommandAction::Reset);
  EXPECT_FALSE(s.closed());
  EXPECT_TRUE(s.record().samples.empty());
  EXPECT_EQ(s.record().meta.preset_id, 3);
  EXPECT_EQ(s.tick().size(), 1u);
}

TEST(Session, SequenceNumbersAreGapless) {
  Session s(SessionConfig{});
  std::uint64_t expected = 0;
  auto check = [&](const Session::Messages& msgs) {
    for (const auto& m : msgs) EXPECT_EQ(m.seq, expected++);
  };
  check(s.handle_message(R"({"type":"cmd","action":"advance","speed_mm_s":10})"));
  for (int i = 0; i < 160; ++i) check(s.tick());
  check(s.handle_message("garbage"));
  check(s.handle_message(R"({"type":"cmd","action":"retract","speed_mm_s":3})"));
  for (int i = 0; i < 600; ++i) check(s.tick());
  check(s.handle_message(R"({"type":"cmd","action":"detach"})"));
  EXPECT_EQ(s.next_seq(), expected);
}

TEST(Session, OnlineEventsEqualOfflineDetection) {
  for (int preset : {1, 5, 9}) {
    SessionConfig cfg;
    cfg.preset_id = preset;
    cfg.seed = 40 + preset;
    Session s(cfg);
    const auto p = reference_preset(preset);
    Session::Messages msgs;
    s.handle_message(R"({"type":"cmd","action":"advance","speed_mm_s":10})");
    run_ticks(s, 160, &msgs);
    s.handle(ClientCommand{CommandAction::Retract, p.retraction_speed_mm_s, {}, {}, {}});
    run_ticks(s, static_cast<int>(38.0 / p.retraction_speed_mm_s / 0.025) + 2, &msgs);
    s.handle_message(R"({"type":"cmd","action":"stop"})");
    run_ticks(s, 60, &msgs);
    const auto tail = s.handle_message(R"({"type":"cmd","action":"detach"})");
    msgs.insert(msgs.end(), tail.begin(), tail.end());

    std::vector<PhaseEvent> wire;
    for (const auto& e : of_type<Event>(msgs))
      if (e.event.kind != EventKind::Detached) wire.push_back(e.event);
    EXPECT_EQ(wire, detect_offline(s.record().samples)) << "preset " << preset;
  }
}

TEST(Session, TruthEventsOnlyWhenExposed) {
  for (bool expose : {false, true}) {
    auto cfg = quiet_config();
    cfg.expose_truth = expose;
    Session s(cfg);
    Session::Messages msgs;
    navigate(s);
    s.handle_message(R"({"type":"cmd","action":"retract","speed_mm_s":5})");
    run_ticks(s, 400, &msgs);
    bool saw_truth = false;
    for (const auto& e : of_type<Event>(msgs)) saw_truth |= e.source == EventSource::Truth;
    EXPECT_EQ(saw_truth, expose);
  }
}

TEST(Session, DistinctSeedsGiveDistinctStreams) {
  SessionConfig a, b;
  b.seed = 1;
  Session sa(a), sb(b);
  run_ticks(sa, 20);
  run_ticks(sb, 20);
  EXPECT_NE(sa.record().samples, sb.record().samples);
}

TEST(Session, WireMetricsEqualPersistedRecordMetrics) {
  TempDir tmp;
  SessionConfig cfg;
  cfg.seed = 8;
  Session s(cfg);
  navigate(s);
  s.handle_message(R"({"type":"cmd","action":"retract","speed_mm_s":4})");
  run_ticks(s, 400);
  const auto tail = s.handle_message(R"({"type":"cmd","action":"detach"})");
  const auto wire = std::get<Metrics>(tail.back().payload).metrics;
  const auto bundle = write_record(s.record(), tmp.path());
  const auto decoded = std::get<Metrics>(
      decode_server(nlohmann::json::parse(encode(tail.back()).dump())).payload).metrics;
  EXPECT_EQ(decoded, wire);
  EXPECT_EQ(trial_metrics(read_record(bundle.dir)), wire);
}

TEST(SessionConfig, AppliesJsonOverrides) {
  const auto cfg = apply_config(nlohmann::json::parse(R"({
    "preset": 4, "seed": 12, "expose_truth": true,
    "sim": {"deploy_noise_sigma_N": 0.05},
    "detector": {"smoothing_window_samples": 9},
    "spec": {"residual_force_N": 0.3}
  })"));
  EXPECT_EQ(cfg.preset_id, 4);
  EXPECT_EQ(cfg.seed, 12u);
  EXPECT_EQ(cfg.sim.seed, 12u);
  EXPECT_TRUE(cfg.expose_truth);
  EXPECT_EQ(cfg.sim.deploy_noise_sigma_N, 0.05);
  EXPECT_EQ(cfg.detector.smoothing_window_samples, 9);
  ASSERT_TRUE(cfg.custom_spec.has_value());
  EXPECT_EQ(cfg.resolve_spec().residual_force_N, 0.3);
  EXPECT_EQ(cfg.resolve_spec().lobe, reference_preset(4).spec.lobe);
}

TEST(SessionConfig, RejectsInvalidConfig) {
  auto code = [](const char* text) {
    try {
      apply_config(nlohmann::json::parse(text));
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  EXPECT_EQ(code(R"({"preset": 11})"), ErrorCode::InvalidArgument);
  EXPECT_EQ(code(R"({"sim": {"dt": -1}})"), ErrorCode::InvalidConfig);
  EXPECT_EQ(code(R"({"spec": {"bogus": 1}})"), ErrorCode::InvalidConfig);
  EXPECT_EQ(code(R"({"seed": "abc"})"), ErrorCode::InvalidConfig);
  EXPECT_EQ(code(R"([1, 2])"), ErrorCode::InvalidConfig);
}

TEST(SessionConfig, LoadsFromFile) {
  TempDir tmp;
  const auto path = tmp / "session.json";
  std::ofstream(path) << R"({"preset": 7, "seed": 3})";
  const auto cfg = load_session_config(path);
  EXPECT_EQ(cfg.preset_id, 7);
  EXPECT_EQ(cfg.seed, 3u);
  EXPECT_THROW(load_session_config(tmp / "missing.json"), Error);
}
