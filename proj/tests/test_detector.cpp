#include <gtest/gtest.h>

#include <cmath>

#include "occlusim/detector.hpp"
#include "occlusim/simulator.hpp"

using namespace occlusim;

namespace {

SimConfig noise(double sigma, std::uint64_t seed = 0) {
  SimConfig cfg;
  cfg.nav_noise_sigma_N = sigma;
  cfg.deploy_noise_sigma_N = sigma;
  cfg.seed = seed;
  return cfg;
}

std::vector<PhaseEvent> fold(std::span<const TelemetrySample> samples, const DetectorConfig& cfg = {}) {
  DetectorState st;
  std::vector<PhaseEvent> out;
  for (const auto& s : samples) {
    auto r = push(st, cfg, s);
    if (r.event) out.push_back(*r.event);
    st = std::move(r.state);
  }
  return out;
}

std::vector<TelemetrySample> flat(std::size_t n, double force) {
  std::vector<TelemetrySample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({quantize((i + 1) * 0.025), force, 0.0});
  return out;
}

}  // namespace

TEST(Detector, ConstantZeroYieldsNothing) { EXPECT_TRUE(detect_offline(flat(4000, 0.0)).empty()); }

TEST(Detector, EmptyTraceYieldsNothing) { EXPECT_TRUE(detect_offline({}).empty()); }

TEST(Detector, ZeroNoiseAllPresetsWithinHalfMillimetre) {
  for (const auto& p : reference_presets()) {
    const auto r = run_script(p, noise(0.0));
    const auto detected = detect_offline(r.samples);
    ASSERT_EQ(detected.size(), 3u) << "preset " << p.preset_id;
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_EQ(detected[i].kind, r.truth_events[i].kind);
      EXPECT_NEAR(detected[i].displacement, r.truth_events[i].displacement, 0.5)
          << "preset " << p.preset_id << " " << to_string(detected[i].kind);
    }
  }
}

TEST(Detector, Preset1SnapPeakValue) {
  const auto r = run_script(reference_preset(1), noise(0.0));
  const auto detected = detect_offline(r.samples);
  const auto* e2 = find_event(detected, EventKind::LobeExpanded);
  ASSERT_NE(e2, nullptr);
  EXPECT_NEAR(e2->force, 1.09, 0.05);
}

TEST(Detector, Preset5SmallDiskSnapDetected) {
  const auto r = run_script(reference_preset(5), noise(0.0));
  EXPECT_NE(find_event(detect_offline(r.samples), EventKind::DiskExpanded), nullptr);
}

TEST(Detector, OfflineEqualsFoldOfPush) {
  for (const auto& p : reference_presets()) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto r = run_script(p, noise(0.1, seed));
      EXPECT_EQ(detect_offline(r.samples), fold(r.samples)) << p.preset_id << "/" << seed;
    }
  }
}

TEST(Detector, PushIsPure) {
  DetectorState st;
  const DetectorState copy = st;
  (void)push(st, DetectorConfig{}, {0.025, -3.0, 0.0});
  EXPECT_EQ(st, copy);
}

TEST(Detector, EmissionLagAtMostTwoSeconds) {
  for (const auto& p : reference_presets()) {
    const auto r = run_script(p, noise(0.0));
    PhaseDetector d;
    for (const auto& s : r.samples) {
      if (auto e = d.push(s)) {
        EXPECT_LE(e->t, s.t);
        EXPECT_LE(s.t - e->t, 2.0) << "preset " << p.preset_id << " " << to_string(e->kind);
      }
    }
  }
}

TEST(Detector, PrefixEventsArePrefixOfFullEvents) {
  const auto r = run_script(reference_preset(7), noise(0.1, 3));
  const auto full = detect_offline(r.samples);
  for (std::size_t n = 0; n <= r.samples.size(); n += 97) {
    const auto partial = detect_offline(std::span(r.samples).first(n));
    ASSERT_LE(partial.size(), full.size());
    EXPECT_TRUE(std::equal(partial.begin(), partial.end(), full.begin()));
  }
}

TEST(Detector, NoisyEventsAlwaysOrdered) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto r = run_script(reference_preset(1 + seed % 10), noise(0.1, seed));
    EXPECT_NO_THROW(require_ordered(detect_offline(r.samples)));
  }
}

TEST(Detector, NoisyCompletenessSample) {
  int hits = 0, total = 0;
  for (const auto& p : reference_presets()) {
    for (std::uint64_t seed = 100; seed < 110; ++seed, ++total) {
      const auto r = run_script(p, noise(0.1, seed));
      const auto d = detect_offline(r.samples);
      bool ok = d.size() == 3;
      for (std::size_t i = 0; ok && i < 3; ++i) ok = std::abs(d[i].t - r.truth_events[i].t) <= 0.5;
      hits += ok;
    }
  }
  EXPECT_GE(hits, 95 * total / 100);
}

TEST(Detector, PureNoiseRarelyTriggers) {
  int false_streams = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Simulator sim(reference_preset(1).spec, noise(0.15, seed));
    PhaseDetector d;
    for (int i = 0; i < 2400; ++i) d.push(sim.step(OperatorCommand::stop()));
    false_streams += !d.events().empty();
  }
  EXPECT_LE(false_streams, 2);
}

TEST(Detector, OutOfOrderSampleRejected) {
  PhaseDetector d;
  d.push({0.05, 0.0, 0.0});
  try {
    d.push({0.05, 0.0, 0.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutOfOrderSample);
  }
}

TEST(Detector, OfflineRejectsInvalidTrace) {
  auto samples = flat(10, 0.0);
  samples[5].t = samples[4].t;
  EXPECT_THROW(detect_offline(samples), Error);
}

TEST(Detector, ZeroBandAnnotatesArgmax) {
  DetectorConfig cfg;
  cfg.smoothing_window_samples = 1;
  cfg.onset_debounce_samples = 1;
  cfg.peak_band_N = 0.0;
  std::vector<double> forces{0, -2, -2, 0, 1.0, 1.1, 1.05, 0.5};
  std::vector<TelemetrySample> s;
  for (std::size_t i = 0; i < forces.size(); ++i) s.push_back({quantize((i + 1) * 0.025), forces[i], double(i)});
  const auto events = detect_offline(s, cfg);
  ASSERT_EQ(events.size(), 2u);
  EXPECT_EQ(events[1].displacement, 5.0);
  EXPECT_EQ(events[1].force, 1.1);
}

TEST(Detector, ConfigValidation) {
  DetectorConfig cfg;
  cfg.smoothing_window_samples = 0;
  EXPECT_THROW(PhaseDetector{cfg}, Error);
  cfg = {};
  cfg.rebound2_delta_N = 2.0;
  EXPECT_THROW(PhaseDetector{cfg}, Error);
  cfg = {};
  cfg.peak_band_N = 0.5;
  EXPECT_THROW(PhaseDetector{cfg}, Error);
}
