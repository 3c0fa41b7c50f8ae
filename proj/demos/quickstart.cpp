// Simulates one preset with sensor noise, segments it and prints the metrics.

#include <cstdio>

#include "occlusim/occlusim.hpp"

int main() {
  using namespace occlusim;

  SimConfig cfg;
  cfg.seed = 42;
  const auto preset = reference_preset(2);
  DeploymentRecord record = run_script(preset, cfg);

  const auto analyzed = analyze_record(record);
  for (const auto& e : analyzed.record.detected_events) {
    const PhaseEvent* truth = find_event(record.truth_events, e.kind);
    std::printf("%-18s t=%7.3f s  disp=%6.2f mm  F=%6.2f N  (truth t=%7.3f s)\n",
                std::string(to_string(e.kind)).c_str(), e.t, e.displacement, e.force,
                truth ? truth->t : -1.0);
  }
  const auto& m = analyzed.metrics;
  std::printf("\nduration %.2f s  min F %.2f N  max F %.2f N  final F %.2f N\n", m.duration_s,
              m.min_force_N, m.max_force_N, m.final_force_N);
  std::printf("table row: %.2f s  %.2f N  %.2f N  %.2f N\n", preset.targets.duration_s,
              preset.targets.min_force_N, preset.targets.max_force_N, preset.targets.final_force_N);
}
