#pragma once

// Command-line front end: simulate, analyze, replay, serve.

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "occlusim/analysis.hpp"
#include "occlusim/net/server.hpp"
#include "occlusim/occluder.hpp"
#include "occlusim/session.hpp"
#include "occlusim/simulator.hpp"
#include "occlusim/store.hpp"

namespace occlusim::cli {

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline DetectorConfig detector_config_from(const std::string& path) {
  if (path.empty()) return {};
  return load_session_config(path).detector;
}

struct SimulateOptions {
  std::vector<int> presets;
  std::optional<double> noise;
  std::uint64_t seed = 0;
  std::string out_dir = "records";
  bool overwrite = false;
  bool write = true;
};

inline int simulate(const SimulateOptions& opts, std::ostream& out) {
  std::vector<int> ids = opts.presets;
  if (ids.empty())
    for (int i = 1; i <= 10; ++i) ids.push_back(i);

  std::vector<LabeledMetrics> rows;
  std::vector<TrialMetrics> metrics;
  for (int id : ids) {
    const ReferencePreset preset = reference_preset(id);
    SimConfig cfg;
    cfg.seed = opts.seed + static_cast<std::uint64_t>(id);
    if (opts.noise) cfg.nav_noise_sigma_N = cfg.deploy_noise_sigma_N = *opts.noise;
    DeploymentRecord record = run_script(preset, cfg);
    record.meta.created_at = utc_timestamp();
    record.detected_events = detect_with_detach(record);
    const TrialMetrics m = trial_metrics(record);
    if (opts.write) {
      const auto bundle = write_record(record, opts.out_dir, opts.overwrite);
      out << "wrote " << bundle.dir.string() << '\n';
    }
    rows.push_back({record.meta.trial_id, m});
    metrics.push_back(m);
  }
  out << '\n' << format_table(rows) << '\n' << format_aggregate(aggregate(metrics));
  return 0;
}

struct AnalyzeOptions {
  std::vector<std::string> paths;
  std::string plot_data;
  std::string summary;
  std::string config;
};

inline int analyze(const AnalyzeOptions& opts, std::ostream& out, std::ostream& err) {
  std::vector<fs::path> dirs;
  for (const auto& p : opts.paths)
    for (auto& d : find_records(p)) dirs.push_back(std::move(d));
  if (dirs.empty()) {
    err << "error: no records found\n";
    return 1;
  }
  const DetectorConfig det = detector_config_from(opts.config);

  std::vector<AnalyzedTrial> trials;
  for (const auto& dir : dirs) {
    std::vector<std::string> warnings;
    auto record = read_record(dir, warnings);
    for (const auto& w : warnings) err << "warning: " << w << '\n';
    trials.push_back(analyze_record(std::move(record), det));
  }

  std::vector<LabeledMetrics> rows;
  std::vector<TrialMetrics> metrics;
  for (const auto& t : trials) {
    rows.push_back({t.record.meta.trial_id, t.metrics});
    metrics.push_back(t.metrics);
  }
  const auto agg = aggregate(metrics);
  out << format_table(rows) << '\n' << format_aggregate(agg) << '\n';

  out << "detected events (t [s] / disp [mm] / F [N])\n";
  for (const auto& t : trials) {
    out << "  " << t.record.meta.trial_id << ':';
    for (const auto& e : t.record.detected_events) {
      char buf[96];
      std::snprintf(buf, sizeof buf, " %s@%.2f/%.2f/%.2f", std::string(to_string(e.kind)).substr(0, 2).c_str(),
                    e.t, e.displacement, e.force);
      out << buf;
    }
    out << '\n';
  }

  if (!opts.plot_data.empty()) {
    std::ofstream plot(opts.plot_data);
    if (!plot) throw Error(ErrorCode::Io, "cannot write " + opts.plot_data);
    plot << "trial_id,t_s,disp_mm,force_N\n";
    for (const auto& t : trials)
      for (const auto& s : t.record.samples) {
        char buf[128];
        std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f\n", s.t, s.displacement, s.force);
        plot << t.record.meta.trial_id << buf;
      }
  }
  if (!opts.summary.empty()) {
    std::ofstream summary(opts.summary);
    if (!summary) throw Error(ErrorCode::Io, "cannot write " + opts.summary);
    summary << summary_json(trials, agg).dump(2) << '\n';
  }
  return 0;
}

inline int replay_cmd(const std::string& path, double speed, std::ostream& out) {
  const auto record = read_record(path);
  auto stream = replay(record, speed);
  out << kSamplesHeader << '\n';
  while (auto s = stream.next()) out << format_sample_row(*s) << '\n' << std::flush;
  return 0;
}

struct ServeOptions {
  unsigned short port = 0;
  std::string address = "0.0.0.0";
  std::string config;
  std::string record_dir;
  std::string static_dir;
  std::optional<int> preset;
  std::optional<std::uint64_t> seed;
  int threads = 2;
};

inline int serve(const ServeOptions& opts, std::ostream& out) {
  net::ServerOptions sopts;
  sopts.address = opts.address;
  sopts.port = opts.port;
  sopts.threads = opts.threads;
  if (!opts.config.empty()) sopts.session = load_session_config(opts.config);
  if (opts.preset) sopts.session = apply_config({{"preset", *opts.preset}}, sopts.session);
  if (opts.seed) sopts.session.seed = *opts.seed;
  if (!opts.record_dir.empty()) sopts.record_dir = opts.record_dir;
  if (!opts.static_dir.empty()) sopts.static_dir = opts.static_dir;
  sopts.log = [](const std::string& line) { std::clog << line << '\n'; };

  net::Server server(std::move(sopts));
  out << "listening on " << opts.address << ':' << server.port() << std::endl;
  server.stop_on_signals();
  server.run();
  return 0;
}

/// Entry point shared by the binary and the tests. Returns the exit status.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Occluder deployment simulator and telemetry analyzer", "occlusim"};
  app.require_subcommand(1);

  SimulateOptions sim_opts;
  double noise = -1.0;
  auto* sim = app.add_subcommand("simulate", "Run the scripted reference trials and write record bundles");
  sim->add_option("--presets", sim_opts.presets, "Preset ids (default: all 10)")->delimiter(',')->check(CLI::Range(1, 10));
  sim->add_option("--noise", noise, "Force noise sigma [N] for navigation and deployment")->check(CLI::NonNegativeNumber);
  sim->add_option("--seed", sim_opts.seed, "Base seed (trial seed = base + preset id)");
  sim->add_option("--out", sim_opts.out_dir, "Output directory")->capture_default_str();
  sim->add_flag("--overwrite", sim_opts.overwrite, "Replace existing bundles");
  sim->add_flag("--no-write", "Print metrics without writing bundles");

  AnalyzeOptions an_opts;
  auto* an = app.add_subcommand("analyze", "Detect phases and report metrics for record bundles");
  an->add_option("paths", an_opts.paths, "Record directories or directories of records")->required();
  an->add_option("--plot-data", an_opts.plot_data, "Write force/displacement CSV with a time column");
  an->add_option("--summary", an_opts.summary, "Write a JSON summary");
  an->add_option("--config", an_opts.config, "Session config file (detector section is used)");

  std::string replay_path;
  double replay_speed = 1.0;
  auto* rp = app.add_subcommand("replay", "Stream a recorded trace at its acquisition pace");
  rp->add_option("path", replay_path, "Record directory")->required();
  rp->add_option("--speed", replay_speed, "Speed factor (0 = as fast as possible)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  ServeOptions sv_opts;
  sv_opts.port = net::default_port();
  int preset = 0;
  std::uint64_t seed = 0;
  auto* sv = app.add_subcommand("serve", "Serve live sessions over WebSocket");
  sv->add_option("--port", sv_opts.port, std::string("TCP port (env ") + net::kPortEnvVar + ")")->capture_default_str();
  sv->add_option("--address", sv_opts.address, "Bind address")->capture_default_str();
  sv->add_option("--config", sv_opts.config, "Session config file (JSON)");
  sv->add_option("--record-dir", sv_opts.record_dir, "Persist each detached session here");
  sv->add_option("--static", sv_opts.static_dir, "Serve console assets from this directory");
  auto* preset_opt = sv->add_option("--preset", preset, "Default preset id")->check(CLI::Range(1, 10));
  auto* seed_opt = sv->add_option("--seed", seed, "Base seed");
  sv->add_option("--threads", sv_opts.threads, "I/O threads")->check(CLI::PositiveNumber)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*sim) {
      if (noise >= 0.0) sim_opts.noise = noise;
      sim_opts.write = sim->count("--no-write") == 0;
      return simulate(sim_opts, out);
    }
    if (*an) return analyze(an_opts, out, err);
    if (*rp) return replay_cmd(replay_path, replay_speed, out);
    if (*sv) {
      if (preset_opt->count()) sv_opts.preset = preset;
      if (seed_opt->count()) sv_opts.seed = seed;
      return serve(sv_opts, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace occlusim::cli
