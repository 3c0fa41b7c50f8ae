#pragma once

// Quasi-static axial force law of the occluder/sheath interaction.
//
// F depends only on the relative sheath retraction x (mm). Each element
// (lobe, waist, disk) contributes a compressive linear ramp while it is
// squeezed out of the sheath, a linear recovery back to zero, and an
// optional half-sine tensile snap as it self-expands. A settle segment then
// ramps linearly to the residual axial force.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "occlusim/error.hpp"

namespace occlusim {

struct ElementLaw {
  double onset_mm = 0.0;
  double compression_span_mm = 1.0;
  double compression_depth_N = 0.0;
  double recovery_span_mm = 1.0;
  double snap_span_mm = 0.0;
  double snap_amplitude_N = 0.0;

  double end_mm() const {
    return onset_mm + compression_span_mm + recovery_span_mm + snap_span_mm;
  }
  double ramp_end_mm() const { return onset_mm + compression_span_mm; }
  double snap_peak_mm() const {
    return onset_mm + compression_span_mm + recovery_span_mm + 0.5 * snap_span_mm;
  }

  friend bool operator==(const ElementLaw&, const ElementLaw&) = default;
};

struct OccluderSpec {
  ElementLaw lobe;
  ElementLaw waist;
  ElementLaw disk;
  double settle_span_mm = 3.0;
  double residual_force_N = 0.0;

  double disk_end_mm() const { return disk.end_mm(); }
  double total_retraction_mm() const { return disk.end_mm() + settle_span_mm; }

  friend bool operator==(const OccluderSpec&, const OccluderSpec&) = default;
};

struct ReferenceMetrics {
  double duration_s;
  double min_force_N;
  double max_force_N;
  double final_force_N;
};

struct ReferencePreset {
  int preset_id;
  OccluderSpec spec;
  double retraction_speed_mm_s;
  double post_deploy_wait_s;
  ReferenceMetrics targets;
};

namespace detail {
inline bool finite(double v) { return std::isfinite(v); }
}  // namespace detail

inline void validate(const ElementLaw& law, const char* name = "element") {
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::InvalidSpec, std::string(name) + ": " + what);
  };
  if (!detail::finite(law.onset_mm)) fail("onset not finite");
  if (!(law.compression_span_mm > 0.0) || !detail::finite(law.compression_span_mm))
    fail("compression span must be > 0");
  if (!(law.recovery_span_mm > 0.0) || !detail::finite(law.recovery_span_mm))
    fail("recovery span must be > 0");
  if (!(law.snap_span_mm >= 0.0) || !detail::finite(law.snap_span_mm))
    fail("snap span must be >= 0");
  if (!(law.compression_depth_N >= 0.0) || !detail::finite(law.compression_depth_N))
    fail("compression depth must be finite and >= 0");
  if (!(law.snap_amplitude_N >= 0.0) || !detail::finite(law.snap_amplitude_N))
    fail("snap amplitude must be finite and >= 0");
}

inline void validate(const OccluderSpec& spec) {
  validate(spec.lobe, "lobe");
  validate(spec.waist, "waist");
  validate(spec.disk, "disk");
  if (spec.waist.snap_span_mm != 0.0)
    throw Error(ErrorCode::InvalidSpec, "waist has no snap (snap span must be 0)");
  if (spec.lobe.onset_mm < 0.0) throw Error(ErrorCode::InvalidSpec, "lobe onset must be >= 0");
  if (spec.lobe.end_mm() > spec.waist.onset_mm)
    throw Error(ErrorCode::InvalidSpec, "lobe overlaps waist");
  if (spec.waist.end_mm() > spec.disk.onset_mm)
    throw Error(ErrorCode::InvalidSpec, "waist overlaps disk");
  if (!(spec.settle_span_mm > 0.0) || !detail::finite(spec.settle_span_mm))
    throw Error(ErrorCode::InvalidSpec, "settle span must be > 0");
  if (!detail::finite(spec.residual_force_N))
    throw Error(ErrorCode::InvalidSpec, "residual force not finite");
  if (!(spec.lobe.compression_depth_N > spec.waist.compression_depth_N) ||
      !(spec.lobe.compression_depth_N > spec.disk.compression_depth_N))
    throw Error(ErrorCode::InvalidSpec, "lobe must carry the deepest compression");
}

namespace detail {
inline double element_force_unchecked(const ElementLaw& law, double x) {
  const double p = x - law.onset_mm;
  const double c = law.compression_span_mm;
  const double r = law.recovery_span_mm;
  const double s = law.snap_span_mm;
  if (p < 0.0) return 0.0;
  if (p < c) return -(law.compression_depth_N / c) * p;
  if (p < c + r) return -law.compression_depth_N * (1.0 - (p - c) / r);
  if (s > 0.0 && p < c + r + s)
    return law.snap_amplitude_N * std::sin(std::numbers::pi * (p - c - r) / s);
  return 0.0;
}

inline double axial_force_unchecked(const OccluderSpec& spec, double x) {
  if (x <= 0.0) return 0.0;
  double f = element_force_unchecked(spec.lobe, x) + element_force_unchecked(spec.waist, x) +
             element_force_unchecked(spec.disk, x);
  const double settle_start = spec.disk_end_mm();
  if (x >= spec.total_retraction_mm()) {
    f += spec.residual_force_N;
  } else if (x >= settle_start) {
    f += spec.residual_force_N * (x - settle_start) / spec.settle_span_mm;
  }
  return f;
}
}  // namespace detail

inline double element_force(const ElementLaw& law, double x) {
  validate(law);
  return detail::element_force_unchecked(law, x);
}

inline double axial_force(const OccluderSpec& spec, double x) {
  validate(spec);
  return detail::axial_force_unchecked(spec, x);
}

/// Validates once, then evaluates without re-checking. Use in hot loops.
class ForceLaw {
 public:
  explicit ForceLaw(OccluderSpec spec) : spec_(std::move(spec)) { validate(spec_); }

  double operator()(double x) const { return detail::axial_force_unchecked(spec_, x); }
  const OccluderSpec& spec() const { return spec_; }

  /// Largest slope magnitude over all linear segments and half-sine snaps.
  double lipschitz_bound() const {
    double bound = 0.0;
    for (const ElementLaw* e : {&spec_.lobe, &spec_.waist, &spec_.disk}) {
      bound = std::max(bound, e->compression_depth_N / e->compression_span_mm);
      bound = std::max(bound, e->compression_depth_N / e->recovery_span_mm);
      if (e->snap_span_mm > 0.0)
        bound = std::max(bound, e->snap_amplitude_N * std::numbers::pi / e->snap_span_mm);
    }
    return std::max(bound, std::abs(spec_.residual_force_N) / spec_.settle_span_mm);
  }

 private:
  OccluderSpec spec_;
};

/// Retraction at which the lobe ramp first reaches `threshold_N` (< 0).
/// Clamped to the ramp end when the lobe never gets that deep.
inline double lobe_onset_retraction(const OccluderSpec& spec, double threshold_N) {
  const auto& lobe = spec.lobe;
  if (lobe.compression_depth_N <= 0.0) return lobe.ramp_end_mm();
  const double frac = std::min(1.0, std::abs(threshold_N) / lobe.compression_depth_N);
  return lobe.onset_mm + lobe.compression_span_mm * frac;
}

inline double lobe_snap_peak_retraction(const OccluderSpec& spec) {
  return spec.lobe.snap_peak_mm();
}

inline double disk_snap_peak_retraction(const OccluderSpec& spec) {
  return spec.disk.snap_peak_mm();
}

inline constexpr double kWaistDipN = 0.4;
inline constexpr double kDiskDipN = 0.8;
inline constexpr double kPostDeployWaitS = 2.0;

/// Default element geometry; the amplitude fields are filled per trial.
inline OccluderSpec default_geometry() {
  OccluderSpec spec;
  spec.lobe = {0.0, 12.0, 0.0, 3.0, 3.0, 0.0};
  spec.waist = {18.0, 4.0, kWaistDipN, 2.0, 0.0, 0.0};
  spec.disk = {24.0, 6.0, kDiskDipN, 2.0, 3.0, 0.0};
  spec.settle_span_mm = 3.0;
  return spec;
}

/// One preset per row of the ten-trial deployment table.
inline std::vector<ReferencePreset> reference_presets() {
  static constexpr std::array<ReferenceMetrics, 10> kRows = {{
      {18.85, -2.28, 1.09, -0.91},
      {33.68, -5.32, 1.12, -0.53},
      {34.98, -2.37, 0.62, -0.12},
      {32.50, -2.34, 4.25, 0.16},
      {27.23, -4.36, 0.05, -2.06},
      {33.48, -4.37, 1.06, 0.43},
      {33.58, -2.28, 1.74, 0.70},
      {44.90, -2.36, 1.76, 0.15},
      {33.85, -2.63, 1.11, -0.37},
      {34.98, -2.37, 0.62, -0.12},
  }};
  std::vector<ReferencePreset> presets;
  presets.reserve(kRows.size());
  for (std::size_t i = 0; i < kRows.size(); ++i) {
    const auto& row = kRows[i];
    OccluderSpec spec = default_geometry();
    spec.lobe.compression_depth_N = std::abs(row.min_force_N);
    spec.lobe.snap_amplitude_N = row.max_force_N;
    spec.disk.snap_amplitude_N = std::max(0.8 * row.max_force_N, 0.02);
    spec.residual_force_N = row.final_force_N;
    const double speed = spec.total_retraction_mm() / (row.duration_s - kPostDeployWaitS);
    presets.push_back({static_cast<int>(i + 1), spec, speed, kPostDeployWaitS, row});
  }
  return presets;
}

inline ReferencePreset reference_preset(int preset_id) {
  if (preset_id < 1 || preset_id > 10)
    throw Error(ErrorCode::InvalidArgument, "preset id must be 1..10, got " + std::to_string(preset_id));
  return reference_presets()[static_cast<std::size_t>(preset_id - 1)];
}

/// Flattened key/value view, used for record metadata and config files.
inline std::map<std::string, double> to_parameters(const OccluderSpec& spec) {
  std::map<std::string, double> out;
  auto put = [&](const std::string& prefix, const ElementLaw& e) {
    out[prefix + ".onset_mm"] = e.onset_mm;
    out[prefix + ".compression_span_mm"] = e.compression_span_mm;
    out[prefix + ".compression_depth_N"] = e.compression_depth_N;
    out[prefix + ".recovery_span_mm"] = e.recovery_span_mm;
    out[prefix + ".snap_span_mm"] = e.snap_span_mm;
    out[prefix + ".snap_amplitude_N"] = e.snap_amplitude_N;
  };
  put("lobe", spec.lobe);
  put("waist", spec.waist);
  put("disk", spec.disk);
  out["settle_span_mm"] = spec.settle_span_mm;
  out["residual_force_N"] = spec.residual_force_N;
  return out;
}

inline OccluderSpec spec_from_parameters(const std::map<std::string, double>& params) {
  auto get = [&](const std::string& key) {
    auto it = params.find(key);
    if (it == params.end()) throw Error(ErrorCode::InvalidSpec, "missing parameter " + key);
    return it->second;
  };
  auto element = [&](const std::string& prefix) {
    return ElementLaw{get(prefix + ".onset_mm"),         get(prefix + ".compression_span_mm"),
                      get(prefix + ".compression_depth_N"), get(prefix + ".recovery_span_mm"),
                      get(prefix + ".snap_span_mm"),      get(prefix + ".snap_amplitude_N")};
  };
  OccluderSpec spec{element("lobe"), element("waist"), element("disk"), get("settle_span_mm"),
                    get("residual_force_N")};
  validate(spec);
  return spec;
}

}  // namespace occlusim
