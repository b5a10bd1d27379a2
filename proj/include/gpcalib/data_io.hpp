#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gpcalib/gp_trajectory.hpp"
#include "gpcalib/pipeline.hpp"
#include "gpcalib/registration.hpp"
#include "gpcalib/sim_harness.hpp"
#include "gpcalib/temporal_align.hpp"

namespace gpcalib {

inline constexpr const char* kToolVersion = "0.1.0";

/// Trajectory files are comma separated, UTF-8, '.' decimal point. Lines
/// starting with '#' and blank lines are ignored. The first remaining line is
/// the header:
///
///   timestamp_s,x_m,y_m,z_m[,sigma_m]
///
/// sigma_m is an isotropic position standard deviation in meters. Files
/// whose header omits it use `default_sigma` for every row. ParseError
/// columns count comma-separated fields from 1.
MeasurementSet parse_trajectory(std::istream& in, const std::string& sensor_id,
                                double default_sigma);
MeasurementSet parse_trajectory_file(const std::string& path,
                                     double default_sigma);

/// Writes the header and one row per measurement with 17 significant digits.
/// Throws ValidationError for anisotropic noise covariances.
void write_trajectory(std::ostream& out, const MeasurementSet& data);
void write_trajectory_file(const std::string& path, const MeasurementSet& data);

struct Provenance {
  std::string sensor1_file;
  std::string sensor2_file;
  std::string config_hash;
  std::string tool_version = kToolVersion;

  bool operator==(const Provenance&) const = default;
};

struct CalibrationReport {
  std::string status = "ok";
  std::string message;
  int anchor_sensor = 1;
  double delay_s = 0.0;  // sensor-1 stamp = sensor-2 stamp + delay_s
  DelayEstimate delay;   // anchor-relative
  std::optional<RegistrationResult> extrinsic;
  Provenance provenance;

  bool operator==(const CalibrationReport&) const;
};

CalibrationReport make_report(const CalibrationResult& result,
                              Provenance provenance);

/// JSON document with a fixed key order and 17-significant-digit reals.
/// Throws ValidationError when any real is non-finite.
void write_report(std::ostream& out, const CalibrationReport& report);
std::string write_report(const CalibrationReport& report);
CalibrationReport parse_report(std::string_view text);

/// 64-bit FNV-1a of `text`, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view text);
/// Canonical text of the settings that influence a calibration.
std::string canonical_config(const PipelineConfig& cfg, double default_sigma);

/// Rows "delay_s,cost_m2_per_s2" preceded by that header line.
void write_cost_curve(std::ostream& out, std::span<const CostSample> samples);

/// Ground-truth sidecar of a simulated dataset (JSON).
void write_sim_sidecar(std::ostream& out, const SimConfig& cfg,
                       const SimDataset& data, std::uint64_t seed);

void write_monte_carlo_report(std::ostream& out, const MonteCarloReport& report);
/// Per-run rows as comma separated text.
void write_monte_carlo_runs(std::ostream& out, const MonteCarloReport& report);

}  // namespace gpcalib
