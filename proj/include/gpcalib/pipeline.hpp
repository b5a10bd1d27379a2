#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gpcalib/gp_trajectory.hpp"
#include "gpcalib/registration.hpp"
#include "gpcalib/temporal_align.hpp"

namespace gpcalib {

// Sensor-level delay convention used by the pipeline, reports and the CLI:
// an event stamped t2 by sensor 2 is stamped t2 + delay_s by sensor 1.
// The anchor-relative DelayEstimate is converted accordingly.

enum class AnchorChoice { kAuto, kSensor1, kSensor2 };

enum class CalibrationStatus {
  kOk,
  kNotConverged,
  kUnobservable,
  kInsufficientOverlap,
  kDegenerateGeometry,
};

const char* to_string(CalibrationStatus status);
CalibrationStatus status_from_string(const std::string& s);
const char* to_string(AnchorChoice anchor);
AnchorChoice anchor_from_string(const std::string& s);

struct PipelineConfig {
  double qc = MotionPrior::kDefaultQc;  // m^2/s^5, isotropic
  DelayConfig delay;                    // initial_delay in the sensor convention
  AnchorChoice anchor = AnchorChoice::kAuto;
};

/// 1 or 2. Auto picks the sensor with the lower mean sample rate, ties
/// (relative difference below 1e-9) go to sensor 1.
int select_anchor(const MeasurementSet& sensor1, const MeasurementSet& sensor2,
                  AnchorChoice choice);

struct CalibrationResult {
  CalibrationStatus status = CalibrationStatus::kOk;
  std::string message;
  int anchor_sensor = 1;
  double delay_s = 0.0;
  DelayEstimate estimate;                       // anchor-relative
  std::optional<RegistrationResult> extrinsic;  // sensor 2 -> sensor 1
  double regression_seconds = 0.0;
  double optimization_seconds = 0.0;
};

/// Regression of both tracks (run concurrently), delay estimation from the
/// selected anchor, correspondences and closed-form registration.
CalibrationResult calibrate(const MeasurementSet& sensor1,
                            const MeasurementSet& sensor2,
                            const PipelineConfig& cfg);

/// Temporal cost at each delay given in the sensor convention.
std::vector<CostSample> sensor_cost_curve(const MeasurementSet& sensor1,
                                          const MeasurementSet& sensor2,
                                          const PipelineConfig& cfg,
                                          std::span<const double> delays_s);

}  // namespace gpcalib
