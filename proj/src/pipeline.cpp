#include "gpcalib/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>

#include "gpcalib/errors.hpp"

namespace gpcalib {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Anchor-relative delay d (other = anchor + d) from the sensor-level delay.
double to_anchor_delay(double delay_s, int anchor_sensor) {
  return anchor_sensor == 1 ? -delay_s : delay_s;
}

double to_sensor_delay(double anchor_delay, int anchor_sensor) {
  // + 0.0 folds a negated zero back to +0
  return (anchor_sensor == 1 ? -anchor_delay : anchor_delay) + 0.0;
}

struct TrajectoryPair {
  GPTrajectory sensor1;
  GPTrajectory sensor2;
};

TrajectoryPair regress_both(const MeasurementSet& sensor1,
                            const MeasurementSet& sensor2, double qc) {
  auto second = std::async(std::launch::async, [&] {
    return regress(sensor2, MotionPrior::for_measurements(sensor2, qc));
  });
  GPTrajectory first = regress(sensor1, MotionPrior::for_measurements(sensor1, qc));
  return {std::move(first), second.get()};
}

}  // namespace

const char* to_string(CalibrationStatus status) {
  switch (status) {
    case CalibrationStatus::kOk: return "ok";
    case CalibrationStatus::kNotConverged: return "not_converged";
    case CalibrationStatus::kUnobservable: return "unobservable";
    case CalibrationStatus::kInsufficientOverlap: return "insufficient_overlap";
    case CalibrationStatus::kDegenerateGeometry: return "degenerate_geometry";
  }
  return "unknown";
}

CalibrationStatus status_from_string(const std::string& s) {
  for (auto st : {CalibrationStatus::kOk, CalibrationStatus::kNotConverged,
                  CalibrationStatus::kUnobservable,
                  CalibrationStatus::kInsufficientOverlap,
                  CalibrationStatus::kDegenerateGeometry}) {
    if (s == to_string(st)) return st;
  }
  throw InvalidArgument("unknown calibration status '" + s + "'");
}

const char* to_string(AnchorChoice anchor) {
  switch (anchor) {
    case AnchorChoice::kAuto: return "auto";
    case AnchorChoice::kSensor1: return "sensor1";
    case AnchorChoice::kSensor2: return "sensor2";
  }
  return "auto";
}

AnchorChoice anchor_from_string(const std::string& s) {
  if (s == "auto") return AnchorChoice::kAuto;
  if (s == "sensor1") return AnchorChoice::kSensor1;
  if (s == "sensor2") return AnchorChoice::kSensor2;
  throw InvalidArgument("anchor must be one of auto, sensor1, sensor2");
}

int select_anchor(const MeasurementSet& sensor1, const MeasurementSet& sensor2,
                  AnchorChoice choice) {
  switch (choice) {
    case AnchorChoice::kSensor1: return 1;
    case AnchorChoice::kSensor2: return 2;
    case AnchorChoice::kAuto: break;
  }
  const double r1 = sensor1.mean_sample_rate();
  const double r2 = sensor2.mean_sample_rate();
  if (std::abs(r1 - r2) <= 1e-9 * std::max(r1, r2)) return 1;
  return r2 < r1 ? 2 : 1;
}

CalibrationResult calibrate(const MeasurementSet& sensor1,
                            const MeasurementSet& sensor2,
                            const PipelineConfig& cfg) {
  cfg.delay.validate();
  CalibrationResult out;
  out.anchor_sensor = select_anchor(sensor1, sensor2, cfg.anchor);

  const auto t_reg = Clock::now();
  TrajectoryPair trajs = regress_both(sensor1, sensor2, cfg.qc);
  out.regression_seconds = seconds_since(t_reg);

  const GPTrajectory& anchor = out.anchor_sensor == 1 ? trajs.sensor1 : trajs.sensor2;
  const GPTrajectory& other = out.anchor_sensor == 1 ? trajs.sensor2 : trajs.sensor1;

  DelayConfig dcfg = cfg.delay;
  dcfg.initial_delay = to_anchor_delay(cfg.delay.initial_delay, out.anchor_sensor);

  const auto t_opt = Clock::now();
  try {
    out.estimate = estimate_delay(anchor, other, dcfg);
  } catch (const InsufficientOverlap& e) {
    out.optimization_seconds = seconds_since(t_opt);
    out.status = CalibrationStatus::kInsufficientOverlap;
    out.message = e.what();
    return out;
  }
  out.optimization_seconds = seconds_since(t_opt);
  out.delay_s = to_sensor_delay(out.estimate.delay, out.anchor_sensor);

  if (out.estimate.unobservable) {
    out.status = CalibrationStatus::kUnobservable;
    out.message =
        "time delay is unobservable: the velocity magnitude barely changes";
  } else if (!out.estimate.converged) {
    out.status = CalibrationStatus::kNotConverged;
    out.message = "delay optimization did not converge";
  }

  try {
    const auto pairs = build_correspondences(anchor, other, out.estimate.delay);
    RegistrationResult reg = register_pairs(pairs);
    if (out.anchor_sensor == 2) {
      // pairs aligned sensor 1 onto sensor 2
      reg.transform = reg.transform.inverse();
      reg.euler_zyx = reg.transform.euler_zyx_deg();
      std::vector<Vec3> target, source;
      for (const auto& p : pairs) {
        target.push_back(p.other_state.position);
        source.push_back(p.anchor_state.position);
      }
      reg.rms_residual = std::sqrt(registration_cost(target, source, reg.transform) /
                                   static_cast<double>(pairs.size()));
    }
    out.extrinsic = reg;
  } catch (const Error& e) {
    if (out.status == CalibrationStatus::kOk) {
      out.status = CalibrationStatus::kDegenerateGeometry;
      out.message = e.what();
    } else {
      out.message += std::string("; ") + e.what();
    }
  }
  return out;
}

std::vector<CostSample> sensor_cost_curve(const MeasurementSet& sensor1,
                                          const MeasurementSet& sensor2,
                                          const PipelineConfig& cfg,
                                          std::span<const double> delays_s) {
  const int anchor_sensor = select_anchor(sensor1, sensor2, cfg.anchor);
  TrajectoryPair trajs = regress_both(sensor1, sensor2, cfg.qc);
  const GPTrajectory& anchor = anchor_sensor == 1 ? trajs.sensor1 : trajs.sensor2;
  const GPTrajectory& other = anchor_sensor == 1 ? trajs.sensor2 : trajs.sensor1;
  std::vector<CostSample> out;
  out.reserve(delays_s.size());
  for (double d : delays_s) {
    out.push_back({d, temporal_cost(anchor, other, to_anchor_delay(d, anchor_sensor))});
  }
  return out;
}

}  // namespace gpcalib
