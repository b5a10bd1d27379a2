#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gpcalib/types.hpp"

namespace gpcalib {

/// Position, velocity and acceleration of the tracked object at one instant.
/// Stacked as [position; velocity; acceleration] everywhere a 9-vector is used.
struct TrajectoryState {
  double time = 0.0;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();

  Vec9 stacked() const;
  static TrajectoryState from_stacked(double time, const Vec9& x);
  bool is_finite() const;
};

struct Measurement {
  double time = 0.0;
  Vec3 position = Vec3::Zero();
  Mat3 noise_cov = Mat3::Identity();
};

/// One sensor's position track. Construction validates: at least 3
/// measurements, strictly increasing finite times, SPD noise covariances.
class MeasurementSet {
 public:
  static constexpr std::size_t kMinMeasurements = 3;

  MeasurementSet(std::string sensor_id, std::vector<Measurement> measurements);

  const std::string& sensor_id() const { return sensor_id_; }
  const std::vector<Measurement>& measurements() const { return measurements_; }
  std::size_t size() const { return measurements_.size(); }
  const Measurement& operator[](std::size_t i) const { return measurements_[i]; }

  double start_time() const { return measurements_.front().time; }
  double end_time() const { return measurements_.back().time; }
  /// Measurements per second over the covered interval.
  double mean_sample_rate() const;

 private:
  std::string sensor_id_;
  std::vector<Measurement> measurements_;
};

/// White-noise-on-jerk (constant acceleration) prior. The control input of
/// the underlying SDE is identically zero and therefore not stored.
struct MotionPrior {
  Mat3 qc = Mat3::Identity();           // jerk PSD, m^2/s^5
  Vec9 initial_mean = Vec9::Zero();     // prior state at the first knot
  Mat9 initial_cov = Mat9::Identity();  // prior covariance at the first knot

  static constexpr double kDefaultQc = 1.0;
  static constexpr double kDefaultInitialVariance = 1e2;

  /// Default prior: mean position at the first measurement, zero velocity and
  /// acceleration, diagonal initial covariance of 1e2 in every component.
  static MotionPrior for_measurements(const MeasurementSet& data,
                                      double qc_scalar = kDefaultQc);

  void validate() const;
};

/// 9x9 state-transition matrix of the constant-acceleration model.
Mat9 transition(double dt);

/// Process noise accumulated over an interval of length dt.
Mat9 process_noise(double dt, const Mat3& qc);

/// Closed-form inverse of process_noise(dt, qc).
Mat9 process_noise_inverse(double dt, const Mat3& qc);

/// Prior mean propagated from t0 to t (t >= t0).
Vec9 prior_mean_at(const MotionPrior& prior, double t0, double t);

/// Posterior mean of a batch regression, with one knot per measurement time.
/// Immutable after construction.
class GPTrajectory {
 public:
  GPTrajectory(MotionPrior prior, std::vector<double> times,
               std::vector<TrajectoryState> posterior_means,
               std::vector<Vec9> prior_means);

  const MotionPrior& prior() const { return prior_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<TrajectoryState>& posterior_means() const {
    return posterior_;
  }
  const std::vector<Vec9>& prior_means() const { return prior_means_; }
  std::size_t size() const { return times_.size(); }

  double start_time() const { return times_.front(); }
  double end_time() const { return times_.back(); }
  bool contains(double tau) const {
    return tau >= times_.front() && tau <= times_.back();
  }

  /// Posterior state at tau from the two bracketing knots. Throws
  /// OutOfSupport outside [start_time(), end_time()].
  TrajectoryState interpolate(double tau) const;

 private:
  double offset(double t) const;

  MotionPrior prior_;
  std::vector<double> times_;
  // times_ re-expressed relative to times_[0] in extended precision
  std::vector<double> offsets_;
  std::vector<TrajectoryState> posterior_;
  std::vector<Vec9> prior_means_;
};

/// Batch GP regression: solves the posterior-mean linear system with a
/// block-tridiagonal Cholesky factorization in O(N).
GPTrajectory regress(const MeasurementSet& data, const MotionPrior& prior);

inline TrajectoryState interpolate(const GPTrajectory& traj, double tau) {
  return traj.interpolate(tau);
}

}  // namespace gpcalib
