#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gpcalib/gp_trajectory.hpp"
#include "gpcalib/pipeline.hpp"
#include "gpcalib/registration.hpp"

namespace gpcalib {

/// Counter-based normal/uniform generator. Value k of a (seed, stream) pair is
/// a pure function of (seed, stream, k):
///   key = splitmix64(seed ^ splitmix64(stream))
///   u_k = ((splitmix64(key + k) >> 11) + 0.5) * 2^-53
/// normal() consumes two uniforms (u1, u2) and returns
///   sqrt(-2 ln u1) * cos(2 pi u2).
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);

  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Seed of Monte-Carlo run `run` derived from the configured trajectory seed.
std::uint64_t run_seed(std::uint64_t trajectory_seed, std::uint64_t run);

/// Euler ZYX [45, 20, 0] deg, translation [1, -1, 1] m.
RigidTransform default_ground_truth();

struct SimConfig {
  double duration = 60.0;             // s
  double sample_interval = 0.05;      // s
  double sensor2_start_offset = 0.1;  // s
  bool counter_phase = true;          // sensor 2 shifted by half an interval
  double noise_sigma = 0.01;          // m
  RigidTransform ground_truth_transform = default_ground_truth();
  std::uint64_t trajectory_seed = 1;
  int n_runs = 500;
  double amplitude_scale = 1.0;       // 0 gives a stationary target
  PipelineConfig pipeline;

  void validate() const;
  /// sensor2_start_offset + (counter_phase ? sample_interval / 2 : 0)
  double true_delay() const;
};

/// Sum of sinusoids per axis, analytic in position, velocity, acceleration.
class SinusoidTrajectory {
 public:
  struct Component {
    double amplitude;  // m
    double omega;      // rad/s
    double phase;      // rad
  };

  explicit SinusoidTrajectory(std::array<std::vector<Component>, 3> axes)
      : axes_(std::move(axes)) {}

  Vec3 position(double t) const;
  Vec3 velocity(double t) const;
  Vec3 acceleration(double t) const;
  const std::array<std::vector<Component>, 3>& axes() const { return axes_; }

 private:
  std::array<std::vector<Component>, 3> axes_;
};

inline constexpr double kMaxSimSpeed = 3.0;           // m/s
inline constexpr double kMinSimSpeedStddev = 0.05;    // m/s

/// Seeded trajectory: 3 to 6 sinusoids per axis, amplitudes 0.2-1.0 m
/// (times amplitude_scale), periods 2-15 s, random phases. Draws are
/// rejected until speed stays below kMaxSimSpeed and the speed standard
/// deviation reaches kMinSimSpeedStddev over [0, duration].
SinusoidTrajectory generate_trajectory(std::uint64_t seed, double duration,
                                       double amplitude_scale = 1.0);

struct SimDataset {
  MeasurementSet sensor1;
  MeasurementSet sensor2;
  double true_delay;              // s, sensor-1 stamp = sensor-2 stamp + delay
  RigidTransform true_transform;  // sensor 2 -> sensor 1
};

/// Noise covariance used for sigma = 0 so the regression stays well posed.
inline constexpr double kMinNoiseSigma = 1e-6;  // m

/// Sensor 1 samples global time k*t_m with local stamp k*t_m. Sensor 2 samples
/// global time true_delay + k*t_m with local stamp k*t_m and reports positions
/// in its own frame. Both stop before `duration`.
SimDataset sample_sensors(const SinusoidTrajectory& traj, const SimConfig& cfg,
                          std::uint64_t noise_seed);

struct SummaryStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
  double min = 0.0;
  double max = 0.0;
  double max_abs = 0.0;
  std::size_t count = 0;
};

SummaryStats summarize(const std::vector<double>& values);

struct RunRecord {
  int run = 0;
  std::uint64_t seed = 0;
  std::string status;             // CalibrationStatus or "error"
  std::string message;
  double delay_estimate = 0.0;    // s
  double delay_error = 0.0;       // s
  Vec3 euler_error = Vec3::Zero();        // deg, [z, y, x]
  Vec3 translation_error = Vec3::Zero();  // m
  std::size_t n_correspondences = 0;
  bool has_result = false;
};

struct MonteCarloReport {
  SimConfig config;
  std::vector<RunRecord> runs;
  std::size_t n_failed = 0;
  SummaryStats delay_error;
  std::array<SummaryStats, 3> euler_error;
  std::array<SummaryStats, 3> translation_error;
};

/// One full pipeline run on a freshly seeded dataset.
RunRecord run_once(const SimConfig& cfg, int run);

MonteCarloReport run_monte_carlo(const SimConfig& cfg);

}  // namespace gpcalib
