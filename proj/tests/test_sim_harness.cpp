#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "gpcalib/errors.hpp"
#include "gpcalib/pipeline.hpp"
#include "gpcalib/sim_harness.hpp"

namespace gpcalib {
namespace {

TEST(CounterRng, PureFunctionOfSeedStreamCounter) {
  CounterRng a(42, 2), b(42, 2), c(42, 3);
  for (int i = 0; i < 100; ++i) {
    const double ua = a.uniform();
    EXPECT_EQ(ua, b.uniform());
    EXPECT_NE(ua, c.uniform());
    EXPECT_GT(ua, 0.0);
    EXPECT_LT(ua, 1.0);
  }
  EXPECT_EQ(a.counter(), 100u);
  // documented formula
  const std::uint64_t key = splitmix64(42 ^ splitmix64(2));
  const double expected = (static_cast<double>(splitmix64(key + 100) >> 11) + 0.5) * 0x1.0p-53;
  EXPECT_EQ(a.uniform(), expected);
}

TEST(CounterRng, NormalMoments) {
  CounterRng rng(7, 1);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  // 5 standard errors
  EXPECT_NEAR(sum / n, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(sq / n, 1.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(SplitMix64, ReferenceValue) {
  // first output of the reference generator seeded with 0
  EXPECT_EQ(splitmix64(0), 0xE220A8397B1DCDAFULL);
  EXPECT_NE(run_seed(1, 0), run_seed(1, 1));
  EXPECT_NE(run_seed(1, 0), run_seed(2, 0));
}

TEST(GenerateTrajectory, Deterministic) {
  const SinusoidTrajectory a = generate_trajectory(123, 60.0);
  const SinusoidTrajectory b = generate_trajectory(123, 60.0);
  for (int k = 0; k < 1000; ++k) {
    const double t = 0.06 * k;
    EXPECT_EQ(a.position(t), b.position(t));
  }
}

TEST(GenerateTrajectory, FamilyBounds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SinusoidTrajectory traj = generate_trajectory(run_seed(seed, 0), 60.0);
    for (const auto& axis : traj.axes()) {
      EXPECT_GE(axis.size(), 3u);
      EXPECT_LE(axis.size(), 6u);
      for (const auto& c : axis) {
        EXPECT_GE(c.amplitude, 0.2);
        EXPECT_LE(c.amplitude, 1.0);
        const double period = 2.0 * M_PI / c.omega;
        EXPECT_GE(period, 2.0 - 1e-12);
        EXPECT_LE(period, 15.0 + 1e-12);
      }
    }
  }
}

TEST(GenerateTrajectory, SpeedLimits) {
  // denser than the generator's own acceptance grid
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SinusoidTrajectory traj = generate_trajectory(run_seed(seed, 0), 60.0);
    double sum = 0.0, sq = 0.0, top = 0.0;
    const int n = 240000;
    for (int k = 0; k <= n; ++k) {
      const double s = traj.velocity(60.0 * k / n).norm();
      sum += s;
      sq += s * s;
      top = std::max(top, s);
    }
    const double mean = sum / (n + 1);
    EXPECT_LE(top, kMaxSimSpeed);
    EXPECT_GE(std::sqrt(sq / (n + 1) - mean * mean), kMinSimSpeedStddev);
  }
}

TEST(GenerateTrajectory, AnalyticDerivatives) {
  const SinusoidTrajectory traj = generate_trajectory(5, 60.0);
  const double h = 1e-5;
  for (double t : {1.0, 17.3, 42.0}) {
    const Vec3 fd_v = (traj.position(t + h) - traj.position(t - h)) / (2 * h);
    const Vec3 fd_a = (traj.velocity(t + h) - traj.velocity(t - h)) / (2 * h);
    EXPECT_LE((fd_v - traj.velocity(t)).norm(), 1e-8);
    EXPECT_LE((fd_a - traj.acceleration(t)).norm(), 1e-8);
  }
}

TEST(GenerateTrajectory, ZeroAmplitudeIsUnobservable) {
  SimConfig cfg;
  cfg.amplitude_scale = 0.0;
  cfg.noise_sigma = 0.0;  // literally constant positions
  const SinusoidTrajectory traj = generate_trajectory(1, cfg.duration, 0.0);
  EXPECT_EQ(traj.position(3.0), Vec3::Zero());
  const RunRecord rec = run_once(cfg, 0);
  EXPECT_EQ(rec.status, "unobservable");
}

TEST(SampleSensors, Defaults) {
  const SimConfig cfg;
  EXPECT_DOUBLE_EQ(cfg.true_delay(), 0.125);
  const SimDataset d = sample_sensors(generate_trajectory(1, cfg.duration), cfg, 1);
  EXPECT_DOUBLE_EQ(d.true_delay, 0.125);
  EXPECT_EQ(d.sensor1.size(), 1200u);
  // sensor 2 stops before 60 s of global time: 0.125 + k*0.05 < 60
  EXPECT_EQ(d.sensor2.size(), 1198u);
  EXPECT_EQ(d.sensor2[0].time, 0.0);
  EXPECT_NEAR(d.sensor1[0].noise_cov(0, 0), 1e-4, 1e-18);
}

TEST(SampleSensors, TrueDelayFormula) {
  SimConfig cfg;
  cfg.sensor2_start_offset = 0.3;
  cfg.sample_interval = 0.02;
  EXPECT_DOUBLE_EQ(cfg.true_delay(), 0.31);
  cfg.counter_phase = false;
  EXPECT_DOUBLE_EQ(cfg.true_delay(), 0.3);
  const SimDataset d = sample_sensors(generate_trajectory(1, cfg.duration), cfg, 1);
  EXPECT_EQ(d.true_delay, cfg.true_delay());
}

TEST(SampleSensors, NoiselessInterleaveOnAnalyticTrajectory) {
  SimConfig cfg;
  cfg.noise_sigma = 0.0;
  cfg.ground_truth_transform = RigidTransform::identity();
  cfg.sensor2_start_offset = 0.0;
  const SinusoidTrajectory traj = generate_trajectory(9, cfg.duration);
  const SimDataset d = sample_sensors(traj, cfg, 9);
  std::set<double> global;
  for (const Measurement& m : d.sensor1.measurements()) {
    EXPECT_EQ(m.position, traj.position(m.time));
    global.insert(m.time);
  }
  for (const Measurement& m : d.sensor2.measurements()) {
    const double t = m.time + d.true_delay;
    EXPECT_EQ(m.position, traj.position(t));
    global.insert(t);
  }
  // strictly alternating samples half an interval apart
  double prev = -1.0;
  for (double t : global) {
    if (prev >= 0.0) {
      EXPECT_NEAR(t - prev, 0.025, 1e-12);
    }
    prev = t;
  }
}

TEST(SampleSensors, FrameConsistency) {
  SimConfig cfg;
  cfg.noise_sigma = 0.0;
  const SinusoidTrajectory traj = generate_trajectory(2, cfg.duration);
  const SimDataset d = sample_sensors(traj, cfg, 2);
  for (const Measurement& m : d.sensor2.measurements()) {
    const Vec3 back = apply(d.true_transform, m.position);
    EXPECT_LE((back - traj.position(m.time + d.true_delay)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(SampleSensors, BitReproducible) {
  const SimConfig cfg;
  const SimDataset a = sample_sensors(generate_trajectory(77, cfg.duration), cfg, 77);
  const SimDataset b = sample_sensors(generate_trajectory(77, cfg.duration), cfg, 77);
  ASSERT_EQ(a.sensor1.size(), b.sensor1.size());
  for (std::size_t k = 0; k < a.sensor1.size(); ++k) {
    EXPECT_EQ(a.sensor1[k].position, b.sensor1[k].position);
  }
  for (std::size_t k = 0; k < a.sensor2.size(); ++k) {
    EXPECT_EQ(a.sensor2[k].position, b.sensor2[k].position);
  }
}

TEST(SampleSensors, InvalidConfig) {
  const SinusoidTrajectory traj = generate_trajectory(1, 60.0);
  SimConfig cfg;
  cfg.duration = 0.4;
  EXPECT_THROW(sample_sensors(traj, cfg, 1), InvalidArgument);
  cfg = SimConfig{};
  cfg.noise_sigma = -1.0;
  EXPECT_THROW(sample_sensors(traj, cfg, 1), InvalidArgument);
}

TEST(Summarize, Statistics) {
  const SummaryStats s = summarize({1.0, -3.0, 2.0, 4.0});
  EXPECT_DOUBLE_EQ(s.mean, 1.0);
  EXPECT_DOUBLE_EQ(s.min, -3.0);
  EXPECT_DOUBLE_EQ(s.max, 4.0);
  EXPECT_DOUBLE_EQ(s.max_abs, 4.0);
  EXPECT_DOUBLE_EQ(s.stddev, std::sqrt(26.0 / 3.0));
  EXPECT_EQ(s.count, 4u);
}

TEST(MonteCarlo, NoiselessRunsReachInterpolationFloor) {
  SimConfig cfg;
  cfg.noise_sigma = 0.0;
  cfg.n_runs = 3;
  const MonteCarloReport r = run_monte_carlo(cfg);
  EXPECT_EQ(r.n_failed, 0u);
  for (const RunRecord& rec : r.runs) {
    EXPECT_LE(std::abs(rec.delay_error), 1e-5) << "run " << rec.run;
    const double rot_deg = rec.euler_error.cwiseAbs().maxCoeff();
    const double trans = rec.translation_error.cwiseAbs().maxCoeff();
    // sinusoids are not in the constant-acceleration family: interpolation
    // leaves ~1e-5 m per point, which averages to ~1e-7 in the transform
    EXPECT_LE(rot_deg * M_PI / 180.0, 1e-6) << "run " << rec.run;
    EXPECT_LE(trans, 1e-6) << "run " << rec.run;
  }
}

TEST(Pipeline, NoiselessQuadraticMotionIsExact) {
  // quadratic motion lies in the prior family, so interpolation is exact
  const RigidTransform truth = default_ground_truth();
  const Vec3 p0(0.2, -0.1, 0.4), v0(-0.6, 0.4, 0.3), acc(0.08, -0.05, 0.03);
  auto pos = [&](double t) -> Vec3 { return p0 + v0 * t + 0.5 * acc * t * t; };
  const double delay = 0.125, dt = 0.05;
  const Mat3 cov = kMinNoiseSigma * kMinNoiseSigma * Mat3::Identity();
  std::vector<Measurement> m1, m2;
  for (int k = 0; k < 400; ++k) {
    m1.push_back({k * dt, pos(k * dt), cov});
    m2.push_back({k * dt, apply(truth.inverse(), pos(k * dt + delay)), cov});
  }
  const CalibrationResult r =
      calibrate(MeasurementSet("s1", m1), MeasurementSet("s2", m2), PipelineConfig{});
  ASSERT_EQ(r.status, CalibrationStatus::kOk) << r.message;
  EXPECT_LE(std::abs(r.delay_s - delay), 1e-5);
  ASSERT_TRUE(r.extrinsic);
  EXPECT_LE((r.extrinsic->transform.rotation - truth.rotation).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE((r.extrinsic->transform.translation - truth.translation).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(MonteCarlo, DeterministicAndIndependentOfRunCount) {
  SimConfig cfg;
  cfg.n_runs = 3;
  const MonteCarloReport a = run_monte_carlo(cfg);
  const MonteCarloReport b = run_monte_carlo(cfg);
  ASSERT_EQ(a.runs.size(), 3u);
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    EXPECT_EQ(a.runs[i].delay_estimate, b.runs[i].delay_estimate);
    EXPECT_EQ(a.runs[i].euler_error, b.runs[i].euler_error);
    EXPECT_EQ(a.runs[i].seed, run_seed(cfg.trajectory_seed, i));
  }
  // run 1 alone matches run 1 of the batch
  const RunRecord single = run_once(cfg, 1);
  EXPECT_EQ(single.delay_estimate, a.runs[1].delay_estimate);
  EXPECT_EQ(a.delay_error.count, 3u);
}

TEST(Pipeline, AnchorSelection) {
  const SimConfig cfg;
  const SimDataset d = sample_sensors(generate_trajectory(1, cfg.duration), cfg, 1);
  // 1200 vs 1198 samples at the same interval: equal rates, tie to sensor 1
  EXPECT_EQ(select_anchor(d.sensor1, d.sensor2, AnchorChoice::kAuto), 1);
  EXPECT_EQ(select_anchor(d.sensor1, d.sensor2, AnchorChoice::kSensor2), 2);
  SimConfig fast = cfg;
  fast.sample_interval = 0.02;
  const SimDataset f = sample_sensors(generate_trajectory(1, cfg.duration), fast, 1);
  EXPECT_EQ(select_anchor(f.sensor1, d.sensor2, AnchorChoice::kAuto), 2);
  EXPECT_EQ(select_anchor(d.sensor1, f.sensor2, AnchorChoice::kAuto), 1);
}

TEST(Pipeline, SensorDelayConventionIndependentOfAnchor) {
  const SimConfig cfg;
  const SimDataset d = sample_sensors(generate_trajectory(1, cfg.duration), cfg, 1);
  PipelineConfig p1, p2;
  p1.anchor = AnchorChoice::kSensor1;
  p2.anchor = AnchorChoice::kSensor2;
  const CalibrationResult r1 = calibrate(d.sensor1, d.sensor2, p1);
  const CalibrationResult r2 = calibrate(d.sensor1, d.sensor2, p2);
  ASSERT_EQ(r1.status, CalibrationStatus::kOk);
  ASSERT_EQ(r2.status, CalibrationStatus::kOk);
  EXPECT_EQ(r1.anchor_sensor, 1);
  EXPECT_EQ(r2.anchor_sensor, 2);
  EXPECT_NEAR(r1.delay_s, 0.125, 3e-3);
  EXPECT_NEAR(r2.delay_s, 0.125, 3e-3);
  EXPECT_DOUBLE_EQ(r1.delay_s, -r1.estimate.delay);
  EXPECT_DOUBLE_EQ(r2.delay_s, r2.estimate.delay);
  // both report the sensor 2 -> sensor 1 transform
  for (const auto& r : {r1, r2}) {
    ASSERT_TRUE(r.extrinsic);
    EXPECT_LE((r.extrinsic->euler_zyx - Vec3(45, 20, 0)).cwiseAbs().maxCoeff(), 0.1);
    EXPECT_LE((r.extrinsic->transform.translation - Vec3(1, -1, 1)).cwiseAbs().maxCoeff(), 3e-3);
  }
}

TEST(Pipeline, InitialDelayInSensorConvention) {
  const SimConfig cfg;
  const SimDataset d = sample_sensors(generate_trajectory(1, cfg.duration), cfg, 1);
  PipelineConfig p;
  p.delay.initial_delay = 2.0;  // window [1, 3] excludes the true delay
  p.delay.coarse_search_halfwidth = 0.5;
  const CalibrationResult far = calibrate(d.sensor1, d.sensor2, p);
  p.delay.initial_delay = 0.1;
  const CalibrationResult near = calibrate(d.sensor1, d.sensor2, p);
  EXPECT_NEAR(near.delay_s, 0.125, 3e-3);
  EXPECT_GT(std::abs(far.delay_s - 0.125), 0.1);
}

TEST(Pipeline, InsufficientOverlapStatus) {
  const SimConfig cfg;
  const SimDataset d = sample_sensors(generate_trajectory(1, cfg.duration), cfg, 1);
  PipelineConfig p;
  p.delay.initial_delay = 100.0;
  const CalibrationResult r = calibrate(d.sensor1, d.sensor2, p);
  EXPECT_EQ(r.status, CalibrationStatus::kInsufficientOverlap);
  EXPECT_FALSE(r.extrinsic);
}

TEST(Pipeline, StatusStrings) {
  for (auto s : {CalibrationStatus::kOk, CalibrationStatus::kNotConverged,
                 CalibrationStatus::kUnobservable, CalibrationStatus::kInsufficientOverlap,
                 CalibrationStatus::kDegenerateGeometry}) {
    EXPECT_EQ(status_from_string(to_string(s)), s);
  }
  EXPECT_THROW(status_from_string("bogus"), InvalidArgument);
  EXPECT_EQ(anchor_from_string("sensor2"), AnchorChoice::kSensor2);
  EXPECT_THROW(anchor_from_string("sensor3"), InvalidArgument);
}

}  // namespace
}  // namespace gpcalib
