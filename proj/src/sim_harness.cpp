#include "gpcalib/sim_harness.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gpcalib/errors.hpp"

namespace gpcalib {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::uint64_t kTrajectoryStream = 1;
constexpr std::uint64_t kSensor1NoiseStream = 2;
constexpr std::uint64_t kSensor2NoiseStream = 3;
constexpr int kMaxTrajectoryDraws = 100000;
constexpr double kSpeedCheckStep = 1e-3;  // s

double wrap_degrees(double a) {
  a = std::fmod(a + 180.0, 360.0);
  if (a < 0.0) a += 360.0;
  return a - 180.0;
}

bool acceptable(const SinusoidTrajectory& traj, double duration) {
  const auto n = static_cast<std::size_t>(std::ceil(duration / kSpeedCheckStep));
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t k = 0; k <= n; ++k) {
    const double s = traj.velocity(std::min(duration, k * kSpeedCheckStep)).norm();
    // margin for the maximum falling between grid points
    if (s > 0.98 * kMaxSimSpeed) return false;
    sum += s;
    sum_sq += s * s;
  }
  const double count = static_cast<double>(n + 1);
  const double var = std::max(0.0, sum_sq / count - (sum / count) * (sum / count));
  return std::sqrt(var) >= kMinSimSpeedStddev;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  std::uint64_t z = x + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(splitmix64(seed ^ splitmix64(stream))) {}

double CounterRng::uniform() {
  const std::uint64_t bits = splitmix64(key_ + counter_++);
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

std::uint64_t run_seed(std::uint64_t trajectory_seed, std::uint64_t run) {
  return splitmix64(splitmix64(trajectory_seed) + run);
}

RigidTransform default_ground_truth() {
  return RigidTransform::from_euler_zyx_deg(Vec3(45.0, 20.0, 0.0),
                                            Vec3(1.0, -1.0, 1.0));
}

void SimConfig::validate() const {
  if (!(sample_interval > 0.0) || !(duration > 10.0 * sample_interval)) {
    throw InvalidArgument("simulation duration must exceed 10 sample intervals");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw InvalidArgument("noise sigma must be finite and non-negative");
  }
  if (!(sensor2_start_offset >= 0.0) || !std::isfinite(sensor2_start_offset)) {
    throw InvalidArgument("sensor-2 start offset must be finite and non-negative");
  }
  if (!(amplitude_scale >= 0.0)) {
    throw InvalidArgument("amplitude scale must be non-negative");
  }
  if (n_runs < 1) throw InvalidArgument("n_runs must be at least 1");
  if (!ground_truth_transform.is_valid()) {
    throw InvalidArgument("ground-truth transform is not a rigid motion");
  }
  pipeline.delay.validate();
}

double SimConfig::true_delay() const {
  return sensor2_start_offset + (counter_phase ? sample_interval / 2.0 : 0.0);
}

Vec3 SinusoidTrajectory::position(double t) const {
  Vec3 p;
  for (int a = 0; a < 3; ++a) {
    double s = 0.0;
    for (const Component& c : axes_[a]) s += c.amplitude * std::sin(c.omega * t + c.phase);
    p(a) = s;
  }
  return p;
}

Vec3 SinusoidTrajectory::velocity(double t) const {
  Vec3 v;
  for (int a = 0; a < 3; ++a) {
    double s = 0.0;
    for (const Component& c : axes_[a]) {
      s += c.amplitude * c.omega * std::cos(c.omega * t + c.phase);
    }
    v(a) = s;
  }
  return v;
}

Vec3 SinusoidTrajectory::acceleration(double t) const {
  Vec3 acc;
  for (int a = 0; a < 3; ++a) {
    double s = 0.0;
    for (const Component& c : axes_[a]) {
      s -= c.amplitude * c.omega * c.omega * std::sin(c.omega * t + c.phase);
    }
    acc(a) = s;
  }
  return acc;
}

SinusoidTrajectory generate_trajectory(std::uint64_t seed, double duration,
                                       double amplitude_scale) {
  if (!(duration > 0.0)) throw InvalidArgument("duration must be positive");
  CounterRng rng(seed, kTrajectoryStream);
  for (int attempt = 0; attempt < kMaxTrajectoryDraws; ++attempt) {
    std::array<std::vector<SinusoidTrajectory::Component>, 3> axes;
    for (auto& axis : axes) {
      const int n_terms = 3 + static_cast<int>(rng.uniform() * 4.0);  // 3..6
      for (int k = 0; k < n_terms; ++k) {
        const double amplitude = amplitude_scale * rng.uniform(0.2, 1.0);
        const double period = rng.uniform(2.0, 15.0);
        const double phase = rng.uniform(0.0, kTwoPi);
        axis.push_back({amplitude, kTwoPi / period, phase});
      }
    }
    SinusoidTrajectory traj(std::move(axes));
    if (amplitude_scale == 0.0 || acceptable(traj, duration)) return traj;
  }
  throw InvalidArgument("could not draw a trajectory within the speed limits");
}

SimDataset sample_sensors(const SinusoidTrajectory& traj, const SimConfig& cfg,
                          std::uint64_t noise_seed) {
  cfg.validate();
  const double sigma = cfg.noise_sigma;
  const double cov_sigma = std::max(sigma, kMinNoiseSigma);
  const Mat3 cov = cov_sigma * cov_sigma * Mat3::Identity();
  const double delay = cfg.true_delay();
  const RigidTransform to_sensor2 = cfg.ground_truth_transform.inverse();

  CounterRng noise1(noise_seed, kSensor1NoiseStream);
  CounterRng noise2(noise_seed, kSensor2NoiseStream);
  auto noise = [sigma](CounterRng& rng) {
    Vec3 n;
    for (int a = 0; a < 3; ++a) n(a) = rng.normal();
    return Vec3(sigma * n);
  };

  std::vector<Measurement> m1, m2;
  for (long k = 0;; ++k) {
    const double t = static_cast<double>(k) * cfg.sample_interval;
    if (t >= cfg.duration) break;
    m1.push_back({t, Vec3(traj.position(t) + noise(noise1)), cov});
  }
  for (long k = 0;; ++k) {
    const double local = static_cast<double>(k) * cfg.sample_interval;
    const double global = delay + local;
    if (global >= cfg.duration) break;
    const Vec3 p = apply(to_sensor2, traj.position(global));
    m2.push_back({local, Vec3(p + noise(noise2)), cov});
  }
  return {MeasurementSet("sensor1", std::move(m1)),
          MeasurementSet("sensor2", std::move(m2)), delay,
          cfg.ground_truth_transform};
}

SummaryStats summarize(const std::vector<double>& values) {
  SummaryStats s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  s.min = values.front();
  s.max = values.front();
  for (double v : values) {
    sum += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
    s.max_abs = std::max(s.max_abs, std::abs(v));
  }
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

RunRecord run_once(const SimConfig& cfg, int run) {
  RunRecord rec;
  rec.run = run;
  rec.seed = run_seed(cfg.trajectory_seed, static_cast<std::uint64_t>(run));
  try {
    const SinusoidTrajectory traj =
        generate_trajectory(rec.seed, cfg.duration, cfg.amplitude_scale);
    const SimDataset data = sample_sensors(traj, cfg, rec.seed);
    const CalibrationResult result = calibrate(data.sensor1, data.sensor2, cfg.pipeline);
    rec.status = to_string(result.status);
    rec.message = result.message;
    rec.n_correspondences = result.estimate.n_correspondences;
    if (result.status != CalibrationStatus::kInsufficientOverlap) {
      rec.delay_estimate = result.delay_s;
      rec.delay_error = result.delay_s - data.true_delay;
    }
    if (result.extrinsic) {
      const Vec3 truth = data.true_transform.euler_zyx_deg();
      for (int a = 0; a < 3; ++a) {
        rec.euler_error(a) = wrap_degrees(result.extrinsic->euler_zyx(a) - truth(a));
      }
      rec.translation_error =
          result.extrinsic->transform.translation - data.true_transform.translation;
      rec.has_result = true;
    }
  } catch (const Error& e) {
    rec.status = "error";
    rec.message = e.what();
  }
  return rec;
}

MonteCarloReport run_monte_carlo(const SimConfig& cfg) {
  cfg.validate();
  MonteCarloReport report;
  report.config = cfg;
  std::vector<double> delay_err;
  std::array<std::vector<double>, 3> euler_err, trans_err;
  for (int run = 0; run < cfg.n_runs; ++run) {
    RunRecord rec = run_once(cfg, run);
    if (rec.status != to_string(CalibrationStatus::kOk) || !rec.has_result) {
      ++report.n_failed;
    } else {
      delay_err.push_back(rec.delay_error);
      for (int a = 0; a < 3; ++a) {
        euler_err[a].push_back(rec.euler_error(a));
        trans_err[a].push_back(rec.translation_error(a));
      }
    }
    report.runs.push_back(std::move(rec));
  }
  report.delay_error = summarize(delay_err);
  for (int a = 0; a < 3; ++a) {
    report.euler_error[a] = summarize(euler_err[a]);
    report.translation_error[a] = summarize(trans_err[a]);
  }
  return report;
}

}  // namespace gpcalib
