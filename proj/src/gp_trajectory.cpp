#include "gpcalib/gp_trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "gpcalib/block_tridiagonal.hpp"
#include "gpcalib/errors.hpp"

namespace gpcalib {
namespace {

constexpr double kSymmetryTolerance = 1e-12;

using Mat9L = Eigen::Matrix<long double, 9, 9>;
using Vec9L = Eigen::Matrix<long double, 9, 1>;
using Mat3L = Eigen::Matrix<long double, 3, 3>;

// Each scalar coefficient (r, c) multiplies a copy of `block`.
template <typename S>
Eigen::Matrix<S, 9, 9> kron3(const Eigen::Matrix<S, 3, 3>& coeff,
                             const Eigen::Matrix<S, 3, 3>& block) {
  Eigen::Matrix<S, 9, 9> out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      out.template block<3, 3>(3 * r, 3 * c) = coeff(r, c) * block;
    }
  }
  return out;
}

template <typename S>
Eigen::Matrix<S, 3, 3> transition_coefficients(S dt) {
  Eigen::Matrix<S, 3, 3> coeff;
  coeff << 1, dt, dt * dt / 2,
           0, 1, dt,
           0, 0, 1;
  return coeff;
}

template <typename S>
Eigen::Matrix<S, 3, 3> noise_coefficients(S dt) {
  const S dt2 = dt * dt;
  const S dt3 = dt2 * dt;
  const S dt4 = dt3 * dt;
  const S dt5 = dt4 * dt;
  Eigen::Matrix<S, 3, 3> coeff;
  coeff << dt5 / 20, dt4 / 8, dt3 / 6,
           dt4 / 8,  dt3 / 3, dt2 / 2,
           dt3 / 6,  dt2 / 2, dt;
  return coeff;
}

template <typename S>
Eigen::Matrix<S, 9, 9> transition_t(S dt) {
  return kron3<S>(transition_coefficients(dt), Eigen::Matrix<S, 3, 3>::Identity());
}

template <typename S>
Eigen::Matrix<S, 3, 3> noise_inverse_coefficients(S dt) {
  const S dt2 = dt * dt;
  const S dt3 = dt2 * dt;
  const S dt4 = dt3 * dt;
  const S dt5 = dt4 * dt;
  Eigen::Matrix<S, 3, 3> coeff;
  coeff << 720 / dt5, -360 / dt4, 60 / dt3,
           -360 / dt4, 192 / dt3, -36 / dt2,
           60 / dt3,  -36 / dt2,  9 / dt;
  return coeff;
}

template <typename S>
Eigen::Matrix<S, 9, 9> process_noise_inverse_t(S dt, const Eigen::Matrix<S, 3, 3>& qc_inv) {
  return kron3<S>(noise_inverse_coefficients(dt), qc_inv);
}

// Inverse of an SPD matrix, symmetrized so the Cholesky factorization (which
// reads one triangle) sees the same matrix as a dense solver would.
template <typename M>
M spd_inverse(const M& m) {
  const M inv = m.llt().solve(M::Identity());
  return (inv + inv.transpose()) / 2;
}

bool is_symmetric(const Eigen::MatrixXd& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= kSymmetryTolerance * scale;
}

template <typename M>
bool is_spd(const M& m) {
  if (!m.allFinite() || !is_symmetric(m)) return false;
  Eigen::LLT<M> llt(m);
  return llt.info() == Eigen::Success;
}

double relative_offset(double t, double origin) {
  return static_cast<double>(static_cast<long double>(t) -
                             static_cast<long double>(origin));
}

}  // namespace

Vec9 TrajectoryState::stacked() const {
  Vec9 x;
  x << position, velocity, acceleration;
  return x;
}

TrajectoryState TrajectoryState::from_stacked(double time, const Vec9& x) {
  return {time, x.segment<3>(0), x.segment<3>(3), x.segment<3>(6)};
}

bool TrajectoryState::is_finite() const {
  return std::isfinite(time) && position.allFinite() && velocity.allFinite() &&
         acceleration.allFinite();
}

MeasurementSet::MeasurementSet(std::string sensor_id,
                               std::vector<Measurement> measurements)
    : sensor_id_(std::move(sensor_id)), measurements_(std::move(measurements)) {
  if (measurements_.size() < kMinMeasurements) {
    throw ValidationError("measurement set '" + sensor_id_ + "' has " +
                          std::to_string(measurements_.size()) +
                          " measurements, at least 3 are required");
  }
  for (std::size_t i = 0; i < measurements_.size(); ++i) {
    const Measurement& m = measurements_[i];
    if (!std::isfinite(m.time) || !m.position.allFinite()) {
      throw ValidationError("measurement " + std::to_string(i) +
                            " has a non-finite time or position");
    }
    if (!is_spd(m.noise_cov)) {
      throw ValidationError("measurement " + std::to_string(i) +
                            " noise covariance is not symmetric positive definite");
    }
    if (i > 0 && !(m.time > measurements_[i - 1].time)) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "measurement times must be strictly increasing: index " << i - 1
          << " (t=" << measurements_[i - 1].time << ") and index " << i
          << " (t=" << m.time << ")";
      throw ValidationError(msg.str());
    }
  }
}

double MeasurementSet::mean_sample_rate() const {
  return static_cast<double>(measurements_.size() - 1) /
         relative_offset(end_time(), start_time());
}

MotionPrior MotionPrior::for_measurements(const MeasurementSet& data,
                                          double qc_scalar) {
  MotionPrior prior;
  prior.qc = qc_scalar * Mat3::Identity();
  prior.initial_mean.setZero();
  prior.initial_mean.head<3>() = data[0].position;
  prior.initial_cov = kDefaultInitialVariance * Mat9::Identity();
  prior.validate();
  return prior;
}

void MotionPrior::validate() const {
  if (!is_spd(qc)) {
    throw InvalidArgument("motion prior qc must be symmetric positive definite");
  }
  if (!initial_mean.allFinite()) {
    throw InvalidArgument("motion prior initial mean must be finite");
  }
  if (!is_spd(initial_cov)) {
    throw InvalidArgument(
        "motion prior initial covariance must be symmetric positive definite");
  }
}

Mat9 transition(double dt) {
  if (!std::isfinite(dt) || dt < 0.0) {
    throw InvalidArgument("transition: dt must be finite and non-negative");
  }
  return transition_t(dt);
}

Mat9 process_noise(double dt, const Mat3& qc) {
  if (!std::isfinite(dt) || dt <= 0.0) {
    throw InvalidArgument("process_noise: dt must be finite and positive");
  }
  return kron3<double>(noise_coefficients(dt), qc);
}

Mat9 process_noise_inverse(double dt, const Mat3& qc) {
  if (!std::isfinite(dt) || dt <= 0.0) {
    throw InvalidArgument("process_noise_inverse: dt must be finite and positive");
  }
  return process_noise_inverse_t(dt, spd_inverse(qc));
}

Vec9 prior_mean_at(const MotionPrior& prior, double t0, double t) {
  if (!std::isfinite(t0) || !std::isfinite(t) || t < t0) {
    throw InvalidArgument("prior_mean_at: requires finite t >= t0");
  }
  return transition(relative_offset(t, t0)) * prior.initial_mean;
}

GPTrajectory::GPTrajectory(MotionPrior prior, std::vector<double> times,
                           std::vector<TrajectoryState> posterior_means,
                           std::vector<Vec9> prior_means)
    : prior_(std::move(prior)),
      times_(std::move(times)),
      posterior_(std::move(posterior_means)),
      prior_means_(std::move(prior_means)) {
  if (times_.empty() || posterior_.size() != times_.size() ||
      prior_means_.size() != times_.size()) {
    throw InvalidArgument("GPTrajectory: times, posterior and prior sizes differ");
  }
  offsets_.reserve(times_.size());
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (i > 0 && !(times_[i] > times_[i - 1])) {
      throw InvalidArgument("GPTrajectory: times must be strictly increasing");
    }
    if (posterior_[i].time != times_[i]) {
      throw InvalidArgument("GPTrajectory: posterior state time mismatch");
    }
    offsets_.push_back(relative_offset(times_[i], times_[0]));
  }
}

double GPTrajectory::offset(double t) const {
  return relative_offset(t, times_.front());
}

TrajectoryState GPTrajectory::interpolate(double tau) const {
  if (!(tau >= times_.front() && tau <= times_.back())) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "interpolate: tau=" << tau << " outside trajectory support ["
        << times_.front() << ", " << times_.back() << "]";
    throw OutOfSupport(msg.str());
  }
  const auto it = std::lower_bound(times_.begin(), times_.end(), tau);
  const auto hit = static_cast<std::size_t>(it - times_.begin());
  if (*it == tau) return posterior_[hit];

  const std::size_t i = hit - 1;
  const long double left = static_cast<long double>(times_[i]);
  const long double since_left = static_cast<long double>(tau) - left;
  const long double interval = static_cast<long double>(times_[i + 1]) - left;

  // Qc cancels in Psi = Q(tau) Phi^T Q(interval)^-1, so Psi and Lambda are
  // 3x3 scalar coefficient matrices acting on every axis alike.
  const Mat3L q_tau = noise_coefficients(since_left);
  const Mat3L psi = q_tau * transition_coefficients(interval - since_left).transpose() *
                    noise_inverse_coefficients(interval);
  const Mat3L lambda = transition_coefficients(since_left) -
                       psi * transition_coefficients(interval);

  const Vec9 prior_tau = transition(offset(tau)) * prior_.initial_mean;
  const Vec9 dl = posterior_[i].stacked() - prior_means_[i];
  const Vec9 dr = posterior_[i + 1].stacked() - prior_means_[i + 1];
  Vec9 x = prior_tau;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      x.segment<3>(3 * r) += static_cast<double>(lambda(r, c)) * dl.segment<3>(3 * c) +
                             static_cast<double>(psi(r, c)) * dr.segment<3>(3 * c);
    }
  }
  return TrajectoryState::from_stacked(tau, x);
}

GPTrajectory regress(const MeasurementSet& data, const MotionPrior& prior) {
  prior.validate();
  const std::size_t n = data.size();
  const double origin = data.start_time();

  std::vector<double> times(n);
  std::vector<double> offsets(n);
  std::vector<Vec9> prior_means(n);
  for (std::size_t k = 0; k < n; ++k) {
    times[k] = data[k].time;
    offsets[k] = relative_offset(times[k], origin);
    prior_means[k] = transition(offsets[k]) * prior.initial_mean;
  }

  // The system is assembled and factored in extended precision: with
  // Q^-1 entries of order 720/dt^5 the posterior is sensitive to rounding at
  // the 1e-9 level in double.
  //
  // Inverse prior kernel F^-T Q^-1 F^-1 expanded block by block.
  // qinv[k] is the inverse of the k-th diagonal block of Q (P0 for k = 0),
  // phi[k] = Phi(t_k, t_{k-1}).
  const Mat3L qc_inv = spd_inverse(Mat3L(prior.qc.cast<long double>()));
  std::vector<Mat9L> qinv(n);
  std::vector<Mat9L> phi(n, Mat9L::Identity());
  qinv[0] = spd_inverse(Mat9L(prior.initial_cov.cast<long double>()));
  for (std::size_t k = 1; k < n; ++k) {
    const long double dt = static_cast<long double>(data[k].time) -
                           static_cast<long double>(data[k - 1].time);
    phi[k] = transition_t(dt);
    qinv[k] = process_noise_inverse_t(dt, qc_inv);
  }

  // With zero control input the prior mean satisfies x_k = Phi x_{k-1}
  // exactly, so Q^-1 F^-1 x_prior reduces to its first block.
  BlockTridiagonalSystem<9, long double> sys(n);
  sys.rhs[0] = qinv[0] * prior.initial_mean.cast<long double>();
  for (std::size_t k = 0; k < n; ++k) {
    Mat9L& d = sys.diag[k];
    d = qinv[k];
    if (k + 1 < n) {
      d.noalias() += phi[k + 1].transpose() * qinv[k + 1] * phi[k + 1];
      sys.lower[k] = -qinv[k + 1] * phi[k + 1];
    }
    // C = [I 0 0]
    const Mat3L r_inv = spd_inverse(Mat3L(data[k].noise_cov.cast<long double>()));
    d.block<3, 3>(0, 0) += r_inv;
    sys.rhs[k].head<3>() += r_inv * data[k].position.cast<long double>();
  }

  const std::vector<Vec9L> xl = sys.solve();
  std::vector<Vec9> x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = xl[k].cast<double>();
  std::vector<TrajectoryState> posterior(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (!x[k].allFinite()) {
      throw NumericalFailure("regress: non-finite posterior at knot " +
                                 std::to_string(k),
                             k);
    }
    posterior[k] = TrajectoryState::from_stacked(times[k], x[k]);
  }
  return GPTrajectory(prior, std::move(times), std::move(posterior),
                      std::move(prior_means));
}

}  // namespace gpcalib
