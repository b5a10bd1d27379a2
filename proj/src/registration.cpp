#include "gpcalib/registration.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "gpcalib/errors.hpp"

namespace gpcalib {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

void check_inputs(std::span<const Vec3> target, std::span<const Vec3> source) {
  if (target.size() != source.size()) {
    throw InvalidArgument("registration: point sets differ in size");
  }
  if (target.size() < 3) {
    throw InsufficientCorrespondences(
        "registration needs at least 3 correspondences, got " +
        std::to_string(target.size()));
  }
}

Vec3 centroid(std::span<const Vec3> pts) {
  Vec3 c = Vec3::Zero();
  for (const Vec3& p : pts) c += p;
  return c / static_cast<double>(pts.size());
}

double collinearity_of(std::span<const Vec3> pts) {
  const Vec3 c = centroid(pts);
  Mat3 scatter = Mat3::Zero();
  for (const Vec3& p : pts) scatter.noalias() += (p - c) * (p - c).transpose();
  const Vec3 sv = Eigen::JacobiSVD<Mat3>(scatter).singularValues();
  if (!(sv(0) > 0.0)) return 0.0;
  // singular values of the centered point matrix are sqrt of these
  return std::sqrt(std::max(sv(1), 0.0) / sv(0));
}

RegistrationResult finish(std::span<const Vec3> target,
                          std::span<const Vec3> source,
                          const RigidTransform& transform, double collinearity) {
  RegistrationResult out;
  out.transform = transform;
  out.euler_zyx = transform.euler_zyx_deg();
  out.n_pairs = target.size();
  out.rms_residual = std::sqrt(registration_cost(target, source, transform) /
                               static_cast<double>(target.size()));
  out.collinearity = collinearity;
  return out;
}

double checked_collinearity(std::span<const Vec3> target) {
  const double c = collinearity_of(target);
  if (!(c >= kMinCollinearity)) {
    throw DegenerateGeometry(
        "registration: anchor points are collinear (singular value ratio " +
        std::to_string(c) + " below 1e-6), rotation is not identifiable");
  }
  return c;
}

void split(std::span<const CorrespondencePair> pairs, std::vector<Vec3>& target,
           std::vector<Vec3>& source) {
  target.reserve(pairs.size());
  source.reserve(pairs.size());
  for (const CorrespondencePair& p : pairs) {
    target.push_back(p.anchor_state.position);
    source.push_back(p.other_state.position);
  }
}

}  // namespace

RigidTransform RigidTransform::from_euler_zyx_deg(const Vec3& zyx_deg,
                                                  const Vec3& translation) {
  RigidTransform t;
  t.rotation = (Eigen::AngleAxisd(zyx_deg(0) * kDeg, Vec3::UnitZ()) *
                Eigen::AngleAxisd(zyx_deg(1) * kDeg, Vec3::UnitY()) *
                Eigen::AngleAxisd(zyx_deg(2) * kDeg, Vec3::UnitX()))
                   .toRotationMatrix();
  t.translation = translation;
  return t;
}

RigidTransform RigidTransform::inverse() const {
  return {rotation.transpose(), -(rotation.transpose() * translation)};
}

RigidTransform RigidTransform::operator*(const RigidTransform& other) const {
  return {rotation * other.rotation, rotation * other.translation + translation};
}

Vec3 RigidTransform::euler_zyx_deg() const {
  const Mat3& r = rotation;
  const double y = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double z = std::atan2(r(1, 0), r(0, 0));
  const double x = std::atan2(r(2, 1), r(2, 2));
  return Vec3(z, y, x) / kDeg;
}

bool RigidTransform::is_valid(double tol) const {
  return rotation.allFinite() && translation.allFinite() &&
         (rotation.transpose() * rotation - Mat3::Identity())
                 .cwiseAbs()
                 .maxCoeff() <= tol &&
         std::abs(rotation.determinant() - 1.0) <= tol;
}

Vec3 apply(const RigidTransform& transform, const Vec3& point) {
  return transform.rotation * point + transform.translation;
}

double registration_cost(std::span<const Vec3> target,
                         std::span<const Vec3> source,
                         const RigidTransform& transform) {
  double cost = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    cost += (target[i] - apply(transform, source[i])).squaredNorm();
  }
  return cost;
}

RegistrationResult register_points(std::span<const Vec3> target,
                                   std::span<const Vec3> source) {
  check_inputs(target, source);
  const double collinearity = checked_collinearity(target);

  const Vec3 ct = centroid(target);
  const Vec3 cs = centroid(source);
  Mat3 cross = Mat3::Zero();
  for (std::size_t i = 0; i < target.size(); ++i) {
    cross.noalias() += (target[i] - ct) * (source[i] - cs).transpose();
  }
  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Vec3 d(1.0, 1.0, (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0);

  RigidTransform t;
  t.rotation = u * d.asDiagonal() * v.transpose();
  t.translation = ct - t.rotation * cs;
  return finish(target, source, t, collinearity);
}

RegistrationResult register_pairs(std::span<const CorrespondencePair> pairs) {
  std::vector<Vec3> target, source;
  split(pairs, target, source);
  return register_points(target, source);
}

RegistrationResult refine_points(std::span<const Vec3> target,
                                 std::span<const Vec3> source,
                                 const RigidTransform& init) {
  check_inputs(target, source);
  const double collinearity = checked_collinearity(target);
  if (!init.is_valid(1e-8)) {
    throw InvalidArgument("refine: initial transform is not a rigid motion");
  }

  using Vec6 = Eigen::Matrix<double, 6, 1>;
  using Mat6 = Eigen::Matrix<double, 6, 6>;

  RigidTransform current = init;
  double cost = registration_cost(target, source, current);
  double damping = 1e-4;

  for (int iter = 0; iter < 100 && cost > 0.0; ++iter) {
    // e_i = q_i - R p_i - t ; R <- exp(w) R, t <- t + dt
    Mat6 h = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    for (std::size_t i = 0; i < target.size(); ++i) {
      const Vec3 rp = current.rotation * source[i];
      const Vec3 e = target[i] - rp - current.translation;
      Eigen::Matrix<double, 3, 6> j;
      j.leftCols<3>() = skew(rp);
      j.rightCols<3>() = -Mat3::Identity();
      h.noalias() += j.transpose() * j;
      g.noalias() += j.transpose() * e;
    }

    bool improved = false;
    while (damping < 1e16) {
      Mat6 a = h;
      a.diagonal() *= 1.0 + damping;
      const Vec6 step = a.ldlt().solve(-g);
      RigidTransform trial = current;
      const Vec3 w = step.head<3>();
      if (w.norm() > 0.0) {
        trial.rotation =
            Eigen::AngleAxisd(w.norm(), w.normalized()).toRotationMatrix() *
            current.rotation;
      }
      trial.translation += step.tail<3>();
      const double trial_cost = registration_cost(target, source, trial);
      if (trial_cost < cost) {
        const double decrease = (cost - trial_cost) / cost;
        current = trial;
        cost = trial_cost;
        damping = std::max(damping / 10.0, 1e-12);
        improved = decrease > 1e-15 && step.norm() > 1e-15;
        break;
      }
      damping *= 10.0;
    }
    if (!improved) break;
  }
  return finish(target, source, current, collinearity);
}

RegistrationResult refine(std::span<const CorrespondencePair> pairs,
                          const RigidTransform& init) {
  std::vector<Vec3> target, source;
  split(pairs, target, source);
  return refine_points(target, source, init);
}

}  // namespace gpcalib
