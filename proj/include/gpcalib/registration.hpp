#pragma once

#include <span>
#include <vector>

#include "gpcalib/temporal_align.hpp"
#include "gpcalib/types.hpp"

namespace gpcalib {

/// Maps points from the source (sensor 2) frame into the target (sensor 1)
/// frame: p1 = rotation * p2 + translation.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  /// Intrinsic Z-Y-X Euler angles [z, y, x] in degrees.
  static RigidTransform from_euler_zyx_deg(const Vec3& zyx_deg,
                                           const Vec3& translation);

  RigidTransform inverse() const;
  /// (this * other)(p) = this(other(p))
  RigidTransform operator*(const RigidTransform& other) const;
  /// Euler angles [z, y, x] in degrees, y in [-90, 90].
  Vec3 euler_zyx_deg() const;
  bool is_valid(double tol = 1e-10) const;
};

Vec3 apply(const RigidTransform& transform, const Vec3& point);

struct RegistrationResult {
  RigidTransform transform;
  Vec3 euler_zyx = Vec3::Zero();  // degrees
  double rms_residual = 0.0;      // m
  std::size_t n_pairs = 0;
  // Ratio of the second to the first singular value of the centered anchor
  // points; zero for collinear sets.
  double collinearity = 0.0;
};

/// Below this collinearity the registration is refused.
inline constexpr double kMinCollinearity = 1e-6;

/// Sum of squared distances |target_i - T(source_i)|^2.
double registration_cost(std::span<const Vec3> target,
                         std::span<const Vec3> source,
                         const RigidTransform& transform);

/// Closed-form least-squares rigid alignment of source onto target
/// (SVD of the cross-covariance with determinant correction).
RegistrationResult register_points(std::span<const Vec3> target,
                                   std::span<const Vec3> source);

/// Aligns the other-sensor positions onto the anchor positions.
RegistrationResult register_pairs(std::span<const CorrespondencePair> pairs);

/// Levenberg-Marquardt over a rotation-vector perturbation and translation,
/// started from `init`. Never returns a transform costlier than `init`.
RegistrationResult refine(std::span<const CorrespondencePair> pairs,
                          const RigidTransform& init);
RegistrationResult refine_points(std::span<const Vec3> target,
                                 std::span<const Vec3> source,
                                 const RigidTransform& init);

}  // namespace gpcalib
