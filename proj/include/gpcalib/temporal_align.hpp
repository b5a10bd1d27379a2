#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gpcalib/gp_trajectory.hpp"

namespace gpcalib {

// Delay convention for everything in this header: a state stamped t in the
// anchor clock is compared with the other trajectory at t + delay.

struct DelayConfig {
  double initial_delay = 0.0;             // s
  double coarse_search_halfwidth = 1.0;   // s
  double coarse_search_step = 0.05;       // s
  int max_iterations = 100;
  double cost_tolerance = 1e-10;          // relative cost decrease
  double parameter_tolerance = 1e-7;      // s
  double lm_initial_damping = 1e-4;

  void validate() const;
};

/// Jacobian entries are zeroed where the interpolated speed is below this.
inline constexpr double kMinSpeedForJacobian = 1e-6;  // m/s
/// estimate_delay flags the delay as unobservable below this mean |J|.
inline constexpr double kObservabilityThreshold = 1e-3;  // m/s^2
/// delay_residuals needs at least this many anchor knots inside the support.
inline constexpr std::size_t kMinOverlappingKnots = 10;

struct DelayEstimate {
  double delay = 0.0;               // s
  double final_cost = 0.0;          // m^2/s^2
  double rms_residual = 0.0;        // m/s
  int iterations = 0;
  bool converged = false;
  double observability = 0.0;       // mean |J_i|, m/s^2
  bool unobservable = false;
  std::size_t n_correspondences = 0;
  std::size_t n_excluded = 0;       // anchor knots outside the other support

  bool operator==(const DelayEstimate&) const = default;
};

struct CorrespondencePair {
  TrajectoryState anchor_state;
  TrajectoryState other_state;
};

struct DelayResiduals {
  std::vector<double> values;               // m/s, one per included knot
  std::vector<std::size_t> anchor_indices;  // included anchor knots
  std::size_t n_excluded = 0;
};

struct CostSample {
  double delay = 0.0;  // s
  double cost = 0.0;   // m^2/s^2
};

struct CoarseSearchResult {
  double delay = 0.0;
  double cost = 0.0;
  // Cost identical (to rounding) over the whole grid; delay is then the
  // configured initial delay.
  bool flat = false;
  std::vector<CostSample> samples;
};

double velocity_magnitude(const TrajectoryState& state);

/// r_i = |v_anchor(t_i)| - |v_other(t_i + delay)| over anchor knots whose
/// shifted time lies inside the other trajectory. Throws InsufficientOverlap
/// when fewer than kMinOverlappingKnots remain.
DelayResiduals delay_residuals(const GPTrajectory& anchor,
                               const GPTrajectory& other, double delay);

/// dr_i/d(delay) = -(v . a) / |v| of the other trajectory at t_i + delay.
std::vector<double> delay_jacobian(const GPTrajectory& other,
                                   std::span<const double> anchor_times,
                                   double delay);

/// Sum of squared delay residuals.
double temporal_cost(const GPTrajectory& anchor, const GPTrajectory& other,
                     double delay);

/// Symmetric grid center +/- halfwidth with the given spacing. Always
/// contains the center.
std::vector<double> symmetric_grid(double center, double halfwidth, double step);

/// Inclusive grid [min, max] with the given spacing.
std::vector<double> range_grid(double min, double max, double step);

std::vector<CostSample> cost_curve(const GPTrajectory& anchor,
                                   const GPTrajectory& other,
                                   std::span<const double> delays);

CoarseSearchResult coarse_delay_search(const GPTrajectory& anchor,
                                       const GPTrajectory& other,
                                       const DelayConfig& cfg);

/// Scalar Levenberg-Marquardt on the delay started at `start`, without the
/// coarse search. Uses the iteration and tolerance fields of `cfg`.
DelayEstimate refine_delay(const GPTrajectory& anchor, const GPTrajectory& other,
                           double start, const DelayConfig& cfg);

/// Coarse grid search followed by refine_delay. Deterministic.
/// Non-convergence is reported through `converged`, not thrown.
DelayEstimate estimate_delay(const GPTrajectory& anchor,
                             const GPTrajectory& other, const DelayConfig& cfg);

/// Anchor knot posteriors paired with the other trajectory interpolated at
/// the shifted times. Throws InsufficientCorrespondences below 3 pairs.
std::vector<CorrespondencePair> build_correspondences(const GPTrajectory& anchor,
                                                      const GPTrajectory& other,
                                                      double delay);

}  // namespace gpcalib
