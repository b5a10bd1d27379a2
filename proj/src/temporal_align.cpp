#include "gpcalib/temporal_align.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gpcalib/errors.hpp"

namespace gpcalib {
namespace {

constexpr double kGridSlack = 1e-9;
constexpr double kMaxDamping = 1e16;

double sum_of_squares(const std::vector<double>& r) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return s;
}

std::vector<double> included_times(const GPTrajectory& anchor,
                                   const DelayResiduals& res) {
  std::vector<double> t;
  t.reserve(res.anchor_indices.size());
  for (std::size_t i : res.anchor_indices) t.push_back(anchor.times()[i]);
  return t;
}

}  // namespace

void DelayConfig::validate() const {
  if (!std::isfinite(initial_delay)) {
    throw InvalidArgument("initial_delay must be finite");
  }
  if (!(coarse_search_halfwidth > 0.0) || !(coarse_search_step > 0.0) ||
      !(cost_tolerance > 0.0) || !(parameter_tolerance > 0.0) ||
      !(lm_initial_damping > 0.0) || max_iterations <= 0) {
    throw InvalidArgument("delay config values must be positive");
  }
  if (!(coarse_search_step < coarse_search_halfwidth)) {
    throw InvalidArgument(
        "coarse_search_step must be smaller than coarse_search_halfwidth");
  }
}

double velocity_magnitude(const TrajectoryState& state) {
  return state.velocity.norm();
}

DelayResiduals delay_residuals(const GPTrajectory& anchor,
                               const GPTrajectory& other, double delay) {
  if (!std::isfinite(delay)) throw InvalidArgument("delay must be finite");
  DelayResiduals out;
  out.values.reserve(anchor.size());
  out.anchor_indices.reserve(anchor.size());
  const auto& knots = anchor.posterior_means();
  for (std::size_t i = 0; i < knots.size(); ++i) {
    const double shifted = knots[i].time + delay;
    if (!other.contains(shifted)) {
      ++out.n_excluded;
      continue;
    }
    out.values.push_back(velocity_magnitude(knots[i]) -
                         velocity_magnitude(other.interpolate(shifted)));
    out.anchor_indices.push_back(i);
  }
  if (out.values.size() < kMinOverlappingKnots) {
    throw InsufficientOverlap(
        "only " + std::to_string(out.values.size()) +
            " anchor knots overlap the other trajectory at this delay, " +
            std::to_string(kMinOverlappingKnots) + " required",
        out.values.size());
  }
  return out;
}

std::vector<double> delay_jacobian(const GPTrajectory& other,
                                   std::span<const double> anchor_times,
                                   double delay) {
  std::vector<double> jac;
  jac.reserve(anchor_times.size());
  for (double t : anchor_times) {
    const TrajectoryState s = other.interpolate(t + delay);
    const double speed = s.velocity.norm();
    jac.push_back(speed < kMinSpeedForJacobian
                      ? 0.0
                      : -s.velocity.dot(s.acceleration) / speed);
  }
  return jac;
}

double temporal_cost(const GPTrajectory& anchor, const GPTrajectory& other,
                     double delay) {
  return sum_of_squares(delay_residuals(anchor, other, delay).values);
}

std::vector<double> symmetric_grid(double center, double halfwidth,
                                   double step) {
  if (!std::isfinite(center) || !(halfwidth >= 0.0) || !(step > 0.0)) {
    throw InvalidArgument("grid requires finite center and positive step");
  }
  const auto n = static_cast<long>(std::floor(halfwidth / step + kGridSlack));
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(2 * n + 1));
  for (long k = -n; k <= n; ++k) {
    grid.push_back(k == 0 ? center : center + static_cast<double>(k) * step);
  }
  return grid;
}

std::vector<double> range_grid(double min, double max, double step) {
  if (!std::isfinite(min) || !std::isfinite(max) || max < min ||
      !(step > 0.0)) {
    throw InvalidArgument("grid requires min <= max and a positive step");
  }
  const auto n = static_cast<long>(std::floor((max - min) / step + kGridSlack));
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(n + 1));
  for (long k = 0; k <= n; ++k) {
    grid.push_back(min + static_cast<double>(k) * step);
  }
  return grid;
}

std::vector<CostSample> cost_curve(const GPTrajectory& anchor,
                                   const GPTrajectory& other,
                                   std::span<const double> delays) {
  std::vector<CostSample> out;
  out.reserve(delays.size());
  for (double d : delays) out.push_back({d, temporal_cost(anchor, other, d)});
  return out;
}

CoarseSearchResult coarse_delay_search(const GPTrajectory& anchor,
                                       const GPTrajectory& other,
                                       const DelayConfig& cfg) {
  cfg.validate();
  const std::vector<double> grid = symmetric_grid(
      cfg.initial_delay, cfg.coarse_search_halfwidth, cfg.coarse_search_step);

  CoarseSearchResult result;
  result.samples = cost_curve(anchor, other, grid);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  std::size_t best = 0;
  for (std::size_t i = 0; i < result.samples.size(); ++i) {
    const double c = result.samples[i].cost;
    if (c < lo) {
      lo = c;
      best = i;
    }
    hi = std::max(hi, c);
  }
  // Variation at the level of accumulated rounding over the residual sum.
  const double n_terms = static_cast<double>(anchor.size());
  result.flat = (hi - lo) <= 1e-10 * n_terms * std::max(1e-6, hi / n_terms);
  if (result.flat) {
    result.delay = cfg.initial_delay;
    result.cost = temporal_cost(anchor, other, cfg.initial_delay);
  } else {
    result.delay = result.samples[best].delay;
    result.cost = lo;
  }
  return result;
}

DelayEstimate refine_delay(const GPTrajectory& anchor, const GPTrajectory& other,
                           double start, const DelayConfig& cfg) {
  cfg.validate();
  double delay = start;
  DelayResiduals res = delay_residuals(anchor, other, delay);
  double cost = sum_of_squares(res.values);
  double damping = cfg.lm_initial_damping;

  DelayEstimate est;
  bool done = false;
  while (!done && est.iterations < cfg.max_iterations) {
    ++est.iterations;
    const std::vector<double> jac =
        delay_jacobian(other, included_times(anchor, res), delay);
    double gradient = 0.0;
    double hessian = 0.0;
    for (std::size_t i = 0; i < jac.size(); ++i) {
      gradient += jac[i] * res.values[i];
      hessian += jac[i] * jac[i];
    }
    if (gradient == 0.0 || hessian == 0.0) {
      // Stationary point, or no information about the delay at all.
      est.converged = gradient == 0.0;
      break;
    }

    for (;;) {
      const double step = -gradient / (hessian * (1.0 + damping));
      const double candidate = delay + step;
      bool accepted = false;
      DelayResiduals trial;
      double trial_cost = 0.0;
      try {
        trial = delay_residuals(anchor, other, candidate);
        trial_cost = sum_of_squares(trial.values);
        accepted = trial_cost < cost;
      } catch (const InsufficientOverlap&) {
        accepted = false;
      }

      if (accepted) {
        const double decrease = (cost - trial_cost) / std::max(cost, 1e-300);
        delay = candidate;
        res = std::move(trial);
        cost = trial_cost;
        damping = std::max(damping / 10.0, 1e-12);
        if (decrease < cfg.cost_tolerance ||
            std::abs(step) < cfg.parameter_tolerance) {
          est.converged = true;
          done = true;
        }
        break;
      }
      damping *= 10.0;
      if (std::abs(step) < cfg.parameter_tolerance) {
        // No descent left at the resolution we care about.
        est.converged = true;
        done = true;
        break;
      }
      if (damping > kMaxDamping) {
        done = true;
        break;
      }
    }
  }

  const std::vector<double> jac =
      delay_jacobian(other, included_times(anchor, res), delay);
  double abs_sum = 0.0;
  for (double j : jac) abs_sum += std::abs(j);

  est.delay = delay;
  est.final_cost = cost;
  est.n_correspondences = res.values.size();
  est.n_excluded = res.n_excluded;
  est.rms_residual =
      std::sqrt(cost / static_cast<double>(est.n_correspondences));
  est.observability = abs_sum / static_cast<double>(jac.size());
  est.unobservable = est.observability < kObservabilityThreshold;
  return est;
}

DelayEstimate estimate_delay(const GPTrajectory& anchor,
                             const GPTrajectory& other,
                             const DelayConfig& cfg) {
  const CoarseSearchResult coarse = coarse_delay_search(anchor, other, cfg);
  DelayEstimate est = refine_delay(anchor, other, coarse.delay, cfg);
  est.unobservable = est.unobservable || coarse.flat;
  return est;
}

std::vector<CorrespondencePair> build_correspondences(const GPTrajectory& anchor,
                                                      const GPTrajectory& other,
                                                      double delay) {
  if (!std::isfinite(delay)) throw InvalidArgument("delay must be finite");
  std::vector<CorrespondencePair> pairs;
  pairs.reserve(anchor.size());
  for (const TrajectoryState& s : anchor.posterior_means()) {
    const double shifted = s.time + delay;
    if (!other.contains(shifted)) continue;
    pairs.push_back({s, other.interpolate(shifted)});
  }
  if (pairs.size() < 3) {
    throw InsufficientCorrespondences(
        "only " + std::to_string(pairs.size()) +
        " time-aligned correspondences, at least 3 are required");
  }
  return pairs;
}

}  // namespace gpcalib
