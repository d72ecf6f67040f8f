#include "mirror_em/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "mirror_em/errors.hpp"

namespace mirror_em {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Gradient with respect to the state vector in the chosen coordinates. In
// mean coordinates the chain rule divides by the Fisher information, since
// d(theta)/d(mu) is its inverse.
Vec state_gradient(const LatentModel& model, const NaturalParams& theta,
                   GdOptions::Coordinates coords) {
  const Vec grad = nll_gradient(model, theta);
  if (coords == GdOptions::Coordinates::kNatural) return grad;
  const Mat fisher = fisher_information(theta);
  Eigen::LLT<Mat> llt(fisher);
  if (llt.info() != Eigen::Success) {
    throw SolveError("fisher information not positive definite in mean-coordinate step");
  }
  return llt.solve(grad);
}

bool state_in_domain(const LatentModel& model, const Vec& state,
                     GdOptions::Coordinates coords) {
  const Family& family = *model.complete_family();
  if (coords == GdOptions::Coordinates::kNatural) return family.in_natural_domain(state);
  return family.in_mean_domain(state);
}

NaturalParams state_to_natural(const LatentModel& model, const Vec& state,
                               GdOptions::Coordinates coords) {
  if (coords == GdOptions::Coordinates::kNatural) {
    return NaturalParams(model.complete_family(), state);
  }
  return inverse_mean_map(MeanParams(model.complete_family(), state));
}

}  // namespace

GdTrace run_gd(const LatentModel& model, const NaturalParams& init, int steps,
               const GdOptions& options) {
  if (steps < 1) throw ConfigError("gd needs at least one step");
  if (!(options.step >= 0.0) || !std::isfinite(options.step)) {
    throw ConfigError("gd step size must be non-negative and finite");
  }

  GdTrace trace;
  trace.step = options.step;
  trace.base.algorithm = "gd";
  trace.base.meta["coordinates"] =
      options.coordinates == GdOptions::Coordinates::kNatural ? "natural" : "mean";

  Vec state = options.coordinates == GdOptions::Coordinates::kNatural
                  ? init.values()
                  : mean_map(init).values();

  for (int t = 1; t <= steps; ++t) {
    NaturalParams theta = state_to_natural(model, state, options.coordinates);

    IterationRecord rec;
    rec.t = t;
    rec.nll = nll(model, theta);
    if (options.record_params) rec.params = theta.values();
    trace.base.records.push_back(rec);
    if (!std::isfinite(rec.nll)) {
      trace.diverged = true;
      break;
    }

    Vec grad;
    try {
      grad = state_gradient(model, theta, options.coordinates);
    } catch (const SolveError&) {
      trace.diverged = true;
      break;
    }

    double step = options.step;
    Vec next = state - step * grad;
    if (!state_in_domain(model, next, options.coordinates)) {
      if (options.guard == GdOptions::Guard::kReject) {
        trace.diverged = true;
        break;
      }
      int backtracks = 0;
      while (!state_in_domain(model, next, options.coordinates)) {
        if (++backtracks > options.max_backtracks) break;
        step *= 0.5;
        next = state - step * grad;
      }
      trace.guard_activations += backtracks;
      if (backtracks > options.max_backtracks) {
        trace.diverged = true;
        break;
      }
    }
    state = next;
  }

  if (!trace.diverged) {
    NaturalParams theta = state_to_natural(model, state, options.coordinates);
    IterationRecord rec;
    rec.t = steps + 1;
    rec.nll = nll(model, theta);
    if (options.record_params) rec.params = theta.values();
    trace.base.records.push_back(rec);
    if (!std::isfinite(rec.nll)) {
      trace.diverged = true;
    } else {
      trace.base.final_params = theta.values();
    }
  }
  if (trace.diverged) trace.base.failure = "diverged";
  return trace;
}

std::vector<double> default_step_grid() {
  std::vector<double> grid;
  for (int i = 0; i < 13; ++i) grid.push_back(std::pow(10.0, -0.5 * i));
  return grid;
}

GridSearchResult grid_search_gd(const LatentModel& model, const NaturalParams& init,
                                int steps, std::vector<double> grid,
                                GdOptions::Guard guard) {
  if (grid.empty()) grid = default_step_grid();
  GridSearchResult result;
  double best_nll = kInf;
  for (double step : grid) {
    GdOptions options;
    options.step = step;
    options.guard = guard;
    GdTrace trace = run_gd(model, init, steps, options);
    const double finishing = trace.diverged ? kInf : trace.base.final_nll();
    result.attempts.emplace_back(step, finishing);
    // Ties break toward the smaller step.
    const bool better = finishing < best_nll ||
                        (finishing == best_nll && std::isfinite(finishing) &&
                         step < result.best_step);
    if (better) {
      best_nll = finishing;
      result.best = std::move(trace);
      result.best_step = step;
    }
  }
  if (!std::isfinite(best_nll)) {
    throw AllDivergedError("every gd step size in the grid diverged");
  }
  return result;
}

SmoothnessRegion region_between(const Vec& a, const Vec& b, double inflate) {
  if (a.size() != b.size()) throw ConfigError("region endpoints differ in size");
  SmoothnessRegion region;
  region.lo = a.cwiseMin(b);
  region.hi = a.cwiseMax(b);
  const Vec pad = inflate * (region.hi - region.lo);
  region.lo -= pad;
  region.hi += pad;
  return region;
}

double empirical_smoothness(const LatentModel& model, const SmoothnessRegion& region,
                            int pairs, Rng& rng) {
  const Family& family = *model.complete_family();
  if (region.lo.size() != family.dim() || region.hi.size() != family.dim()) {
    throw ConfigError("smoothness region size does not match the family");
  }
  if (pairs < 1) throw ConfigError("smoothness estimate needs at least one pair");

  const Eigen::Index d = region.lo.size();
  const Vec width = region.hi - region.lo;

  const auto draw_uniform = [&]() -> Vec {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      Vec point(d);
      for (Eigen::Index i = 0; i < d; ++i) {
        point[i] = rng.uniform(region.lo[i], region.hi[i]);
      }
      if (family.in_natural_domain(point)) return point;
    }
    throw NumericalError("could not sample an in-domain point from the smoothness region");
  };

  // The extreme curvature of these losses concentrates near region corners,
  // where uniform draws land too rarely once the box is elongated, so the
  // corners are visited deterministically before the random anchors.
  std::vector<Vec> corners;
  if (d <= 12) {
    for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
      Vec corner(d);
      for (Eigen::Index i = 0; i < d; ++i) {
        corner[i] = (mask >> i) & 1 ? region.hi[i] : region.lo[i];
      }
      if (family.in_natural_domain(corner)) corners.push_back(std::move(corner));
    }
  }

  double worst = 0.0;
  int budget = pairs;
  const auto evaluate = [&](const Vec& anchor, const Vec& partner, bool inside) {
    --budget;
    const double dist = (anchor - partner).norm();
    if (!inside || dist < 1e-12) return;
    const Vec ga = nll_gradient(model, NaturalParams(model.complete_family(), anchor));
    const Vec gb = nll_gradient(model, NaturalParams(model.complete_family(), partner));
    worst = std::max(worst, (ga - gb).norm() / dist);
  };

  // Each corner probes every coordinate with a short inward chord. A single
  // random chord would weight the axes by box width, which hides a curvature
  // spike whose steep direction spans a narrow side of the box.
  for (const Vec& corner : corners) {
    for (Eigen::Index i = 0; i < d && budget > 0; ++i) {
      if (width[i] <= 0.0) continue;
      const double inward = corner[i] == region.hi[i] ? -1.0 : 1.0;
      Vec partner = corner;
      bool inside = false;
      for (double scale = 1e-3; scale > 1e-12; scale *= 0.5) {
        partner[i] = corner[i] + inward * scale * width[i];
        if (family.in_natural_domain(partner)) {
          inside = true;
          break;
        }
      }
      evaluate(corner, partner, inside);
    }
    if (budget <= 0) break;
  }

  while (budget > 0) {
    const Vec anchor = draw_uniform();
    // Short chords approximate the local Lipschitz ratio; long ones dilute
    // curvature spikes across the whole box.
    Vec partner(d);
    bool inside = false;
    for (double scale = 1e-3; scale > 1e-12; scale *= 0.5) {
      for (Eigen::Index i = 0; i < d; ++i) {
        const double jitter = rng.uniform(-scale, scale) * width[i];
        partner[i] = std::clamp(anchor[i] + jitter, region.lo[i], region.hi[i]);
      }
      if (family.in_natural_domain(partner)) {
        inside = true;
        break;
      }
    }
    evaluate(anchor, partner, inside);
  }
  return worst;
}

}  // namespace mirror_em
