#pragma once

#include <vector>

#include "mirror_em/solver.hpp"

namespace mirror_em {

// Plain gradient descent on the average NLL, the non-invariant baseline.
struct GdOptions {
  double step = 1e-2;
  enum class Guard {
    kBacktrack,  // halve the step for this iteration until back in-domain
    kReject,     // mark the run diverged on the first domain exit
  };
  Guard guard = Guard::kBacktrack;
  int max_backtracks = 60;
  enum class Coordinates { kNatural, kMean };
  Coordinates coordinates = Coordinates::kNatural;
  bool record_params = false;  // natural-coordinate iterates in either mode
};

struct GdTrace {
  EmTrace base;  // algorithm "gd"; records carry t and nll only
  bool diverged = false;
  int guard_activations = 0;
  double step = 0.0;
};

GdTrace run_gd(const LatentModel& model, const NaturalParams& init, int steps,
               const GdOptions& options = {});

// Step-size grid search; keeps the best finishing run. Throws
// AllDivergedError when every candidate diverges.
struct GridSearchResult {
  GdTrace best;
  double best_step = 0.0;
  std::vector<std::pair<double, double>> attempts;  // (step, final nll; inf if diverged)
};
// Default grid: 13 step sizes log-spaced from 1 down to 1e-6.
std::vector<double> default_step_grid();
GridSearchResult grid_search_gd(const LatentModel& model, const NaturalParams& init,
                                int steps, std::vector<double> grid = {},
                                GdOptions::Guard guard = GdOptions::Guard::kBacktrack);

// Empirical smoothness of grad L: max over sampled in-domain pairs of
// |grad L(a) - grad L(b)| / |a - b|. Every box corner is probed along each
// coordinate axis first, then the remaining budget pairs uniform draws;
// each partner is a short chord away, so the ratio tracks the local
// Lipschitz constant instead of a diluted secant.
struct SmoothnessRegion {
  Vec lo;
  Vec hi;
};
// Axis-aligned box spanned by two points. Inflation widens it per coordinate;
// beware that inflating past the natural-domain boundary turns the estimate
// into a boundary probe, so the default adds none.
SmoothnessRegion region_between(const Vec& a, const Vec& b, double inflate = 0.0);
double empirical_smoothness(const LatentModel& model, const SmoothnessRegion& region,
                            int pairs, Rng& rng);

}  // namespace mirror_em
