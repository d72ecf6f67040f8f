#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mirror_em/baseline.hpp"
#include "mirror_em/models.hpp"
#include "mirror_em/variants.hpp"

namespace mirror_em {

// Independent numerical oracles. Everything here recomputes a quantity by a
// route the library under test does not take: finite differences instead of
// closed-form derivatives, quadrature or exact sums instead of Bregman
// algebra, exhaustive enumeration instead of the responsibility E-step.

// Central differences with per-coordinate step h * (1 + |x_i|). A probe that
// makes `f` throw DomainError shrinks that coordinate's step and retries.
Vec finite_diff_gradient(const std::function<double(const Vec&)>& f, const Vec& point,
                         double h = 1e-5);
Mat finite_diff_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& point,
                         double h = 1e-5);
// Second differences of the scalar itself, never of a gradient, so the
// result is independent of any analytic first derivative.
Mat finite_diff_hessian(const std::function<double(const Vec&)>& f, const Vec& point,
                        double h = 5e-4);

// KL divergence between two members of the same family, computed from actual
// densities: exact sums for bernoulli and categorical, adaptive
// Gauss-Kronrod quadrature for the Gaussian families. Throws
// UnsupportedError for families without a density route here.
double numeric_kl(const NaturalParams& from, const NaturalParams& to,
                  double target = 1e-9);

// Adaptive G7/K15 quadrature to an absolute tolerance.
double adaptive_quadrature(const std::function<double(double)>& f, double lo, double hi,
                           double target);

// Exhaustive posterior mean of the complete-data statistic: sums over all
// k^n label assignments in log space. Capped at n <= 8, k <= 3; beyond that
// throws TooLargeError.
Vec enumerate_posterior_stats(const ExpFamilyMixtureModel& model,
                              const NaturalParams& params);

// Replays the recorded sample path of an online EM run through the explicit
// stochastic mirror descent recursion and reports how far the natural
// iterates drift apart.
struct SmdReport {
  double max_deviation = 0.0;
  OnlineTrace online;
  std::vector<Vec> smd_params;  // natural iterate after each update
};
SmdReport smd_equivalence(const LatentModel& model, const NaturalParams& init,
                          int updates, const OnlineSchedule& schedule,
                          std::uint64_t seed);

// Runs EM once in natural coordinates and once in mean coordinates, pairing
// the iterates by complete-data KL, then does the same for gradient descent.
// EM should be invariant to the parameterization; GD should not be.
struct ReparamReport {
  double em_max_kl = 0.0;   // largest divergence between paired EM iterates
  double gd_kl = 0.0;       // largest divergence between paired GD iterates
  int gd_check_step = 0;    // GD pairing is scanned up to this step
  bool gd_mean_diverged = false;
  // Natural decrement evaluated in both coordinate systems along the EM
  // path; the values should agree to roundoff.
  double decrement_max_rel_diff = 0.0;
};
ReparamReport reparam_invariance(const LatentModel& model, const NaturalParams& init,
                                 int em_steps, double gd_step, int gd_check_step = 5);

}  // namespace mirror_em
