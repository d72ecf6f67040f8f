#pragma once

#include <functional>

#include "mirror_em/laplace.hpp"
#include "mirror_em/solver.hpp"

namespace mirror_em {

// ----- Generalized EM: inexact M-steps with certificates -----

struct GemPolicy {
  enum class Mode {
    // ECM-style: every step refreshes the mixture weights and exactly
    // optimizes one uniformly chosen component block, leaving the rest. The
    // surrogate is separable across blocks, so the expected surrogate gap
    // contracts by 1 - 1/k per step.
    kMultiplicative,
    // Inner gradient descent on the surrogate until its gap to the exact
    // M-step value is at most epsilon(t).
    kAdditive,
  };
  Mode mode = Mode::kMultiplicative;
  std::function<double(int)> epsilon = [](int t) {
    return 1.0 / (static_cast<double>(t) * static_cast<double>(t));
  };
  int max_inner_steps = 100000;
};

// Runs generalized EM; the trace carries surrogate_gap certificates
// Q_t(theta_{t+1}) - min Q_t per step. Throws CertificateError if the
// additive inner loop cannot reach its target gap within the step budget.
EmTrace run_generalized_em(const LatentModel& model, const NaturalParams& init, int steps,
                           const GemPolicy& policy, std::uint64_t seed);

// Seed sweep for the multiplicative guarantee: with block count k, averaged
// over seeds, min_t D_A*(s(theta_t), mu_t) <= k (L_1 - L_final)/T within
// three standard errors of the paired difference.
struct GemSweepReport {
  int seeds = 0;
  double mean_min_stationarity = 0.0;
  double mean_bound = 0.0;  // k * (L_1 - L_final) / T, seed average
  double se_delta = 0.0;    // standard error of (min stationarity - bound)
  bool passed = false;
};
GemSweepReport check_multiplicative_gem_bound(const LatentModel& model,
                                              const NaturalParams& init, int steps,
                                              int n_seeds, std::uint64_t base_seed);

// Per-run additive guarantee:
// min_t D_A*(s,mu) <= (L_1 - L_final)/T + mean_t epsilon(t) + slack.
struct GemAdditiveReport {
  double min_stationarity = 0.0;
  double gap_bound = 0.0;
  double epsilon_mean = 0.0;
  bool passed = false;
};
GemAdditiveReport check_additive_gem_bound(const EmTrace& trace, const GemPolicy& policy);

// ----- Online EM -----

struct OnlineSchedule {
  enum class Kind { kOneOverT, kConstant };
  Kind kind = Kind::kOneOverT;
  // gamma_t = 1 / (t + offset) for kOneOverT (t starts at 1), else `value`.
  double offset = 0.0;
  double value = 1.0;

  double at(int t) const;
  static OnlineSchedule one_over_t(double offset = 0.0);
  static OnlineSchedule constant(double value);
};

struct OnlineOptions {
  bool record_mean_iterates = false;
  bool record_drawn_stats = false;
};

struct OnlineTrace {
  EmTrace base;  // per-update records: t and full-dataset nll
  std::vector<Eigen::Index> sample_indices;
  std::vector<double> step_sizes;
  std::vector<Vec> mean_iterates;  // mu_t after each update, if recorded
  std::vector<Vec> drawn_stats;    // s_{i_t}(theta_t), if recorded
  Vec final_mean;
};

// Stochastic mean-space averaging: mu <- (1-gamma_t) mu + gamma_t s_i(theta),
// theta <- inverse_mean_map(mu), with i drawn uniformly per update. Throws
// DomainError if an update leaves the open mean domain (no projection).
OnlineTrace run_online_em(const LatentModel& model, const NaturalParams& init, int updates,
                          const OnlineSchedule& schedule, std::uint64_t seed,
                          const OnlineOptions& options = {});

// ----- MAP EM with a conjugate prior -----

// Conjugate prior encoded as pseudo-observations: expected sufficient
// statistics m0 (a strictly interior mean point) with strength n0 > 0.
struct Prior {
  Vec pseudo_stats;
  double strength = 0.0;
};

void validate_prior(const LatentModel& model, const Prior& prior);

// (n L(theta) + n0 (A(theta) - <m0, theta>)) / (n + n0); the prior's
// normalizer is constant in theta and dropped.
double map_objective(const LatentModel& model, const NaturalParams& params,
                     const Prior& prior);

// MAP EM: theta <- inverse_mean_map((n s(theta) + n0 m0) / (n + n0)).
// The blended statistics stay strictly interior for any proper prior, so the
// update never leaves the domain, even on datasets where maximum likelihood
// degenerates. Trace nll is the MAP objective; nll_unpenalized keeps the
// plain average NLL; kl_step and bregman_stat are the exact-EM analogues
// (and satisfy the same descent inequalities), so check_rate_bounds applies.
EmTrace run_map_em(const LatentModel& model, const NaturalParams& init, int steps,
                   const Prior& prior, const EmOptions& options = {});

// ----- E-step analysis for the Laplace mixture -----

// Alternating exact E/M steps on a mixture whose M-step is a weighted median
// and weighted mean absolute deviation. The complete-data likelihood is not
// an exponential family in these parameters, but the responsibility simplex
// is, and consecutive responsibilities obey the same per-step inequality:
// mean_i KL(resp_t(i) || resp_{t+1}(i)) <= L_t - L_{t+1}. The trace stores
// that KL in kl_step, so check_rate_bounds applies verbatim.
struct EstepAnalysis {
  EmTrace trace;  // algorithm "estep_mirror"
  LaplaceParams final_params;
};
EstepAnalysis run_estep_analysis(const LaplaceMixtureModel& model,
                                 const LaplaceParams& init, int steps);

std::string report_to_json(const GemSweepReport& report);
std::string report_to_json(const GemAdditiveReport& report);

}  // namespace mirror_em
