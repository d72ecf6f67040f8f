#pragma once

#include <functional>
#include <optional>

#include "mirror_em/models.hpp"
#include "mirror_em/tolerances.hpp"
#include "mirror_em/trace.hpp"

namespace mirror_em {

struct EmOptions {
  // Stop once the Bregman stationarity certificate drops below this.
  double stationarity_stop = Tolerances::stationarity_stop;
  bool record_decrement = false;
  bool record_missing_info = false;  // adds a finite-difference Hessian per step
  bool record_params = false;
};

// Exact EM as mirror descent with unit step: theta <- m_step(expected_stats).
// The trace records, per iterate, the average NLL, the step KL
// D_A(theta_t, theta_{t+1}), and the stationarity certificate
// D_A*(s(theta_t), mu_t); the two step quantities agree to working precision
// for exact EM. A DomainError or ZeroWeightComponentError raised by the
// M-step ends the run with the failure recorded, keeping the trace valid.
EmTrace run_em(const LatentModel& model, const NaturalParams& init, int max_steps,
               const EmOptions& options = {});

// One explicit mirror-descent step on the average NLL with the complete-data
// log partition as mirror map: pull back grad L through the mean map, move in
// mean coordinates, return. Algebraically identical to the M-step.
NaturalParams mirror_step(const LatentModel& model, const NaturalParams& params);

// D_A*(s(theta), mean_map(theta)): zero exactly at stationary points of the
// NLL. Returns +inf if the expected statistics sit on the mean-domain
// boundary (reported, not an error: the quantity genuinely diverges).
double bregman_stationarity(const LatentModel& model, const NaturalParams& params);

// |grad L(theta)|^2 in the inverse complete-data Fisher metric, via one SPD
// solve. Approximates twice the stationarity certificate near stationary
// points and is invariant under smooth reparametrization. Throws SolveError
// if the Fisher factorization fails.
double natural_decrement(const LatentModel& model, const NaturalParams& params);

// Fraction-of-missing-information spectrum at a point. The NLL Hessian is
// built by central finite differences of the analytic gradient; the latent
// Fisher is the difference from the complete-data Fisher.
struct MissingInformation {
  Mat complete_fisher;   // hess A(theta)
  Mat nll_hessian;       // hess L(theta), finite differences
  Mat latent_fisher;     // complete_fisher - nll_hessian
  double lambda_max;     // top eigenvalue of the missing-information operator
  double lambda_min;
  bool conditioning_warning;  // finite-difference asymmetry above 1e-4
};
MissingInformation missing_information(const LatentModel& model, const NaturalParams& params);

// Per-trace descent/rate certificates for exact EM.
struct RateBoundReport {
  bool passed = false;
  // max_t [ D_A(theta_t, theta_{t+1}) - (L_t - L_{t+1}) ]; descent requires <= slack.
  double max_step_violation = 0.0;
  // min_t kl_step vs (L_1 - L_final)/steps.
  double min_kl_step = 0.0;
  double averaged_gap_bound = 0.0;
  // max_t |kl_step_t - bregman_stat_t| (stationarity = step KL for exact EM).
  double max_stationarity_mismatch = 0.0;
  std::string detail;
};
RateBoundReport check_rate_bounds(const EmTrace& trace);

// Local linear rate against a reference optimum: over the trace tail,
//   L_{t+1} - L_ref <= (max tail lambda_max + slack) (L_t - L_ref) + slack.
// Requires lambda_max_missing in at least `min_tail` closing records.
struct LinearRateReport {
  bool passed = false;
  double lambda_max_tail = 0.0;
  double worst_violation = 0.0;  // max_t [gap_{t+1} - rate * gap_t]
  int tail_steps = 0;
  std::vector<double> contraction_ratios;  // only where the gap is resolvable
  std::string detail;
};
LinearRateReport check_local_linear_rate(const EmTrace& trace, double reference_nll,
                                         int min_tail = 5);

std::string report_to_json(const RateBoundReport& report);
std::string report_to_json(const LinearRateReport& report);

}  // namespace mirror_em
