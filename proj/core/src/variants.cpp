#include "mirror_em/variants.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nlohmann/json.hpp"

namespace mirror_em {

namespace {

// Shared record prologue for one iterate: objective, stationarity.
IterationRecord start_record(const LatentModel& model, const NaturalParams& params, int t) {
  IterationRecord rec;
  rec.t = t;
  rec.nll = model.nll(params);
  rec.bregman_stat = bregman_stationarity(model, params);
  return rec;
}

}  // namespace

// ----- Generalized EM -----

namespace {

NaturalParams multiplicative_update(const ExpFamilyMixtureModel& model,
                                    const NaturalParams& params, const MeanParams& stats,
                                    Rng& rng) {
  const MixtureCompleteFamily& mixture = model.mixture();
  const Eigen::Index k = mixture.components();
  Vec weights;
  std::vector<Vec> conditional;
  for (Eigen::Index j = 0; j < mixture.label_dim(); ++j) {
    if (stats.values()[j] == 0.0) {
      throw ZeroWeightComponentError(model.kind() + ": component " + std::to_string(j) +
                                     " has zero responsibility mass");
    }
  }
  mixture.mean_parts(stats.values(), weights, conditional);
  if ((weights.array() <= 0.0).any()) {
    throw ZeroWeightComponentError(model.kind() + ": a component lost all mass");
  }

  const Eigen::Index chosen = static_cast<Eigen::Index>(rng.below(k));
  std::vector<Vec> blocks(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    if (j == chosen) {
      if (!mixture.component_family()->in_mean_domain(conditional[j])) {
        throw DomainError(model.kind() + ": chosen block's statistics are degenerate");
      }
      blocks[j] = mixture.component_family()->inverse_mean_map(conditional[j]);
    } else {
      blocks[j] = mixture.component_block(params.values(), j);
    }
  }
  return NaturalParams(params.family_ptr(), mixture.natural_from_parts(weights, blocks));
}

NaturalParams additive_update(const LatentModel& model, const NaturalParams& params,
                              const MeanParams& stats, double epsilon, int max_inner,
                              double& achieved_gap) {
  const FamilyPtr family = params.family_ptr();
  const NaturalParams exact = m_step(model, stats);
  // A zero gap target asks for the exact minimizer; gradient descent cannot
  // certify that in floating point, but the closed form can.
  if (epsilon <= 0.0) {
    achieved_gap = 0.0;
    return exact;
  }
  const double optimum = surrogate_value(model, stats, exact);

  Vec point = params.values();
  double value = surrogate_value(model, stats, params);
  double step = 1.0;
  for (int inner = 0; inner < max_inner; ++inner) {
    if (value - optimum <= epsilon) {
      achieved_gap = value - optimum;
      return NaturalParams(family, point);
    }
    const Vec gradient = family->mean_map(point) - stats.values();
    const double gnorm2 = gradient.squaredNorm();
    // Armijo backtracking; domain exits shrink the step the same way.
    step = std::min(1.0, step * 2.0);
    bool moved = false;
    for (int halvings = 0; halvings < 200; ++halvings) {
      const Vec candidate = point - step * gradient;
      if (family->in_natural_domain(candidate)) {
        const double candidate_value =
            family->log_partition(candidate) - stats.values().dot(candidate);
        if (candidate_value <= value - 0.5 * step * gnorm2) {
          point = candidate;
          value = candidate_value;
          moved = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!moved) {
      throw CertificateError(model.kind() +
                             ": inner surrogate descent stalled before reaching its gap "
                             "target " +
                             std::to_string(epsilon));
    }
  }
  throw CertificateError(model.kind() + ": inner surrogate descent exceeded " +
                         std::to_string(max_inner) + " steps with gap target " +
                         std::to_string(epsilon));
}

}  // namespace

EmTrace run_generalized_em(const LatentModel& model, const NaturalParams& init, int steps,
                           const GemPolicy& policy, std::uint64_t seed) {
  const auto* mixture_model = dynamic_cast<const ExpFamilyMixtureModel*>(&model);
  if (policy.mode == GemPolicy::Mode::kMultiplicative && mixture_model == nullptr) {
    throw UnsupportedError(model.kind() + ": multiplicative GEM needs mixture blocks");
  }
  Rng rng(seed);
  EmTrace trace;
  trace.algorithm = policy.mode == GemPolicy::Mode::kMultiplicative ? "gem_multiplicative"
                                                                    : "gem_additive";
  NaturalParams params = init;
  for (int t = 1; t <= steps; ++t) {
    IterationRecord rec = start_record(model, params, t);
    const MeanParams stats = model.expected_stats(params);
    NaturalParams next = params;
    try {
      if (policy.mode == GemPolicy::Mode::kMultiplicative) {
        next = multiplicative_update(*mixture_model, params, stats, rng);
        rec.surrogate_gap = surrogate_value(model, stats, next) -
                            surrogate_value(model, stats, m_step(model, stats));
      } else {
        double gap = 0.0;
        next = additive_update(model, params, stats, policy.epsilon(t),
                               policy.max_inner_steps, gap);
        rec.surrogate_gap = gap;
      }
    } catch (const DomainError& err) {
      trace.records.push_back(std::move(rec));
      trace.failure = err.what();
      trace.final_params = params.values();
      return trace;
    } catch (const ZeroWeightComponentError& err) {
      trace.records.push_back(std::move(rec));
      trace.failure = err.what();
      trace.final_params = params.values();
      return trace;
    }
    rec.kl_step = bregman_divergence(params, next);
    trace.records.push_back(std::move(rec));
    params = next;
  }
  IterationRecord last = start_record(model, params, steps + 1);
  trace.records.push_back(std::move(last));
  trace.final_params = params.values();
  return trace;
}

GemSweepReport check_multiplicative_gem_bound(const LatentModel& model,
                                              const NaturalParams& init, int steps,
                                              int n_seeds, std::uint64_t base_seed) {
  GemPolicy policy;
  policy.mode = GemPolicy::Mode::kMultiplicative;
  const double blocks = static_cast<double>(model.components());

  GemSweepReport report;
  report.seeds = n_seeds;
  std::vector<double> deltas;
  double sum_min = 0.0, sum_bound = 0.0;
  for (int s = 0; s < n_seeds; ++s) {
    const EmTrace trace =
        run_generalized_em(model, init, steps, policy, base_seed + static_cast<std::uint64_t>(s));
    if (trace.failure) {
      throw NumericalError("generalized EM sweep hit a degenerate run: " + *trace.failure);
    }
    double min_stat = std::numeric_limits<double>::infinity();
    for (const auto& rec : trace.records) {
      if (rec.kl_step && rec.bregman_stat) min_stat = std::min(min_stat, *rec.bregman_stat);
    }
    const double bound = blocks * (trace.initial_nll() - trace.final_nll()) /
                         static_cast<double>(trace.steps());
    sum_min += min_stat;
    sum_bound += bound;
    deltas.push_back(min_stat - bound);
  }
  const double n = static_cast<double>(n_seeds);
  report.mean_min_stationarity = sum_min / n;
  report.mean_bound = sum_bound / n;
  const double mean_delta = report.mean_min_stationarity - report.mean_bound;
  double var = 0.0;
  for (double d : deltas) var += (d - mean_delta) * (d - mean_delta);
  var /= (n - 1.0);
  report.se_delta = std::sqrt(var / n);
  report.passed = mean_delta <= 3.0 * report.se_delta + Tolerances::rate_slack;
  return report;
}

GemAdditiveReport check_additive_gem_bound(const EmTrace& trace, const GemPolicy& policy) {
  GemAdditiveReport report;
  const int steps = trace.steps();
  double min_stat = std::numeric_limits<double>::infinity();
  double eps_sum = 0.0;
  int t = 0;
  for (const auto& rec : trace.records) {
    if (!rec.kl_step) continue;
    ++t;
    eps_sum += policy.epsilon(t);
    if (rec.bregman_stat) min_stat = std::min(min_stat, *rec.bregman_stat);
  }
  report.min_stationarity = min_stat;
  report.epsilon_mean = eps_sum / static_cast<double>(steps);
  report.gap_bound =
      (trace.initial_nll() - trace.final_nll()) / static_cast<double>(steps);
  report.passed = min_stat <= report.gap_bound + report.epsilon_mean + Tolerances::rate_slack;
  return report;
}

// ----- Online EM -----

double OnlineSchedule::at(int t) const {
  if (kind == Kind::kConstant) return value;
  return 1.0 / (static_cast<double>(t) + offset);
}

OnlineSchedule OnlineSchedule::one_over_t(double offset) {
  OnlineSchedule out;
  out.kind = Kind::kOneOverT;
  out.offset = offset;
  return out;
}

OnlineSchedule OnlineSchedule::constant(double value) {
  OnlineSchedule out;
  out.kind = Kind::kConstant;
  out.value = value;
  return out;
}

OnlineTrace run_online_em(const LatentModel& model, const NaturalParams& init, int updates,
                          const OnlineSchedule& schedule, std::uint64_t seed,
                          const OnlineOptions& options) {
  for (int t = 1; t <= updates; ++t) {
    const double gamma = schedule.at(t);
    if (!(gamma > 0.0) || gamma > 1.0) {
      throw ConfigError("online EM: step size at t=" + std::to_string(t) +
                        " must lie in (0, 1], got " + std::to_string(gamma));
    }
  }
  const Eigen::Index n = model.data().n();
  Rng rng(seed);
  OnlineTrace trace;
  trace.base.algorithm = "online_em";

  const FamilyPtr family = init.family_ptr();
  NaturalParams params = init;
  Vec mean = family->mean_map(params.values());
  for (int t = 1; t <= updates; ++t) {
    const double gamma = schedule.at(t);
    const Eigen::Index pick = static_cast<Eigen::Index>(rng.below(n));
    const Vec sample_stats = model.expected_stats_for_sample(params, pick);
    mean = (1.0 - gamma) * mean + gamma * sample_stats;
    if (!family->in_mean_domain(mean)) {
      throw DomainError(model.kind() + ": online update " + std::to_string(t) +
                        " (step size " + std::to_string(gamma) +
                        ") left the open mean domain; no projection is applied");
    }
    params = NaturalParams(family, family->inverse_mean_map(mean));

    IterationRecord rec;
    rec.t = t;
    rec.nll = model.nll(params);
    trace.base.records.push_back(std::move(rec));
    trace.sample_indices.push_back(pick);
    trace.step_sizes.push_back(gamma);
    if (options.record_mean_iterates) trace.mean_iterates.push_back(mean);
    if (options.record_drawn_stats) trace.drawn_stats.push_back(sample_stats);
  }
  trace.base.final_params = params.values();
  trace.final_mean = mean;
  return trace;
}

// ----- MAP EM -----

void validate_prior(const LatentModel& model, const Prior& prior) {
  const FamilyPtr family = model.complete_family();
  if (prior.pseudo_stats.size() != family->dim()) {
    throw ImproperPriorError(model.kind() + ": prior statistics have size " +
                             std::to_string(prior.pseudo_stats.size()) +
                             ", family dimension is " + std::to_string(family->dim()));
  }
  if (!(prior.strength > 0.0) || !std::isfinite(prior.strength)) {
    throw ImproperPriorError(model.kind() + ": prior strength must be positive and finite");
  }
  if (!family->in_mean_domain(prior.pseudo_stats)) {
    throw ImproperPriorError(model.kind() +
                             ": prior statistics must lie strictly inside the mean domain");
  }
}

double map_objective(const LatentModel& model, const NaturalParams& params,
                     const Prior& prior) {
  const double n = static_cast<double>(model.data().n());
  const double plain = model.nll(params);
  const double log_part = params.family().log_partition(params.values());
  return (n * plain +
          prior.strength * (log_part - prior.pseudo_stats.dot(params.values()))) /
         (n + prior.strength);
}

EmTrace run_map_em(const LatentModel& model, const NaturalParams& init, int steps,
                   const Prior& prior, const EmOptions& options) {
  validate_prior(model, prior);
  const double n = static_cast<double>(model.data().n());
  const FamilyPtr family = model.complete_family();

  EmTrace trace;
  trace.algorithm = "map_em";
  NaturalParams params = init;
  for (int t = 1; t <= steps; ++t) {
    IterationRecord rec;
    rec.t = t;
    rec.nll = map_objective(model, params, prior);
    rec.nll_unpenalized = model.nll(params);
    if (options.record_params) rec.params = params.values();

    // Blend of data statistics and prior pseudo-statistics; strictly interior
    // for any proper prior, so the update below cannot leave the domain.
    const Vec blended = (n * model.expected_stats(params).values() +
                         prior.strength * prior.pseudo_stats) /
                        (n + prior.strength);
    const MeanParams mean = mean_map(params);
    rec.bregman_stat = dual_bregman_divergence(MeanParams(family, blended), mean);
    if (*rec.bregman_stat < options.stationarity_stop) {
      trace.records.push_back(std::move(rec));
      break;
    }
    const NaturalParams next(family, family->inverse_mean_map(blended));
    rec.kl_step = bregman_divergence(params, next);
    trace.records.push_back(std::move(rec));
    params = next;
    if (t == steps) {
      IterationRecord last;
      last.t = t + 1;
      last.nll = map_objective(model, params, prior);
      last.nll_unpenalized = model.nll(params);
      const Vec last_blend = (n * model.expected_stats(params).values() +
                              prior.strength * prior.pseudo_stats) /
                             (n + prior.strength);
      last.bregman_stat =
          dual_bregman_divergence(MeanParams(family, last_blend), mean_map(params));
      trace.records.push_back(std::move(last));
    }
  }
  trace.final_params = params.values();
  return trace;
}

// ----- Laplace E-step analysis -----

EstepAnalysis run_estep_analysis(const LaplaceMixtureModel& model, const LaplaceParams& init,
                                 int steps) {
  EstepAnalysis out;
  out.trace.algorithm = "estep_mirror";
  LaplaceParams params = validate_laplace_params(model, init);
  Responsibilities resp = model.responsibilities(params);
  const double n = static_cast<double>(model.data().n());
  for (int t = 1; t <= steps; ++t) {
    IterationRecord rec;
    rec.t = t;
    rec.nll = model.nll(params);
    LaplaceParams next;
    try {
      next = laplace_m_step(model, resp);
    } catch (const NumericalError& err) {
      out.trace.records.push_back(std::move(rec));
      out.trace.failure = err.what();
      out.final_params = params;
      return out;
    } catch (const ZeroWeightComponentError& err) {
      out.trace.records.push_back(std::move(rec));
      out.trace.failure = err.what();
      out.final_params = params;
      return out;
    }
    const Responsibilities next_resp = model.responsibilities(next);
    // Average KL between consecutive responsibility rows: the Bregman step
    // length of the E-step mirror descent on the responsibility simplex.
    double kl = 0.0;
    for (Eigen::Index i = 0; i < resp.rows(); ++i) {
      for (Eigen::Index j = 0; j < resp.cols(); ++j) {
        if (resp(i, j) > 0.0) kl += resp(i, j) * std::log(resp(i, j) / next_resp(i, j));
      }
    }
    rec.kl_step = kl / n;
    out.trace.records.push_back(std::move(rec));
    params = next;
    resp = next_resp;
  }
  IterationRecord last;
  last.t = steps + 1;
  last.nll = model.nll(params);
  out.trace.records.push_back(std::move(last));
  out.final_params = params;
  return out;
}

std::string report_to_json(const GemSweepReport& report) {
  nlohmann::json out;
  out["seeds"] = report.seeds;
  out["mean_min_stationarity"] = report.mean_min_stationarity;
  out["mean_bound"] = report.mean_bound;
  out["se_delta"] = report.se_delta;
  out["passed"] = report.passed;
  return out.dump();
}

std::string report_to_json(const GemAdditiveReport& report) {
  nlohmann::json out;
  out["min_stationarity"] = report.min_stationarity;
  out["gap_bound"] = report.gap_bound;
  out["epsilon_mean"] = report.epsilon_mean;
  out["passed"] = report.passed;
  return out.dump();
}

}  // namespace mirror_em
