#include "mirror_em/solver.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <sstream>

#include "nlohmann/json.hpp"

namespace mirror_em {

EmTrace run_em(const LatentModel& model, const NaturalParams& init, int max_steps,
               const EmOptions& options) {
  EmTrace trace;
  trace.algorithm = "em";
  NaturalParams params = init;
  for (int t = 1; t <= max_steps; ++t) {
    IterationRecord rec;
    rec.t = t;
    rec.nll = model.nll(params);
    const double stat = bregman_stationarity(model, params);
    rec.bregman_stat = stat;
    if (options.record_decrement) rec.natural_decrement = natural_decrement(model, params);
    if (options.record_missing_info) {
      rec.lambda_max_missing = missing_information(model, params).lambda_max;
    }
    if (options.record_params) rec.params = params.values();
    if (stat < options.stationarity_stop) {
      rec.kl_step.reset();
      trace.records.push_back(std::move(rec));
      break;
    }
    NaturalParams next = params;
    try {
      next = m_step(model, model.expected_stats(params));
    } catch (const DomainError& err) {
      trace.records.push_back(std::move(rec));
      trace.failure = err.what();
      break;
    } catch (const ZeroWeightComponentError& err) {
      trace.records.push_back(std::move(rec));
      trace.failure = err.what();
      break;
    }
    rec.kl_step = bregman_divergence(params, next);
    trace.records.push_back(std::move(rec));
    params = next;
    if (t == max_steps) {
      IterationRecord last;
      last.t = t + 1;
      last.nll = model.nll(params);
      last.bregman_stat = bregman_stationarity(model, params);
      if (options.record_params) last.params = params.values();
      trace.records.push_back(std::move(last));
    }
  }
  trace.final_params = params.values();
  return trace;
}

NaturalParams mirror_step(const LatentModel& model, const NaturalParams& params) {
  const Vec mean = params.family().mean_map(params.values());
  const Vec gradient = model.nll_gradient(params);
  const MeanParams moved(params.family_ptr(), mean - gradient);
  return inverse_mean_map(moved);
}

double bregman_stationarity(const LatentModel& model, const NaturalParams& params) {
  const MeanParams stats = model.expected_stats(params);
  if (!params.family().in_mean_domain(stats.values())) {
    return std::numeric_limits<double>::infinity();
  }
  const MeanParams mean = mean_map(params);
  // The certificate is a KL divergence; near fixed points the difference of
  // conjugate values can round to a tiny negative number, which would trip
  // the early-stop comparison, so clamp at zero.
  return std::max(
      0.0, dual_bregman_divergence(MeanParams(stats.family_ptr(), stats.values()), mean));
}

double natural_decrement(const LatentModel& model, const NaturalParams& params) {
  const Vec gradient = model.nll_gradient(params);
  const Mat fisher = params.family().fisher_information(params.values());
  Eigen::LLT<Mat> llt(fisher);
  if (llt.info() != Eigen::Success) {
    throw SolveError(params.family().name() +
                     ": complete-data Fisher information is not positive definite "
                     "at this point, cannot form the natural decrement");
  }
  return gradient.dot(llt.solve(gradient));
}

namespace {

// Central finite differences of the analytic NLL gradient, column by column,
// then symmetrized. Probes that would leave the natural domain shrink their
// step (the domain is open, so a small enough step always exists).
Mat fd_nll_hessian(const LatentModel& model, const NaturalParams& params, double& asymmetry) {
  const Vec base = params.values();
  const Eigen::Index d = base.size();
  const FamilyPtr family = params.family_ptr();
  Mat hessian(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    double h = 1e-5 * (1.0 + std::abs(base[i]));
    Vec plus, minus;
    for (int attempt = 0;; ++attempt) {
      Vec up = base, down = base;
      up[i] += h;
      down[i] -= h;
      if (family->in_natural_domain(up) && family->in_natural_domain(down)) {
        plus = model.nll_gradient(NaturalParams(family, up));
        minus = model.nll_gradient(NaturalParams(family, down));
        break;
      }
      h *= 0.5;
      if (attempt > 60) {
        throw NumericalError(family->name() +
                             ": cannot place finite-difference probes inside the domain");
      }
    }
    hessian.col(i) = (plus - minus) / (2.0 * h);
  }
  asymmetry = (hessian - hessian.transpose()).cwiseAbs().maxCoeff();
  return 0.5 * (hessian + hessian.transpose());
}

}  // namespace

MissingInformation missing_information(const LatentModel& model, const NaturalParams& params) {
  MissingInformation out;
  out.complete_fisher = params.family().fisher_information(params.values());
  double asymmetry = 0.0;
  out.nll_hessian = fd_nll_hessian(model, params, asymmetry);
  out.conditioning_warning = asymmetry > 1e-4;
  out.latent_fisher = out.complete_fisher - out.nll_hessian;

  // Similarity transform with the Cholesky factor of the complete Fisher
  // turns the missing-information operator into a symmetric matrix with the
  // same spectrum.
  Eigen::LLT<Mat> llt(out.complete_fisher);
  if (llt.info() != Eigen::Success) {
    throw SolveError(params.family().name() +
                     ": complete-data Fisher information is not positive definite");
  }
  const Mat lower = llt.matrixL();
  const Mat half = lower.triangularView<Eigen::Lower>().solve(out.latent_fisher);
  const Mat symmetric =
      lower.triangularView<Eigen::Lower>().solve(Mat(half.transpose())).transpose();
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (symmetric + symmetric.transpose()));
  if (eig.info() != Eigen::Success) {
    throw SolveError("missing information eigensolve failed");
  }
  out.lambda_max = eig.eigenvalues().maxCoeff();
  out.lambda_min = eig.eigenvalues().minCoeff();
  return out;
}

RateBoundReport check_rate_bounds(const EmTrace& trace) {
  RateBoundReport report;
  const int steps = trace.steps();
  if (steps < 1) {
    report.detail = "trace has no completed steps";
    return report;
  }
  double max_violation = -std::numeric_limits<double>::infinity();
  double min_kl = std::numeric_limits<double>::infinity();
  double max_mismatch = 0.0;
  int worst_t = -1;
  for (std::size_t i = 0; i + 1 < trace.records.size(); ++i) {
    const IterationRecord& rec = trace.records[i];
    if (!rec.kl_step) continue;
    const double next_nll = trace.records[i + 1].nll;
    const double violation = *rec.kl_step - (rec.nll - next_nll);
    if (violation > max_violation) {
      max_violation = violation;
      worst_t = rec.t;
    }
    min_kl = std::min(min_kl, *rec.kl_step);
    if (rec.bregman_stat && std::isfinite(*rec.bregman_stat)) {
      max_mismatch = std::max(max_mismatch, std::abs(*rec.kl_step - *rec.bregman_stat));
    }
  }
  report.max_step_violation = max_violation;
  report.min_kl_step = min_kl;
  report.averaged_gap_bound =
      (trace.initial_nll() - trace.final_nll()) / static_cast<double>(steps);
  report.max_stationarity_mismatch = max_mismatch;

  const bool per_step = max_violation <= Tolerances::rate_slack;
  const bool averaged = min_kl <= report.averaged_gap_bound + Tolerances::rate_slack;
  const bool stationarity = max_mismatch <= Tolerances::step_kl_match;
  report.passed = per_step && averaged && stationarity;
  std::ostringstream detail;
  detail << "per_step=" << (per_step ? "ok" : "violated")
         << " averaged=" << (averaged ? "ok" : "violated")
         << " stationarity_match=" << (stationarity ? "ok" : "violated");
  if (!per_step) detail << " worst_step_t=" << worst_t;
  report.detail = detail.str();
  return report;
}

LinearRateReport check_local_linear_rate(const EmTrace& trace, double reference_nll,
                                         int min_tail) {
  LinearRateReport report;
  // Tail = closing records that carry a missing-information spectrum.
  std::vector<std::size_t> tail;
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    if (trace.records[i].lambda_max_missing) tail.push_back(i);
  }
  if (static_cast<int>(tail.size()) < min_tail) {
    throw InsufficientTailError("local linear rate needs at least " +
                                std::to_string(min_tail) + " tail iterations with a " +
                                "recorded spectrum, have " + std::to_string(tail.size()));
  }
  double rate = 0.0;
  for (std::size_t i : tail) rate = std::max(rate, *trace.records[i].lambda_max_missing);
  report.lambda_max_tail = rate;
  report.tail_steps = static_cast<int>(tail.size());

  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i : tail) {
    if (i + 1 >= trace.records.size()) continue;
    const double gap = trace.records[i].nll - reference_nll;
    const double next_gap = trace.records[i + 1].nll - reference_nll;
    worst = std::max(worst, next_gap - (rate + Tolerances::spectrum_overshoot) * gap);
    if (gap > 1e-8 && next_gap > 0.0) report.contraction_ratios.push_back(next_gap / gap);
  }
  report.worst_violation = worst;
  report.passed = worst <= Tolerances::rate_slack;
  report.detail = report.passed ? "contraction holds over the tail"
                                : "contraction violated on the tail";
  return report;
}

std::string report_to_json(const RateBoundReport& report) {
  nlohmann::json out;
  out["passed"] = report.passed;
  out["max_step_violation"] = report.max_step_violation;
  out["min_kl_step"] = report.min_kl_step;
  out["averaged_gap_bound"] = report.averaged_gap_bound;
  out["max_stationarity_mismatch"] = report.max_stationarity_mismatch;
  out["detail"] = report.detail;
  return out.dump();
}

std::string report_to_json(const LinearRateReport& report) {
  nlohmann::json out;
  out["passed"] = report.passed;
  out["lambda_max_tail"] = report.lambda_max_tail;
  out["worst_violation"] = report.worst_violation;
  out["tail_steps"] = report.tail_steps;
  out["contraction_ratios"] = report.contraction_ratios;
  out["detail"] = report.detail;
  return out.dump();
}

}  // namespace mirror_em
