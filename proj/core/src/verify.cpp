#include "mirror_em/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>

#include "mirror_em/errors.hpp"
#include "mirror_em/families.hpp"

namespace mirror_em {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxShrinks = 60;

bool has_prefix(const std::string& text, const std::string& prefix) {
  return text.rfind(prefix, 0) == 0;
}

// 15-point Kronrod extension of the 7-point Gauss rule on [-1, 1]. Odd
// indices are the embedded Gauss nodes; the last entry is the center.
constexpr double kKronrodNodes[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
};
constexpr double kKronrodWeights[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
};
constexpr double kGaussWeights[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
};

struct Panel {
  double lo = 0.0;
  double hi = 0.0;
  double value = 0.0;
  double error = 0.0;
};

Panel evaluate_panel(const std::function<double(double)>& f, double lo, double hi) {
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (lo + hi);
  const double center = f(mid);
  double kronrod = kKronrodWeights[7] * center;
  double gauss = kGaussWeights[3] * center;
  for (int i = 0; i < 7; ++i) {
    const double offset = half * kKronrodNodes[i];
    const double pair = f(mid - offset) + f(mid + offset);
    kronrod += kKronrodWeights[i] * pair;
    if (i % 2 == 1) gauss += kGaussWeights[i / 2] * pair;
  }
  Panel panel;
  panel.lo = lo;
  panel.hi = hi;
  panel.value = half * kronrod;
  panel.error = std::abs(half * (kronrod - gauss));
  return panel;
}

// Mean and variance read straight off the natural coordinates, so the
// quadrature route never touches the mean map under test.
void gaussian_moments(const Vec& natural, double* mean, double* variance) {
  *variance = -0.5 / natural[1];
  *mean = natural[0] * *variance;
}

double log_normal_density(double x, double mean, double variance) {
  const double centered = x - mean;
  return -0.5 * std::log(2.0 * M_PI * variance) - centered * centered / (2.0 * variance);
}

double quadrature_kl(double mean_p, double var_p, double mean_q, double var_q,
                     double target) {
  const auto integrand = [&](double x) {
    const double lp = log_normal_density(x, mean_p, var_p);
    const double p = std::exp(lp);
    if (p == 0.0) return 0.0;
    return p * (lp - log_normal_density(x, mean_q, var_q));
  };
  const double spread = 12.0 * std::sqrt(std::max(var_p, var_q));
  const double lo = std::min(mean_p, mean_q) - spread;
  const double hi = std::max(mean_p, mean_q) + spread;
  return adaptive_quadrature(integrand, lo, hi, target);
}

double bernoulli_kl(double theta_p, double theta_q) {
  // log p1 = -softplus(-theta), log p0 = -softplus(theta)
  const auto softplus = [](double t) {
    return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
  };
  const double log_p1 = -softplus(-theta_p);
  const double log_p0 = -softplus(theta_p);
  const double log_q1 = -softplus(-theta_q);
  const double log_q0 = -softplus(theta_q);
  return std::exp(log_p1) * (log_p1 - log_q1) + std::exp(log_p0) * (log_p0 - log_q0);
}

Vec categorical_log_probs(const Vec& natural) {
  Vec logits(natural.size() + 1);
  logits.head(natural.size()) = natural;
  logits[natural.size()] = 0.0;
  return logits.array() - log_sum_exp(logits);
}

}  // namespace

Vec finite_diff_gradient(const std::function<double(const Vec&)>& f, const Vec& point,
                         double h) {
  Vec grad(point.size());
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    double step = h * (1.0 + std::abs(point[i]));
    bool done = false;
    for (int attempt = 0; attempt < kMaxShrinks && !done; ++attempt) {
      Vec plus = point;
      Vec minus = point;
      plus[i] += step;
      minus[i] -= step;
      try {
        grad[i] = (f(plus) - f(minus)) / (2.0 * step);
        done = true;
      } catch (const DomainError&) {
        step *= 0.5;
      }
    }
    if (!done) throw NumericalError("finite difference probe could not stay in the domain");
  }
  return grad;
}

Mat finite_diff_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& point,
                         double h) {
  const Vec at_point = f(point);
  Mat jacobian(at_point.size(), point.size());
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    double step = h * (1.0 + std::abs(point[i]));
    bool done = false;
    for (int attempt = 0; attempt < kMaxShrinks && !done; ++attempt) {
      Vec plus = point;
      Vec minus = point;
      plus[i] += step;
      minus[i] -= step;
      try {
        jacobian.col(i) = (f(plus) - f(minus)) / (2.0 * step);
        done = true;
      } catch (const DomainError&) {
        step *= 0.5;
      }
    }
    if (!done) throw NumericalError("finite difference probe could not stay in the domain");
  }
  return jacobian;
}

Mat finite_diff_hessian(const std::function<double(const Vec&)>& f, const Vec& point,
                        double h) {
  const Eigen::Index n = point.size();
  const double at_point = f(point);
  Mat hessian(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      double hi = h * (1.0 + std::abs(point[i]));
      double hj = h * (1.0 + std::abs(point[j]));
      bool done = false;
      for (int attempt = 0; attempt < kMaxShrinks && !done; ++attempt) {
        try {
          if (i == j) {
            Vec plus = point;
            Vec minus = point;
            plus[i] += hi;
            minus[i] -= hi;
            hessian(i, i) = (f(plus) - 2.0 * at_point + f(minus)) / (hi * hi);
          } else {
            Vec pp = point, pm = point, mp = point, mm = point;
            pp[i] += hi;
            pp[j] += hj;
            pm[i] += hi;
            pm[j] -= hj;
            mp[i] -= hi;
            mp[j] += hj;
            mm[i] -= hi;
            mm[j] -= hj;
            const double cross = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * hi * hj);
            hessian(i, j) = cross;
            hessian(j, i) = cross;
          }
          done = true;
        } catch (const DomainError&) {
          hi *= 0.5;
          hj *= 0.5;
        }
      }
      if (!done) throw NumericalError("finite difference probe could not stay in the domain");
    }
  }
  return hessian;
}

double adaptive_quadrature(const std::function<double(double)>& f, double lo, double hi,
                           double target) {
  if (!(hi > lo)) throw ConfigError("quadrature interval is empty");
  if (!(target > 0.0)) throw ConfigError("quadrature tolerance must be positive");
  std::vector<Panel> panels{evaluate_panel(f, lo, hi)};
  for (int splits = 0; splits < 2000; ++splits) {
    double total_error = 0.0;
    std::size_t worst = 0;
    for (std::size_t i = 0; i < panels.size(); ++i) {
      total_error += panels[i].error;
      if (panels[i].error > panels[worst].error) worst = i;
    }
    if (total_error <= target) {
      double value = 0.0;
      for (const Panel& panel : panels) value += panel.value;
      return value;
    }
    const Panel split = panels[worst];
    const double mid = 0.5 * (split.lo + split.hi);
    panels[worst] = evaluate_panel(f, split.lo, mid);
    panels.push_back(evaluate_panel(f, mid, split.hi));
  }
  throw NumericalError("adaptive quadrature did not reach the requested tolerance");
}

double numeric_kl(const NaturalParams& from, const NaturalParams& to, double target) {
  const std::string name = from.family().name();
  if (to.family().name() != name || to.values().size() != from.values().size()) {
    throw ConfigError("numeric_kl needs two members of the same family");
  }
  const Vec& a = from.values();
  const Vec& b = to.values();

  if (name == "bernoulli") return bernoulli_kl(a[0], b[0]);
  if (has_prefix(name, "categorical(")) {
    const Vec log_p = categorical_log_probs(a);
    const Vec log_q = categorical_log_probs(b);
    double kl = 0.0;
    for (Eigen::Index i = 0; i < log_p.size(); ++i) {
      kl += std::exp(log_p[i]) * (log_p[i] - log_q[i]);
    }
    return kl;
  }
  if (name == "gaussian") {
    double mean_p, var_p, mean_q, var_q;
    gaussian_moments(a, &mean_p, &var_p);
    gaussian_moments(b, &mean_q, &var_q);
    return quadrature_kl(mean_p, var_p, mean_q, var_q, target);
  }
  if (has_prefix(name, "gaussian_fixed_var(")) {
    // A(theta) = v theta^2 / 2, so one symmetric probe recovers the variance
    // exactly: A(1) + A(-1) = v.
    Vec plus(1), minus(1);
    plus[0] = 1.0;
    minus[0] = -1.0;
    const double variance =
        from.family().log_partition(plus) + from.family().log_partition(minus);
    return quadrature_kl(variance * a[0], variance, variance * b[0], variance, target);
  }
  throw UnsupportedError("numeric_kl has no density route for family " + name);
}

Vec enumerate_posterior_stats(const ExpFamilyMixtureModel& model,
                              const NaturalParams& params) {
  const MixtureCompleteFamily& mixture = model.mixture();
  const Eigen::Index n = model.data().n();
  const Eigen::Index k = mixture.components();
  if (n > 8 || k > 3) {
    throw TooLargeError("posterior enumeration is capped at n <= 8, k <= 3");
  }
  const Family& component = *mixture.component_family();
  const Mat& stats = model.sample_stats();

  // score(i, j) = log pi_j + <t_i, phi_j> - A_c(phi_j); the base measure is
  // constant in the assignment and cancels in the posterior.
  Vec log_weights = mixture.weights_from_natural(params.values()).array().log();
  Mat score(n, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const Vec block = mixture.component_block(params.values(), j);
    const double log_part = component.log_partition(block);
    score.col(j) = (stats * block).array() + log_weights[j] - log_part;
  }

  const auto assignment_stats = [&](const std::vector<int>& z) {
    Vec s = Vec::Zero(mixture.dim());
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index j = z[static_cast<std::size_t>(i)];
      if (j < k - 1) s[j] += 1.0;
      s.segment(mixture.block_offset(j), mixture.block_dim()) += stats.row(i);
    }
    return Vec(s / static_cast<double>(n));
  };
  const auto for_each_assignment = [&](const std::function<void(const std::vector<int>&)>& body) {
    std::vector<int> z(static_cast<std::size_t>(n), 0);
    while (true) {
      body(z);
      std::size_t pos = 0;
      while (pos < z.size() && ++z[pos] == k) z[pos++] = 0;
      if (pos == z.size()) break;
    }
  };

  std::vector<double> log_joint;
  for_each_assignment([&](const std::vector<int>& z) {
    double value = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) value += score(i, z[static_cast<std::size_t>(i)]);
    log_joint.push_back(value);
  });
  const double normalizer =
      log_sum_exp(Eigen::Map<const Vec>(log_joint.data(), static_cast<Eigen::Index>(log_joint.size())));

  Vec expected = Vec::Zero(mixture.dim());
  std::size_t index = 0;
  for_each_assignment([&](const std::vector<int>& z) {
    expected += std::exp(log_joint[index++] - normalizer) * assignment_stats(z);
  });
  return expected;
}

SmdReport smd_equivalence(const LatentModel& model, const NaturalParams& init,
                          int updates, const OnlineSchedule& schedule,
                          std::uint64_t seed) {
  OnlineOptions options;
  options.record_mean_iterates = true;
  SmdReport report;
  report.online = run_online_em(model, init, updates, schedule, seed, options);

  // Replay the identical sample path through the mirror descent recursion
  // grad A(theta') = grad A(theta) - gamma (grad A(theta) - s_i(theta)).
  NaturalParams theta = init;
  for (std::size_t u = 0; u < report.online.sample_indices.size(); ++u) {
    const double gamma = report.online.step_sizes[u];
    const Vec drawn =
        model.expected_stats_for_sample(theta, report.online.sample_indices[u]);
    const Vec dual = mean_map(theta).values();
    theta = inverse_mean_map(
        MeanParams(model.complete_family(), dual - gamma * (dual - drawn)));
    report.smd_params.push_back(theta.values());

    const NaturalParams online_theta = inverse_mean_map(
        MeanParams(model.complete_family(), report.online.mean_iterates[u]));
    const double deviation =
        (online_theta.values() - theta.values()).cwiseAbs().maxCoeff();
    report.max_deviation = std::max(report.max_deviation, deviation);
  }
  return report;
}

ReparamReport reparam_invariance(const LatentModel& model, const NaturalParams& init,
                                 int em_steps, double gd_step, int gd_check_step) {
  if (em_steps < 1) throw ConfigError("reparam check needs at least one EM step");
  ReparamReport report;
  report.gd_check_step = gd_check_step;

  // EM once over theta and once over mu; the paired iterates should be the
  // same distribution up to roundoff.
  NaturalParams theta = init;
  MeanParams mu = mean_map(init);
  for (int t = 0; t <= em_steps; ++t) {
    const NaturalParams mean_equivalent = inverse_mean_map(mu);
    report.em_max_kl =
        std::max(report.em_max_kl, complete_data_kl(model, theta, mean_equivalent));

    // The decrement computed over theta and the decrement computed over mu
    // (chain-rule gradient, inverse metric) are the same scalar.
    const double in_natural_coords = natural_decrement(model, theta);
    const Vec grad = nll_gradient(model, theta);
    const Mat fisher = fisher_information(theta);
    const Vec mean_grad = Eigen::LLT<Mat>(fisher).solve(grad);
    const double in_mean_coords = mean_grad.dot(fisher * mean_grad);
    if (in_natural_coords > 0.0) {
      report.decrement_max_rel_diff =
          std::max(report.decrement_max_rel_diff,
                   std::abs(in_natural_coords - in_mean_coords) / in_natural_coords);
    }

    if (t == em_steps) break;
    theta = m_step(model, expected_stats(model, theta));
    mu = MeanParams(model.complete_family(),
                    expected_stats(model, inverse_mean_map(mu)).values());
  }

  // The same pairing for gradient descent drifts apart, because the GD map
  // depends on which coordinates the step is taken in.
  GdOptions natural_options;
  natural_options.step = gd_step;
  natural_options.record_params = true;
  GdOptions mean_options = natural_options;
  mean_options.coordinates = GdOptions::Coordinates::kMean;
  const GdTrace in_natural = run_gd(model, init, gd_check_step, natural_options);
  const GdTrace in_mean = run_gd(model, init, gd_check_step, mean_options);

  const std::size_t common =
      std::min(in_natural.base.records.size(), in_mean.base.records.size());
  for (std::size_t t = 0; t < common; ++t) {
    const auto& nat_rec = in_natural.base.records[t];
    const auto& mean_rec = in_mean.base.records[t];
    if (!nat_rec.params || !mean_rec.params) continue;
    const NaturalParams a(model.complete_family(), *nat_rec.params);
    const NaturalParams b(model.complete_family(), *mean_rec.params);
    report.gd_kl = std::max(report.gd_kl, complete_data_kl(model, a, b));
  }
  if (in_mean.diverged || in_natural.diverged) {
    report.gd_mean_diverged = true;
    report.gd_kl = kInf;
  }
  return report;
}

}  // namespace mirror_em
