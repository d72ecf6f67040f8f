#include "mirror_em/laplace.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mirror_em {

namespace {

[[noreturn]] void not_exponential(const char* op) {
  throw UnsupportedError(std::string("laplace_mixture: ") + op +
                         " requires a complete-data exponential family; the Laplace "
                         "mixture only supports the E-step analysis surface");
}

}  // namespace

LaplaceMixtureModel::LaplaceMixtureModel(Dataset data, Eigen::Index k)
    : data_(std::move(data)), k_(k) {
  if (data_.dim() != 1) throw ConfigError("laplace_mixture expects one data column");
  if (k_ < 1) throw ConfigError("laplace_mixture: needs at least one component");
}

FamilyPtr LaplaceMixtureModel::complete_family() const { not_exponential("complete_family"); }
Responsibilities LaplaceMixtureModel::responsibilities(const NaturalParams&) const {
  not_exponential("responsibilities(NaturalParams)");
}
MeanParams LaplaceMixtureModel::expected_stats(const NaturalParams&) const {
  not_exponential("expected_stats");
}
Vec LaplaceMixtureModel::expected_stats_for_sample(const NaturalParams&, Eigen::Index) const {
  not_exponential("expected_stats_for_sample");
}
double LaplaceMixtureModel::nll(const NaturalParams&) const { not_exponential("nll"); }
Vec LaplaceMixtureModel::nll_gradient(const NaturalParams&) const {
  not_exponential("nll_gradient");
}

Responsibilities LaplaceMixtureModel::responsibilities(const LaplaceParams& params) const {
  validate_laplace_params(*this, params);
  const Eigen::Index n = data_.n();
  Mat scores(n, k_);
  for (Eigen::Index j = 0; j < k_; ++j) {
    const double log_norm = std::log(params.weights[j]) - std::log(2.0 * params.scales[j]);
    scores.col(j) =
        log_norm -
        (data_.rows.col(0).array() - params.locations[j]).abs() / params.scales[j];
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double total = log_sum_exp(scores.row(i).transpose());
    scores.row(i) = (scores.row(i).array() - total).exp();
    scores.row(i) /= scores.row(i).sum();
  }
  return scores;
}

double LaplaceMixtureModel::nll(const LaplaceParams& params) const {
  validate_laplace_params(*this, params);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < data_.n(); ++i) {
    Vec scores(k_);
    for (Eigen::Index j = 0; j < k_; ++j) {
      scores[j] = std::log(params.weights[j]) - std::log(2.0 * params.scales[j]) -
                  std::abs(data_.rows(i, 0) - params.locations[j]) / params.scales[j];
    }
    acc += log_sum_exp(scores);
  }
  return -acc / static_cast<double>(data_.n());
}

std::shared_ptr<const LaplaceMixtureModel> make_laplace_mixture(Dataset data, Eigen::Index k) {
  return std::make_shared<LaplaceMixtureModel>(std::move(data), k);
}

LaplaceParams validate_laplace_params(const LaplaceMixtureModel& model,
                                      const LaplaceParams& params) {
  const Eigen::Index k = model.components();
  if (params.weights.size() != k || params.locations.size() != k ||
      params.scales.size() != k) {
    throw ConfigError("laplace_mixture: parameter blocks must all have length k");
  }
  if (!params.weights.allFinite() || (params.weights.array() <= 0.0).any() ||
      std::abs(params.weights.sum() - 1.0) > 1e-8) {
    throw DomainError("laplace_mixture: weights must be positive and sum to one");
  }
  if (!params.locations.allFinite()) {
    throw DomainError("laplace_mixture: locations must be finite");
  }
  if (!params.scales.allFinite() || (params.scales.array() <= 0.0).any()) {
    throw DomainError("laplace_mixture: scales must be strictly positive");
  }
  return params;
}

LaplaceParams laplace_m_step(const LaplaceMixtureModel& model, const Responsibilities& resp) {
  const Dataset& data = model.data();
  const Eigen::Index n = data.n();
  const Eigen::Index k = model.components();
  if (resp.rows() != n || resp.cols() != k) {
    throw ConfigError("laplace_mixture: responsibility matrix shape mismatch");
  }

  // Sort once; every weighted median walks the same order.
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return data.rows(a, 0) < data.rows(b, 0);
  });

  LaplaceParams out;
  out.weights.resize(k);
  out.locations.resize(k);
  out.scales.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double mass = resp.col(j).sum();
    if (!(mass > 0.0)) {
      throw ZeroWeightComponentError("laplace_mixture: component " + std::to_string(j) +
                                     " has zero responsibility mass");
    }
    // Lower weighted median: smallest x with cumulative weight >= mass / 2.
    double cum = 0.0;
    double median = data.rows(order.back(), 0);
    for (Eigen::Index pos = 0; pos < n; ++pos) {
      cum += resp(order[pos], j);
      if (cum >= 0.5 * mass) {
        median = data.rows(order[pos], 0);
        break;
      }
    }
    const double spread =
        (resp.col(j).array() * (data.rows.col(0).array() - median).abs()).sum() / mass;
    if (!(spread > 0.0)) {
      throw NumericalError("laplace_mixture: component " + std::to_string(j) +
                           " collapsed to zero scale at its median");
    }
    out.weights[j] = mass / static_cast<double>(n);
    out.locations[j] = median;
    out.scales[j] = spread;
  }
  out.weights /= out.weights.sum();
  return out;
}

LaplaceParams initialize_laplace(const LaplaceMixtureModel& model, Rng& rng) {
  const Dataset& data = model.data();
  const Eigen::Index n = data.n();
  const Eigen::Index k = model.components();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (Eigen::Index j = 0; j < k; ++j) {
    const Eigen::Index pick = j + static_cast<Eigen::Index>(rng.below(n - j));
    std::swap(order[j], order[pick]);
  }
  const double center = data.rows.col(0).mean();
  double spread = (data.rows.col(0).array() - center).abs().mean();
  if (!(spread > 0.0)) spread = 1.0;

  LaplaceParams out;
  out.weights = Vec::Constant(k, 1.0 / static_cast<double>(k));
  out.locations.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) out.locations[j] = data.rows(order[j], 0);
  out.scales = Vec::Constant(k, spread);
  return out;
}

}  // namespace mirror_em
