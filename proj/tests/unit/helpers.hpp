#pragma once

#include <cmath>
#include <initializer_list>
#include <vector>

#include "mirror_em/dataset.hpp"
#include "mirror_em/models.hpp"

namespace mirror_em::testing {

constexpr double kLogTwoPi = 1.8378770664093453;

inline Dataset column_data(std::initializer_list<double> values) {
  Mat rows(static_cast<Eigen::Index>(values.size()), 1);
  Eigen::Index i = 0;
  for (double v : values) rows(i++, 0) = v;
  return make_dataset(rows, {"x"});
}

// Natural parameters of a univariate GMM from its classic parameterization.
inline NaturalParams gmm_natural(const ExpFamilyMixtureModel& model, const Vec& weights,
                                 const Vec& means, const Vec& variances) {
  std::vector<Vec> blocks;
  for (Eigen::Index j = 0; j < weights.size(); ++j) {
    Vec block(2);
    block << means[j] / variances[j], -0.5 / variances[j];
    blocks.push_back(block);
  }
  return NaturalParams(model.complete_family(),
                       model.mixture().natural_from_parts(weights, blocks));
}

inline double normal_density(double x, double mean, double variance) {
  const double c = x - mean;
  return std::exp(-0.5 * c * c / variance) / std::sqrt(2.0 * M_PI * variance);
}

inline Dataset random_column(Eigen::Index n, Rng& rng, double spread = 2.0) {
  Mat rows(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) rows(i, 0) = spread * rng.normal();
  return make_dataset(rows, {"x"});
}

inline NaturalParams random_gmm_params(const ExpFamilyMixtureModel& model, Rng& rng) {
  const Eigen::Index k = model.components();
  Vec weights(k);
  for (Eigen::Index j = 0; j < k; ++j) weights[j] = rng.uniform(0.5, 2.0);
  weights /= weights.sum();
  Vec means(k), variances(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    means[j] = rng.uniform(-2.0, 2.0);
    variances[j] = rng.uniform(0.4, 3.0);
  }
  return gmm_natural(model, weights, means, variances);
}

}  // namespace mirror_em::testing
