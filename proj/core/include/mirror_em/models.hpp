#pragma once

#include <memory>
#include <string>

#include "mirror_em/dataset.hpp"
#include "mirror_em/expfam.hpp"
#include "mirror_em/families.hpp"

namespace mirror_em {

// Per-sample posterior over component labels, rows summing to one.
using Responsibilities = Mat;

// A latent-variable model over a fixed dataset whose complete-data likelihood
// is an exponential family in the parameters. The Laplace mixture implements
// only the generic surface that does not require that family and throws
// UnsupportedError from the rest.
class LatentModel {
 public:
  virtual ~LatentModel() = default;

  virtual std::string kind() const = 0;
  virtual Eigen::Index components() const = 0;
  virtual const Dataset& data() const = 0;

  virtual FamilyPtr complete_family() const = 0;
  virtual Responsibilities responsibilities(const NaturalParams& params) const = 0;
  // Per-sample average of the expected complete-data sufficient statistics.
  // The result can sit on the boundary of the mean domain, hence unchecked.
  virtual MeanParams expected_stats(const NaturalParams& params) const = 0;
  // Expected complete-data statistics of a single observation (not averaged),
  // the increment consumed by online EM.
  virtual Vec expected_stats_for_sample(const NaturalParams& params,
                                        Eigen::Index i) const = 0;
  // Average negative marginal log likelihood, base measure included.
  virtual double nll(const NaturalParams& params) const = 0;
  // grad nll = mean_map(params) - expected_stats(params).
  virtual Vec nll_gradient(const NaturalParams& params) const = 0;
};

using ModelPtr = std::shared_ptr<const LatentModel>;

// Mixture with exponential-family components over a shared dataset. Covers
// learned-covariance Gaussian mixtures (any data dimension), fixed-variance
// Gaussian mixtures, Bernoulli mixtures, and the one-component Gaussian.
class ExpFamilyMixtureModel final : public LatentModel {
 public:
  ExpFamilyMixtureModel(std::string kind, Dataset data, Eigen::Index k,
                        FamilyPtr component, Mat sample_stats, Vec log_base);

  std::string kind() const override { return kind_; }
  Eigen::Index components() const override { return k_; }
  const Dataset& data() const override { return data_; }
  FamilyPtr complete_family() const override { return mixture_; }
  Responsibilities responsibilities(const NaturalParams& params) const override;
  MeanParams expected_stats(const NaturalParams& params) const override;
  Vec expected_stats_for_sample(const NaturalParams& params, Eigen::Index i) const override;
  double nll(const NaturalParams& params) const override;
  Vec nll_gradient(const NaturalParams& params) const override;

  const MixtureCompleteFamily& mixture() const { return *mixture_; }
  // Row i holds the component sufficient statistic of observation i.
  const Mat& sample_stats() const { return sample_stats_; }
  const Vec& log_base() const { return log_base_; }
  // Expected statistics assembled from an explicit responsibility matrix.
  Vec stats_from_responsibilities(const Responsibilities& resp) const;

 private:
  // Per-sample, per-component complete-data log density minus log base.
  Mat joint_log_scores(const NaturalParams& params) const;

  std::string kind_;
  Dataset data_;
  Eigen::Index k_;
  std::shared_ptr<const MixtureCompleteFamily> mixture_;
  Mat sample_stats_;
  Vec log_base_;
};

// Factories. Data dimension fixes the component family dimension.
std::shared_ptr<const ExpFamilyMixtureModel> make_gaussian_mixture(Dataset data, Eigen::Index k);
std::shared_ptr<const ExpFamilyMixtureModel> make_fixed_variance_gaussian_mixture(
    Dataset data, Eigen::Index k, double variance);
std::shared_ptr<const ExpFamilyMixtureModel> make_bernoulli_mixture(Dataset data, Eigen::Index k);
std::shared_ptr<const ExpFamilyMixtureModel> make_single_gaussian(Dataset data);

// Checked free-function surface mirroring the member operations.
Responsibilities responsibilities(const LatentModel& model, const NaturalParams& params);
MeanParams expected_stats(const LatentModel& model, const NaturalParams& params);
double nll(const LatentModel& model, const NaturalParams& params);
Vec nll_gradient(const LatentModel& model, const NaturalParams& params);

// Exact M-step: moment matching through the inverse mean map. Throws
// ZeroWeightComponentError if a component's mass underflowed to zero and
// DomainError if the statistics sit on the mean-domain boundary.
NaturalParams m_step(const LatentModel& model, const MeanParams& stats);

// Q_theta(phi) = A(phi) - <expected_stats(theta), phi>; entropy and base
// measure terms are dropped, so only differences of surrogate values at equal
// first argument are meaningful.
double surrogate_value(const LatentModel& model, const NaturalParams& theta,
                       const NaturalParams& phi);
double surrogate_value(const LatentModel& model, const MeanParams& stats,
                       const NaturalParams& phi);

// KL(p(x,z|theta) || p(x,z|phi)) of one complete observation, computed by the
// label/component chain rule rather than through A, so it can cross-check the
// Bregman divergence.
double complete_data_kl(const LatentModel& model, const NaturalParams& theta,
                        const NaturalParams& phi);

// Initialization strategies for the CLI and the experiments.
enum class InitMethod { kRandomRows, kKmeans };
NaturalParams initialize(const LatentModel& model, InitMethod method, Rng& rng);

}  // namespace mirror_em
