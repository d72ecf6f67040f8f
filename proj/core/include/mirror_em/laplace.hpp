#pragma once

#include <memory>

#include "mirror_em/models.hpp"

namespace mirror_em {

// Parameters of a k-component Laplace mixture on scalar data. Not an
// exponential family: the M-step is a weighted median and a weighted mean
// absolute deviation instead of a moment match.
struct LaplaceParams {
  Vec weights;    // strictly positive, sums to one
  Vec locations;  // component medians
  Vec scales;     // strictly positive

  Eigen::Index components() const { return weights.size(); }
};

class LaplaceMixtureModel final : public LatentModel {
 public:
  LaplaceMixtureModel(Dataset data, Eigen::Index k);

  std::string kind() const override { return "laplace_mixture"; }
  Eigen::Index components() const override { return k_; }
  const Dataset& data() const override { return data_; }

  // The complete-data likelihood is not an exponential family in these
  // parameters, so the moment-matching surface is unavailable.
  FamilyPtr complete_family() const override;
  Responsibilities responsibilities(const NaturalParams&) const override;
  MeanParams expected_stats(const NaturalParams&) const override;
  Vec expected_stats_for_sample(const NaturalParams&, Eigen::Index) const override;
  double nll(const NaturalParams&) const override;
  Vec nll_gradient(const NaturalParams&) const override;

  Responsibilities responsibilities(const LaplaceParams& params) const;
  double nll(const LaplaceParams& params) const;

 private:
  Dataset data_;
  Eigen::Index k_;
};

std::shared_ptr<const LaplaceMixtureModel> make_laplace_mixture(Dataset data, Eigen::Index k);

LaplaceParams validate_laplace_params(const LaplaceMixtureModel& model,
                                      const LaplaceParams& params);

// Exact maximizer of the responsibility-weighted complete-data likelihood:
// per component, location = weighted median (lower median on ties) and
// scale = responsibility-weighted mean absolute deviation from it. Throws
// NumericalError if a scale collapses to zero and ZeroWeightComponentError on
// vanished responsibility mass.
LaplaceParams laplace_m_step(const LaplaceMixtureModel& model, const Responsibilities& resp);

// Seeded initialization: k distinct data rows as locations, global mean
// absolute deviation as every scale, uniform weights.
LaplaceParams initialize_laplace(const LaplaceMixtureModel& model, Rng& rng);

}  // namespace mirror_em
