#pragma once

#include <vector>

#include "mirror_em/expfam.hpp"

namespace mirror_em {

// Scalar Bernoulli: S(x) = x, A(t) = log(1 + e^t), mean domain (0, 1).
FamilyPtr make_bernoulli();

// Categorical over k outcomes in minimal form: k - 1 logits against the last
// outcome, A(t) = log(1 + sum_j e^{t_j}), mean domain the open simplex slice
// {m : m_j > 0, sum m_j < 1}.
FamilyPtr make_categorical(Eigen::Index k);

// Univariate Gaussian with unknown mean and variance.
// S(x) = (x, x^2), natural = (mean/var, -1/(2 var)), domain second < 0,
// A = -n1^2/(4 n2) - log(-2 n2)/2, mean domain {(m1, m2) : m2 - m1^2 > 0}.
FamilyPtr make_gaussian();

// Univariate Gaussian with known variance: S(x) = x, natural = mean/var,
// A(t) = var * t^2 / 2. Both domains are all of R; single-sample statistics
// are interior, which the online solver relies on.
FamilyPtr make_fixed_variance_gaussian(double variance);

// Full-covariance Gaussian on R^p. Natural coordinates are (eta, packed Q)
// with eta = precision * mean and Q = -precision / 2 stored as the packed
// upper triangle; the matching sufficient statistic doubles off-diagonal
// second moments so that <packed Q, S2(x)> = x' Q x. Domain: precision SPD.
FamilyPtr make_multivariate_gaussian(Eigen::Index p);

// Product of independent blocks; A adds, everything else is block diagonal.
FamilyPtr make_product(std::vector<FamilyPtr> blocks);

// Complete-data family of a k-component mixture with conditionally
// independent component blocks drawn from `component`. Layout:
//   [ w_1 .. w_{k-1} | block_1 | ... | block_k ]
// where w are the minimal label coordinates. The label block couples to the
// component blocks through the joint normalizer
//   A(w, b) = log sum_j exp(w_j [j<k] + A_c(b_j)),
// which is what makes mixture weights w_j = log(pi_j/pi_k) - A_c(b_j) + A_c(b_k)
// rather than plain logits. k = 1 degenerates to the component family itself.
class MixtureCompleteFamily;
std::shared_ptr<const MixtureCompleteFamily> make_mixture_complete(Eigen::Index k,
                                                                   FamilyPtr component);

// Structured access to mixture-complete coordinates, used by the models and
// the generalized EM block updates.
class MixtureCompleteFamily : public Family {
 public:
  MixtureCompleteFamily(Eigen::Index k, FamilyPtr component);

  std::string name() const override;
  Eigen::Index dim() const override;
  bool in_natural_domain(const Vec& natural) const override;
  bool in_mean_domain(const Vec& mean) const override;
  double log_partition(const Vec& natural) const override;
  Vec mean_map(const Vec& natural) const override;
  Vec inverse_mean_map(const Vec& mean) const override;
  Mat fisher_information(const Vec& natural) const override;

  Eigen::Index components() const { return k_; }
  const FamilyPtr& component_family() const { return component_; }
  Eigen::Index label_dim() const { return k_ - 1; }
  Eigen::Index block_dim() const { return component_->dim(); }
  Eigen::Index block_offset(Eigen::Index j) const { return label_dim() + j * block_dim(); }

  // Mixture weights implied by a natural point (length k, strictly positive).
  Vec weights_from_natural(const Vec& natural) const;
  // Natural block of component j.
  Vec component_block(const Vec& natural, Eigen::Index j) const;
  // Assemble a natural point from weights and per-component natural blocks.
  Vec natural_from_parts(const Vec& weights, const std::vector<Vec>& blocks) const;
  // Split a mean point into weights and per-component mean blocks
  // (block j divided by its weight, i.e. the conditional component mean).
  void mean_parts(const Vec& mean, Vec& weights, std::vector<Vec>& blocks) const;

 private:
  // Per-outcome exponents l_j = w_j [j<k] + A_c(b_j); A = logsumexp(l).
  Vec outcome_exponents(const Vec& natural) const;

  Eigen::Index k_;
  FamilyPtr component_;
};

}  // namespace mirror_em
