#pragma once

#include <memory>
#include <string>

#include "mirror_em/errors.hpp"
#include "mirror_em/util.hpp"

namespace mirror_em {

// A minimal exponential family with closed-form dual structure. Implementors
// provide the log partition A, its gradient (natural -> mean coordinates),
// the inverse gradient (mean -> natural), and the Hessian of A, which equals
// both the Fisher information and the covariance of the sufficient statistic.
//
// All member functions may assume their argument passed the matching domain
// predicate; the checked free functions below are the public entry points.
class Family {
 public:
  virtual ~Family() = default;

  virtual std::string name() const = 0;
  virtual Eigen::Index dim() const = 0;

  // Open-set membership, exact predicates only. No tolerance bands: a point
  // is in the domain iff every required inequality holds strictly in floating
  // point (positivity of Cholesky pivots for matrix blocks).
  virtual bool in_natural_domain(const Vec& natural) const = 0;
  virtual bool in_mean_domain(const Vec& mean) const = 0;

  virtual double log_partition(const Vec& natural) const = 0;
  virtual Vec mean_map(const Vec& natural) const = 0;
  virtual Vec inverse_mean_map(const Vec& mean) const = 0;
  virtual Mat fisher_information(const Vec& natural) const = 0;
};

using FamilyPtr = std::shared_ptr<const Family>;

// Natural-coordinate point of a specific family, validated at construction.
class NaturalParams {
 public:
  NaturalParams(FamilyPtr family, Vec values);

  const Family& family() const { return *family_; }
  const FamilyPtr& family_ptr() const { return family_; }
  const Vec& values() const { return values_; }

 private:
  FamilyPtr family_;
  Vec values_;
};

// Mean-coordinate point (expected sufficient statistics), validated at
// construction. `unchecked` skips the predicate for points that are allowed
// to sit on the boundary (single-sample statistics in online EM).
class MeanParams {
 public:
  MeanParams(FamilyPtr family, Vec values);
  static MeanParams unchecked(FamilyPtr family, Vec values);

  const Family& family() const { return *family_; }
  const FamilyPtr& family_ptr() const { return family_; }
  const Vec& values() const { return values_; }

 private:
  MeanParams() = default;
  FamilyPtr family_;
  Vec values_;
};

double log_partition(const NaturalParams& natural);
MeanParams mean_map(const NaturalParams& natural);
NaturalParams inverse_mean_map(const MeanParams& mean);
Mat fisher_information(const NaturalParams& natural);

// Convex conjugate A*(mean), evaluated through the Fenchel equality
// A*(m) = <inverse_mean_map(m), m> - A(inverse_mean_map(m)).
double conjugate_value(const MeanParams& mean);

// D_A(first, second) = A(first) - A(second) - <mean_map(second), first - second>.
// Equals the KL divergence from the distribution at `second` to the one at
// `first` (note the argument swap: D_A(phi, theta) = KL(theta || phi)).
double bregman_divergence(const NaturalParams& first, const NaturalParams& second);

// D_{A*}(first, second) in mean coordinates, via the Fenchel form of A*.
// Infinite when `first` sits outside the closed mean domain's interior in a
// direction where A* blows up; callers that tolerate +inf pass boundary
// points through MeanParams::unchecked.
double dual_bregman_divergence(const MeanParams& first, const MeanParams& second);

}  // namespace mirror_em
