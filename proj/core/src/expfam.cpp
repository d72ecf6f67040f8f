#include "mirror_em/expfam.hpp"

#include <cmath>
#include <utility>

namespace mirror_em {

namespace {

void require_size(const Family& family, const Vec& values, const char* which) {
  if (values.size() != family.dim()) {
    throw DomainError(family.name() + ": " + which + " point has size " +
                      std::to_string(values.size()) + ", family dimension is " +
                      std::to_string(family.dim()));
  }
  if (!values.allFinite()) {
    throw DomainError(family.name() + ": " + which + " point has non-finite entries");
  }
}

bool same_family(const Family& a, const Family& b) {
  // Pointer identity is the common case; structurally identical families
  // created twice (same name, same dimension) are accepted as well.
  return &a == &b || (a.dim() == b.dim() && a.name() == b.name());
}

}  // namespace

NaturalParams::NaturalParams(FamilyPtr family, Vec values)
    : family_(std::move(family)), values_(std::move(values)) {
  require_size(*family_, values_, "natural");
  if (!family_->in_natural_domain(values_)) {
    throw DomainError(family_->name() + ": natural point outside the open natural domain");
  }
}

MeanParams::MeanParams(FamilyPtr family, Vec values)
    : family_(std::move(family)), values_(std::move(values)) {
  require_size(*family_, values_, "mean");
  if (!family_->in_mean_domain(values_)) {
    throw DomainError(family_->name() + ": mean point outside the open mean domain");
  }
}

MeanParams MeanParams::unchecked(FamilyPtr family, Vec values) {
  require_size(*family, values, "mean");
  MeanParams out;
  out.family_ = std::move(family);
  out.values_ = std::move(values);
  return out;
}

double log_partition(const NaturalParams& natural) {
  return natural.family().log_partition(natural.values());
}

MeanParams mean_map(const NaturalParams& natural) {
  return MeanParams(natural.family_ptr(), natural.family().mean_map(natural.values()));
}

NaturalParams inverse_mean_map(const MeanParams& mean) {
  if (!mean.family().in_mean_domain(mean.values())) {
    throw DomainError(mean.family().name() +
                      ": mean point outside the open mean domain, no natural preimage");
  }
  return NaturalParams(mean.family_ptr(), mean.family().inverse_mean_map(mean.values()));
}

Mat fisher_information(const NaturalParams& natural) {
  return natural.family().fisher_information(natural.values());
}

double conjugate_value(const MeanParams& mean) {
  const NaturalParams natural = inverse_mean_map(mean);
  return natural.values().dot(mean.values()) - log_partition(natural);
}

double bregman_divergence(const NaturalParams& first, const NaturalParams& second) {
  if (!same_family(first.family(), second.family())) {
    throw DomainError("bregman_divergence: arguments belong to different families");
  }
  const Vec grad = second.family().mean_map(second.values());
  return first.family().log_partition(first.values()) -
         second.family().log_partition(second.values()) -
         grad.dot(first.values() - second.values());
}

double dual_bregman_divergence(const MeanParams& first, const MeanParams& second) {
  if (!same_family(first.family(), second.family())) {
    throw DomainError("dual_bregman_divergence: arguments belong to different families");
  }
  // grad A*(m) is the natural preimage of m, by the inverse function theorem.
  const NaturalParams second_natural = inverse_mean_map(second);
  return conjugate_value(first) - conjugate_value(second) -
         second_natural.values().dot(first.values() - second.values());
}

}  // namespace mirror_em
