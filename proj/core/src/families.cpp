#include "mirror_em/families.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <utility>

namespace mirror_em {

namespace {

double softplus(double t) {
  // log(1 + e^t) without overflow on either side.
  return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t)));
}

double sigmoid(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// ----- Bernoulli -----

class BernoulliFamily final : public Family {
 public:
  std::string name() const override { return "bernoulli"; }
  Eigen::Index dim() const override { return 1; }

  bool in_natural_domain(const Vec& natural) const override {
    return std::isfinite(natural[0]);
  }
  bool in_mean_domain(const Vec& mean) const override {
    return mean[0] > 0.0 && mean[0] < 1.0;
  }
  double log_partition(const Vec& natural) const override { return softplus(natural[0]); }
  Vec mean_map(const Vec& natural) const override {
    Vec out(1);
    out[0] = sigmoid(natural[0]);
    return out;
  }
  Vec inverse_mean_map(const Vec& mean) const override {
    Vec out(1);
    out[0] = std::log(mean[0]) - std::log1p(-mean[0]);
    return out;
  }
  Mat fisher_information(const Vec& natural) const override {
    const double m = sigmoid(natural[0]);
    Mat out(1, 1);
    out(0, 0) = m * (1.0 - m);
    return out;
  }
};

// ----- Categorical, k outcomes, k - 1 logits -----

class CategoricalFamily final : public Family {
 public:
  explicit CategoricalFamily(Eigen::Index k) : k_(k) {
    if (k < 2) throw DomainError("categorical family needs at least 2 outcomes");
  }

  std::string name() const override { return "categorical(" + std::to_string(k_) + ")"; }
  Eigen::Index dim() const override { return k_ - 1; }

  bool in_natural_domain(const Vec& natural) const override { return natural.allFinite(); }
  bool in_mean_domain(const Vec& mean) const override {
    if ((mean.array() <= 0.0).any()) return false;
    return mean.sum() < 1.0;
  }
  double log_partition(const Vec& natural) const override {
    Vec padded(k_);
    padded.head(k_ - 1) = natural;
    padded[k_ - 1] = 0.0;
    return log_sum_exp(padded);
  }
  Vec mean_map(const Vec& natural) const override {
    const double a = log_partition(natural);
    return (natural.array() - a).exp();
  }
  Vec inverse_mean_map(const Vec& mean) const override {
    const double last = 1.0 - mean.sum();
    return (mean.array().log() - std::log(last)).matrix();
  }
  Mat fisher_information(const Vec& natural) const override {
    const Vec probs = mean_map(natural);
    Mat out = -probs * probs.transpose();
    out.diagonal() += probs;
    return out;
  }

 private:
  Eigen::Index k_;
};

// ----- Univariate Gaussian, unknown mean and variance -----

class GaussianFamily final : public Family {
 public:
  std::string name() const override { return "gaussian"; }
  Eigen::Index dim() const override { return 2; }

  bool in_natural_domain(const Vec& natural) const override {
    return natural.allFinite() && natural[1] < 0.0;
  }
  bool in_mean_domain(const Vec& mean) const override {
    return mean.allFinite() && mean[1] - mean[0] * mean[0] > 0.0;
  }
  double log_partition(const Vec& natural) const override {
    return -natural[0] * natural[0] / (4.0 * natural[1]) -
           0.5 * std::log(-2.0 * natural[1]);
  }
  Vec mean_map(const Vec& natural) const override {
    const double m = -natural[0] / (2.0 * natural[1]);
    const double v = -1.0 / (2.0 * natural[1]);
    Vec out(2);
    out[0] = m;
    out[1] = m * m + v;
    return out;
  }
  Vec inverse_mean_map(const Vec& mean) const override {
    const double v = mean[1] - mean[0] * mean[0];
    Vec out(2);
    out[0] = mean[0] / v;
    out[1] = -0.5 / v;
    return out;
  }
  Mat fisher_information(const Vec& natural) const override {
    // Cov[(x, x^2)] for x ~ N(m, v): [[v, 2mv], [2mv, 4m^2 v + 2v^2]].
    const double m = -natural[0] / (2.0 * natural[1]);
    const double v = -1.0 / (2.0 * natural[1]);
    Mat out(2, 2);
    out(0, 0) = v;
    out(0, 1) = out(1, 0) = 2.0 * m * v;
    out(1, 1) = 4.0 * m * m * v + 2.0 * v * v;
    return out;
  }
};

// ----- Univariate Gaussian with known variance -----

class FixedVarianceGaussianFamily final : public Family {
 public:
  explicit FixedVarianceGaussianFamily(double variance) : variance_(variance) {
    if (!(variance > 0.0) || !std::isfinite(variance)) {
      throw DomainError("fixed-variance gaussian needs a positive finite variance");
    }
  }

  std::string name() const override {
    return "gaussian_fixed_var(" + std::to_string(variance_) + ")";
  }
  Eigen::Index dim() const override { return 1; }

  bool in_natural_domain(const Vec& natural) const override {
    return std::isfinite(natural[0]);
  }
  bool in_mean_domain(const Vec& mean) const override { return std::isfinite(mean[0]); }
  double log_partition(const Vec& natural) const override {
    return 0.5 * variance_ * natural[0] * natural[0];
  }
  Vec mean_map(const Vec& natural) const override { return variance_ * natural; }
  Vec inverse_mean_map(const Vec& mean) const override { return mean / variance_; }
  Mat fisher_information(const Vec&) const override {
    Mat out(1, 1);
    out(0, 0) = variance_;
    return out;
  }

 private:
  double variance_;
};

// ----- Full-covariance Gaussian on R^p -----

class MultivariateGaussianFamily final : public Family {
 public:
  explicit MultivariateGaussianFamily(Eigen::Index p) : p_(p) {
    if (p < 1) throw DomainError("multivariate gaussian needs dimension >= 1");
  }

  std::string name() const override { return "gaussian_full(" + std::to_string(p_) + ")"; }
  Eigen::Index dim() const override { return p_ + packed_size(p_); }

  bool in_natural_domain(const Vec& natural) const override {
    if (!natural.allFinite()) return false;
    const Mat precision = precision_from(natural);
    return spd(precision);
  }
  bool in_mean_domain(const Vec& mean) const override {
    if (!mean.allFinite()) return false;
    Vec m;
    Mat second;
    split_mean(mean, m, second);
    const Mat cov = second - m * m.transpose();
    return spd(cov);
  }
  double log_partition(const Vec& natural) const override {
    const Vec eta = natural.head(p_);
    const Mat precision = precision_from(natural);
    const Eigen::LLT<Mat> llt(precision);
    const Vec m = llt.solve(eta);
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return 0.5 * eta.dot(m) - 0.5 * log_det;
  }
  Vec mean_map(const Vec& natural) const override {
    const Vec eta = natural.head(p_);
    const Mat precision = precision_from(natural);
    const Eigen::LLT<Mat> llt(precision);
    const Vec m = llt.solve(eta);
    const Mat cov = llt.solve(Mat::Identity(p_, p_));
    const Mat second = cov + m * m.transpose();
    Vec out(dim());
    out.head(p_) = m;
    for (Eigen::Index i = 0; i < p_; ++i)
      for (Eigen::Index j = i; j < p_; ++j)
        out[p_ + packed_index(p_, i, j)] = (i == j ? 1.0 : 2.0) * second(i, j);
    return out;
  }
  Vec inverse_mean_map(const Vec& mean) const override {
    Vec m;
    Mat second;
    split_mean(mean, m, second);
    const Mat cov = second - m * m.transpose();
    const Eigen::LLT<Mat> llt(cov);
    const Mat precision = llt.solve(Mat::Identity(p_, p_));
    Vec out(dim());
    out.head(p_) = precision * m;
    for (Eigen::Index i = 0; i < p_; ++i)
      for (Eigen::Index j = i; j < p_; ++j)
        out[p_ + packed_index(p_, i, j)] = -0.5 * precision(i, j);
    return out;
  }
  Mat fisher_information(const Vec& natural) const override {
    // Cov[S] with S = (x, doubled packed xx'); Wick factorization of the
    // Gaussian fourth moments gives every entry in closed form.
    const Vec eta = natural.head(p_);
    const Mat precision = precision_from(natural);
    const Eigen::LLT<Mat> llt(precision);
    const Vec m = llt.solve(eta);
    const Mat cov = llt.solve(Mat::Identity(p_, p_));

    Mat out(dim(), dim());
    out.topLeftCorner(p_, p_) = cov;
    for (Eigen::Index a = 0; a < p_; ++a) {
      for (Eigen::Index b = a; b < p_; ++b) {
        const double scale = (a == b) ? 1.0 : 2.0;
        const Eigen::Index col = p_ + packed_index(p_, a, b);
        for (Eigen::Index i = 0; i < p_; ++i) {
          const double value = scale * (m[a] * cov(i, b) + m[b] * cov(i, a));
          out(i, col) = value;
          out(col, i) = value;
        }
      }
    }
    for (Eigen::Index a = 0; a < p_; ++a) {
      for (Eigen::Index b = a; b < p_; ++b) {
        const Eigen::Index row = p_ + packed_index(p_, a, b);
        const double sr = (a == b) ? 1.0 : 2.0;
        for (Eigen::Index c = 0; c < p_; ++c) {
          for (Eigen::Index d = c; d < p_; ++d) {
            const Eigen::Index col = p_ + packed_index(p_, c, d);
            if (col < row) continue;
            const double sc = (c == d) ? 1.0 : 2.0;
            const double value =
                sr * sc *
                (cov(a, c) * cov(b, d) + cov(a, d) * cov(b, c) +
                 m[a] * m[c] * cov(b, d) + m[a] * m[d] * cov(b, c) +
                 m[b] * m[c] * cov(a, d) + m[b] * m[d] * cov(a, c));
            out(row, col) = value;
            out(col, row) = value;
          }
        }
      }
    }
    return out;
  }

 private:
  Mat precision_from(const Vec& natural) const {
    return -2.0 * unpack_symmetric(natural.tail(packed_size(p_)), p_);
  }
  void split_mean(const Vec& mean, Vec& m, Mat& second) const {
    m = mean.head(p_);
    second = unpack_symmetric(mean.tail(packed_size(p_)), p_);
    for (Eigen::Index i = 0; i < p_; ++i)
      for (Eigen::Index j = 0; j < p_; ++j)
        if (i != j) second(i, j) *= 0.5;
  }
  static bool spd(const Mat& w) {
    if (!w.allFinite()) return false;
    Eigen::LLT<Mat> llt(w);
    if (llt.info() != Eigen::Success) return false;
    return (llt.matrixL().toDenseMatrix().diagonal().array() > 0.0).all();
  }

  Eigen::Index p_;
};

// ----- Product of independent blocks -----

class ProductFamily final : public Family {
 public:
  explicit ProductFamily(std::vector<FamilyPtr> blocks) : blocks_(std::move(blocks)) {
    if (blocks_.empty()) throw DomainError("product family needs at least one block");
    offsets_.reserve(blocks_.size() + 1);
    Eigen::Index off = 0;
    for (const auto& b : blocks_) {
      offsets_.push_back(off);
      off += b->dim();
    }
    offsets_.push_back(off);
  }

  std::string name() const override {
    std::string out = "product[";
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      if (i) out += ",";
      out += blocks_[i]->name();
    }
    return out + "]";
  }
  Eigen::Index dim() const override { return offsets_.back(); }

  bool in_natural_domain(const Vec& natural) const override {
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      if (!blocks_[i]->in_natural_domain(segment(natural, i))) return false;
    return true;
  }
  bool in_mean_domain(const Vec& mean) const override {
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      if (!blocks_[i]->in_mean_domain(segment(mean, i))) return false;
    return true;
  }
  double log_partition(const Vec& natural) const override {
    double acc = 0.0;
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      acc += blocks_[i]->log_partition(segment(natural, i));
    return acc;
  }
  Vec mean_map(const Vec& natural) const override {
    Vec out(dim());
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      out.segment(offsets_[i], blocks_[i]->dim()) = blocks_[i]->mean_map(segment(natural, i));
    return out;
  }
  Vec inverse_mean_map(const Vec& mean) const override {
    Vec out(dim());
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      out.segment(offsets_[i], blocks_[i]->dim()) =
          blocks_[i]->inverse_mean_map(segment(mean, i));
    return out;
  }
  Mat fisher_information(const Vec& natural) const override {
    Mat out = Mat::Zero(dim(), dim());
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      out.block(offsets_[i], offsets_[i], blocks_[i]->dim(), blocks_[i]->dim()) =
          blocks_[i]->fisher_information(segment(natural, i));
    return out;
  }

 private:
  Vec segment(const Vec& values, std::size_t i) const {
    return values.segment(offsets_[i], blocks_[i]->dim());
  }

  std::vector<FamilyPtr> blocks_;
  std::vector<Eigen::Index> offsets_;
};

}  // namespace

// ----- Mixture complete-data family -----

MixtureCompleteFamily::MixtureCompleteFamily(Eigen::Index k, FamilyPtr component)
    : k_(k), component_(std::move(component)) {
  if (k_ < 1) throw DomainError("mixture family needs at least one component");
  if (!component_) throw DomainError("mixture family needs a component family");
}

std::string MixtureCompleteFamily::name() const {
  return "mixture(" + std::to_string(k_) + "," + component_->name() + ")";
}

Eigen::Index MixtureCompleteFamily::dim() const { return label_dim() + k_ * block_dim(); }

bool MixtureCompleteFamily::in_natural_domain(const Vec& natural) const {
  if (!natural.head(label_dim()).allFinite()) return false;
  for (Eigen::Index j = 0; j < k_; ++j)
    if (!component_->in_natural_domain(component_block(natural, j))) return false;
  return true;
}

bool MixtureCompleteFamily::in_mean_domain(const Vec& mean) const {
  if (!mean.allFinite()) return false;
  double head_sum = 0.0;
  for (Eigen::Index j = 0; j < label_dim(); ++j) {
    if (!(mean[j] > 0.0)) return false;
    head_sum += mean[j];
  }
  if (k_ > 1 && !(head_sum < 1.0)) return false;
  const Eigen::Index c = block_dim();
  for (Eigen::Index j = 0; j < k_; ++j) {
    const double weight = (j < label_dim()) ? mean[j] : 1.0 - head_sum;
    const Vec conditional = mean.segment(block_offset(j), c) / weight;
    if (!component_->in_mean_domain(conditional)) return false;
  }
  return true;
}

Vec MixtureCompleteFamily::outcome_exponents(const Vec& natural) const {
  Vec out(k_);
  for (Eigen::Index j = 0; j < k_; ++j) {
    out[j] = component_->log_partition(component_block(natural, j));
    if (j < label_dim()) out[j] += natural[j];
  }
  return out;
}

double MixtureCompleteFamily::log_partition(const Vec& natural) const {
  return log_sum_exp(outcome_exponents(natural));
}

Vec MixtureCompleteFamily::weights_from_natural(const Vec& natural) const {
  const Vec exponents = outcome_exponents(natural);
  const double total = log_sum_exp(exponents);
  return (exponents.array() - total).exp();
}

Vec MixtureCompleteFamily::component_block(const Vec& natural, Eigen::Index j) const {
  return natural.segment(block_offset(j), block_dim());
}

Vec MixtureCompleteFamily::natural_from_parts(const Vec& weights,
                                              const std::vector<Vec>& blocks) const {
  if (weights.size() != k_ || static_cast<Eigen::Index>(blocks.size()) != k_) {
    throw DomainError(name() + ": natural_from_parts needs k weights and k blocks");
  }
  if ((weights.array() <= 0.0).any()) {
    throw DomainError(name() + ": mixture weights must be strictly positive");
  }
  Vec out(dim());
  const double last_log_partition = component_->log_partition(blocks[k_ - 1]);
  for (Eigen::Index j = 0; j < k_; ++j) {
    out.segment(block_offset(j), block_dim()) = blocks[j];
    if (j < label_dim()) {
      out[j] = std::log(weights[j] / weights[k_ - 1]) -
               component_->log_partition(blocks[j]) + last_log_partition;
    }
  }
  return out;
}

void MixtureCompleteFamily::mean_parts(const Vec& mean, Vec& weights,
                                       std::vector<Vec>& blocks) const {
  weights.resize(k_);
  if (k_ > 1) {
    weights.head(label_dim()) = mean.head(label_dim());
    weights[k_ - 1] = 1.0 - weights.head(label_dim()).sum();
  } else {
    weights[0] = 1.0;
  }
  blocks.assign(k_, Vec());
  for (Eigen::Index j = 0; j < k_; ++j)
    blocks[j] = mean.segment(block_offset(j), block_dim()) / weights[j];
}

Vec MixtureCompleteFamily::mean_map(const Vec& natural) const {
  const Vec weights = weights_from_natural(natural);
  Vec out(dim());
  out.head(label_dim()) = weights.head(label_dim());
  for (Eigen::Index j = 0; j < k_; ++j)
    out.segment(block_offset(j), block_dim()) =
        weights[j] * component_->mean_map(component_block(natural, j));
  return out;
}

Vec MixtureCompleteFamily::inverse_mean_map(const Vec& mean) const {
  Vec weights;
  std::vector<Vec> conditional;
  mean_parts(mean, weights, conditional);
  std::vector<Vec> blocks(k_);
  for (Eigen::Index j = 0; j < k_; ++j)
    blocks[j] = component_->inverse_mean_map(conditional[j]);
  return natural_from_parts(weights, blocks);
}

Mat MixtureCompleteFamily::fisher_information(const Vec& natural) const {
  // A is a log-sum-exp of per-outcome exponents l_j, each touching the
  // label coordinate j (when j < k) and component block j only:
  //   hess A = sum_j pi_j (hess l_j + grad l_j grad l_j') - grad A grad A'.
  const Vec weights = weights_from_natural(natural);
  const Eigen::Index d = dim();
  Mat out = Mat::Zero(d, d);
  Vec total_grad = Vec::Zero(d);
  for (Eigen::Index j = 0; j < k_; ++j) {
    const Vec block = component_block(natural, j);
    Vec grad = Vec::Zero(d);
    if (j < label_dim()) grad[j] = 1.0;
    grad.segment(block_offset(j), block_dim()) = component_->mean_map(block);
    out.block(block_offset(j), block_offset(j), block_dim(), block_dim()) +=
        weights[j] * component_->fisher_information(block);
    out += weights[j] * grad * grad.transpose();
    total_grad += weights[j] * grad;
  }
  out -= total_grad * total_grad.transpose();
  return out;
}

FamilyPtr make_bernoulli() { return std::make_shared<BernoulliFamily>(); }

FamilyPtr make_categorical(Eigen::Index k) { return std::make_shared<CategoricalFamily>(k); }

FamilyPtr make_gaussian() { return std::make_shared<GaussianFamily>(); }

FamilyPtr make_fixed_variance_gaussian(double variance) {
  return std::make_shared<FixedVarianceGaussianFamily>(variance);
}

FamilyPtr make_multivariate_gaussian(Eigen::Index p) {
  return std::make_shared<MultivariateGaussianFamily>(p);
}

FamilyPtr make_product(std::vector<FamilyPtr> blocks) {
  return std::make_shared<ProductFamily>(std::move(blocks));
}

std::shared_ptr<const MixtureCompleteFamily> make_mixture_complete(Eigen::Index k,
                                                                   FamilyPtr component) {
  return std::make_shared<MixtureCompleteFamily>(k, std::move(component));
}

}  // namespace mirror_em
