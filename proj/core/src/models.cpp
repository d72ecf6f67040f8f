#include "mirror_em/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

namespace mirror_em {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

Mat gaussian_stats(const Mat& rows) {
  const Eigen::Index n = rows.rows();
  Mat stats(n, 2);
  stats.col(0) = rows.col(0);
  stats.col(1) = rows.col(0).array().square();
  return stats;
}

Mat multivariate_gaussian_stats(const Mat& rows) {
  const Eigen::Index n = rows.rows();
  const Eigen::Index p = rows.cols();
  Mat stats(n, p + packed_size(p));
  stats.leftCols(p) = rows;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index a = 0; a < p; ++a)
      for (Eigen::Index b = a; b < p; ++b)
        stats(i, p + packed_index(p, a, b)) =
            (a == b ? 1.0 : 2.0) * rows(i, a) * rows(i, b);
  return stats;
}

}  // namespace

ExpFamilyMixtureModel::ExpFamilyMixtureModel(std::string kind, Dataset data, Eigen::Index k,
                                             FamilyPtr component, Mat sample_stats,
                                             Vec log_base)
    : kind_(std::move(kind)),
      data_(std::move(data)),
      k_(k),
      mixture_(std::make_shared<MixtureCompleteFamily>(k, std::move(component))),
      sample_stats_(std::move(sample_stats)),
      log_base_(std::move(log_base)) {
  if (k_ < 1) throw ConfigError(kind_ + ": needs at least one component");
  if (sample_stats_.rows() != data_.n() || log_base_.size() != data_.n()) {
    throw ConfigError(kind_ + ": statistics table does not match the dataset");
  }
}

Mat ExpFamilyMixtureModel::joint_log_scores(const NaturalParams& params) const {
  const Vec& natural = params.values();
  const Vec weights = mixture_->weights_from_natural(natural);
  Mat scores(data_.n(), k_);
  for (Eigen::Index j = 0; j < k_; ++j) {
    const Vec block = mixture_->component_block(natural, j);
    const double offset =
        std::log(weights[j]) - mixture_->component_family()->log_partition(block);
    scores.col(j) = (sample_stats_ * block).array() + offset;
  }
  return scores;
}

Responsibilities ExpFamilyMixtureModel::responsibilities(const NaturalParams& params) const {
  Mat scores = joint_log_scores(params);
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double total = log_sum_exp(scores.row(i).transpose());
    if (!std::isfinite(total)) {
      throw NumericalError(kind_ + ": observation " + std::to_string(i) +
                           " has zero density under every component");
    }
    scores.row(i) = (scores.row(i).array() - total).exp();
    // One renormalization squeezes out the last ulp so downstream row-sum
    // invariants hold exactly to working precision.
    scores.row(i) /= scores.row(i).sum();
  }
  return scores;
}

Vec ExpFamilyMixtureModel::stats_from_responsibilities(const Responsibilities& resp) const {
  const double n = static_cast<double>(data_.n());
  Vec out(mixture_->dim());
  for (Eigen::Index j = 0; j + 1 < k_; ++j) out[j] = resp.col(j).sum() / n;
  for (Eigen::Index j = 0; j < k_; ++j)
    out.segment(mixture_->block_offset(j), mixture_->block_dim()) =
        (resp.col(j).transpose() * sample_stats_).transpose() / n;
  return out;
}

MeanParams ExpFamilyMixtureModel::expected_stats(const NaturalParams& params) const {
  return MeanParams::unchecked(mixture_, stats_from_responsibilities(responsibilities(params)));
}

Vec ExpFamilyMixtureModel::expected_stats_for_sample(const NaturalParams& params,
                                                     Eigen::Index i) const {
  if (i < 0 || i >= data_.n()) {
    throw ConfigError(kind_ + ": sample index " + std::to_string(i) + " out of range");
  }
  const Vec& natural = params.values();
  const Vec weights = mixture_->weights_from_natural(natural);
  Vec scores(k_);
  for (Eigen::Index j = 0; j < k_; ++j) {
    const Vec block = mixture_->component_block(natural, j);
    scores[j] = std::log(weights[j]) + sample_stats_.row(i).dot(block) -
                mixture_->component_family()->log_partition(block);
  }
  const double total = log_sum_exp(scores);
  if (!std::isfinite(total)) {
    throw NumericalError(kind_ + ": observation " + std::to_string(i) +
                         " has zero density under every component");
  }
  const Vec resp = (scores.array() - total).exp();
  Vec out(mixture_->dim());
  for (Eigen::Index j = 0; j + 1 < k_; ++j) out[j] = resp[j];
  for (Eigen::Index j = 0; j < k_; ++j)
    out.segment(mixture_->block_offset(j), mixture_->block_dim()) =
        resp[j] * sample_stats_.row(i).transpose();
  return out;
}

double ExpFamilyMixtureModel::nll(const NaturalParams& params) const {
  const Mat scores = joint_log_scores(params);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double total = log_sum_exp(scores.row(i).transpose());
    if (!std::isfinite(total)) {
      throw NumericalError(kind_ + ": observation " + std::to_string(i) +
                           " has zero density under every component");
    }
    acc += total + log_base_[i];
  }
  return -acc / static_cast<double>(data_.n());
}

Vec ExpFamilyMixtureModel::nll_gradient(const NaturalParams& params) const {
  return mixture_->mean_map(params.values()) - expected_stats(params).values();
}

std::shared_ptr<const ExpFamilyMixtureModel> make_gaussian_mixture(Dataset data,
                                                                   Eigen::Index k) {
  const Eigen::Index p = data.dim();
  FamilyPtr component = (p == 1) ? make_gaussian() : make_multivariate_gaussian(p);
  Mat stats = (p == 1) ? gaussian_stats(data.rows) : multivariate_gaussian_stats(data.rows);
  Vec log_base = Vec::Constant(data.n(), -0.5 * static_cast<double>(p) * kLogTwoPi);
  return std::make_shared<ExpFamilyMixtureModel>(
      k == 1 && p == 1 ? "single_gaussian" : "gaussian_mixture", std::move(data), k,
      std::move(component), std::move(stats), std::move(log_base));
}

std::shared_ptr<const ExpFamilyMixtureModel> make_fixed_variance_gaussian_mixture(
    Dataset data, Eigen::Index k, double variance) {
  const Eigen::Index p = data.dim();
  std::vector<FamilyPtr> blocks(p, make_fixed_variance_gaussian(variance));
  FamilyPtr component = (p == 1) ? blocks[0] : make_product(std::move(blocks));
  Mat stats = data.rows;
  // The known-variance family keeps the x^2 term in its base measure.
  Vec log_base(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    log_base[i] = -data.rows.row(i).squaredNorm() / (2.0 * variance) -
                  0.5 * static_cast<double>(p) * (kLogTwoPi + std::log(variance));
  }
  return std::make_shared<ExpFamilyMixtureModel>("gaussian_mixture_fixed_var",
                                                 std::move(data), k, std::move(component),
                                                 std::move(stats), std::move(log_base));
}

std::shared_ptr<const ExpFamilyMixtureModel> make_bernoulli_mixture(Dataset data,
                                                                    Eigen::Index k) {
  const Eigen::Index p = data.dim();
  for (Eigen::Index i = 0; i < data.n(); ++i)
    for (Eigen::Index j = 0; j < p; ++j)
      if (data.rows(i, j) != 0.0 && data.rows(i, j) != 1.0) {
        throw ConfigError("bernoulli_mixture: entry (" + std::to_string(i) + "," +
                          std::to_string(j) + ") is not 0 or 1");
      }
  std::vector<FamilyPtr> blocks(p, make_bernoulli());
  FamilyPtr component = (p == 1) ? blocks[0] : make_product(std::move(blocks));
  Mat stats = data.rows;
  Vec log_base = Vec::Zero(data.n());
  return std::make_shared<ExpFamilyMixtureModel>("bernoulli_mixture", std::move(data), k,
                                                 std::move(component), std::move(stats),
                                                 std::move(log_base));
}

std::shared_ptr<const ExpFamilyMixtureModel> make_single_gaussian(Dataset data) {
  if (data.dim() != 1) throw ConfigError("single_gaussian expects one data column");
  return make_gaussian_mixture(std::move(data), 1);
}

Responsibilities responsibilities(const LatentModel& model, const NaturalParams& params) {
  return model.responsibilities(params);
}

MeanParams expected_stats(const LatentModel& model, const NaturalParams& params) {
  return model.expected_stats(params);
}

double nll(const LatentModel& model, const NaturalParams& params) { return model.nll(params); }

Vec nll_gradient(const LatentModel& model, const NaturalParams& params) {
  return model.nll_gradient(params);
}

NaturalParams m_step(const LatentModel& model, const MeanParams& stats) {
  const auto* mixture = dynamic_cast<const MixtureCompleteFamily*>(&stats.family());
  if (mixture != nullptr) {
    double head = 0.0;
    for (Eigen::Index j = 0; j < mixture->label_dim(); ++j) {
      const double mass = stats.values()[j];
      if (mass == 0.0) {
        throw ZeroWeightComponentError(model.kind() + ": component " + std::to_string(j) +
                                       " has zero responsibility mass");
      }
      head += mass;
    }
    if (mixture->components() > 1 && 1.0 - head == 0.0) {
      throw ZeroWeightComponentError(model.kind() + ": component " +
                                     std::to_string(mixture->components() - 1) +
                                     " has zero responsibility mass");
    }
  }
  if (!stats.family().in_mean_domain(stats.values())) {
    throw DomainError(model.kind() +
                      ": expected statistics sit on the mean-domain boundary, "
                      "the M-step has no maximizer (degenerate component)");
  }
  return NaturalParams(stats.family_ptr(), stats.family().inverse_mean_map(stats.values()));
}

double surrogate_value(const LatentModel& model, const NaturalParams& theta,
                       const NaturalParams& phi) {
  return surrogate_value(model, model.expected_stats(theta), phi);
}

double surrogate_value(const LatentModel&, const MeanParams& stats, const NaturalParams& phi) {
  return phi.family().log_partition(phi.values()) - stats.values().dot(phi.values());
}

double complete_data_kl(const LatentModel& model, const NaturalParams& theta,
                        const NaturalParams& phi) {
  const auto* mixture = dynamic_cast<const MixtureCompleteFamily*>(&theta.family());
  if (mixture == nullptr) {
    throw UnsupportedError(model.kind() + ": complete_data_kl needs a mixture family");
  }
  const Vec weights_theta = mixture->weights_from_natural(theta.values());
  const Vec weights_phi = mixture->weights_from_natural(phi.values());
  const FamilyPtr component = mixture->component_family();
  double acc = 0.0;
  for (Eigen::Index j = 0; j < mixture->components(); ++j) {
    acc += weights_theta[j] * std::log(weights_theta[j] / weights_phi[j]);
    const NaturalParams from(component, mixture->component_block(theta.values(), j));
    const NaturalParams to(component, mixture->component_block(phi.values(), j));
    acc += weights_theta[j] * bregman_divergence(to, from);
  }
  return acc;
}

// ----- Initialization -----

namespace {

std::vector<Eigen::Index> distinct_rows(Eigen::Index n, Eigen::Index k, Rng& rng) {
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (Eigen::Index j = 0; j < k; ++j) {
    const Eigen::Index pick = j + static_cast<Eigen::Index>(rng.below(n - j));
    std::swap(order[j], order[pick]);
  }
  order.resize(k);
  return order;
}

Mat kmeans_centers(const Mat& rows, Eigen::Index k, Rng& rng, std::vector<int>& assign) {
  const Eigen::Index n = rows.rows();
  Mat centers(k, rows.cols());
  // k-means++ seeding.
  centers.row(0) = rows.row(static_cast<Eigen::Index>(rng.below(n)));
  Vec dist2 = (rows.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (Eigen::Index j = 1; j < k; ++j) {
    const double total = dist2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      pick = rng.categorical(dist2);
    } else {
      pick = static_cast<Eigen::Index>(rng.below(n));
    }
    centers.row(j) = rows.row(pick);
    dist2 = dist2.cwiseMin((rows.rowwise() - centers.row(j)).rowwise().squaredNorm());
  }
  assign.assign(n, 0);
  for (int round = 0; round < 10; ++round) {
    bool moved = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (rows.row(i) - centers.row(0)).squaredNorm();
      for (Eigen::Index j = 1; j < k; ++j) {
        const double d = (rows.row(i) - centers.row(j)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(j);
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        moved = true;
      }
    }
    Mat sums = Mat::Zero(k, rows.cols());
    Vec counts = Vec::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[i]) += rows.row(i);
      counts[assign[i]] += 1.0;
    }
    for (Eigen::Index j = 0; j < k; ++j) {
      if (counts[j] > 0.0) {
        centers.row(j) = sums.row(j) / counts[j];
      } else {
        // Empty cluster: reseed on the point farthest from its center.
        Eigen::Index far = 0;
        double far_d = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double d = (rows.row(i) - centers.row(assign[i])).squaredNorm();
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        centers.row(j) = rows.row(far);
        moved = true;
      }
    }
    if (!moved && round > 0) break;
  }
  return centers;
}

Vec component_mean_from_moments(const Family& family, const Vec& mean, const Mat& cov) {
  // Assembles component mean parameters from first/second moments, matching
  // each concrete component family's layout.
  const Eigen::Index p = mean.size();
  if (family.dim() == 2 && p == 1 && family.name() == "gaussian") {
    Vec out(2);
    out[0] = mean[0];
    out[1] = cov(0, 0) + mean[0] * mean[0];
    return out;
  }
  if (family.name().rfind("gaussian_full", 0) == 0) {
    const Mat second = cov + mean * mean.transpose();
    Vec out(family.dim());
    out.head(p) = mean;
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = i; j < p; ++j)
        out[p + packed_index(p, i, j)] = (i == j ? 1.0 : 2.0) * second(i, j);
    return out;
  }
  // Fixed-variance blocks and Bernoulli blocks use the raw mean directly.
  return mean;
}

}  // namespace

NaturalParams initialize(const LatentModel& model, InitMethod method, Rng& rng) {
  const auto* mm = dynamic_cast<const ExpFamilyMixtureModel*>(&model);
  if (mm == nullptr) {
    throw UnsupportedError(model.kind() + ": initialize handles exponential-family mixtures");
  }
  const MixtureCompleteFamily& mixture = mm->mixture();
  const Mat& rows = mm->data().rows;
  const Eigen::Index n = rows.rows();
  const Eigen::Index p = rows.cols();
  const Eigen::Index k = mixture.components();
  const bool bernoulli = mm->kind() == "bernoulli_mixture";

  const Vec data_mean = rows.colwise().mean();
  Mat data_cov = Mat::Zero(p, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec c = rows.row(i).transpose() - data_mean;
    data_cov += c * c.transpose();
  }
  data_cov /= static_cast<double>(n);

  Vec weights = Vec::Constant(k, 1.0 / static_cast<double>(k));
  std::vector<Vec> blocks(k);
  const FamilyPtr component = mixture.component_family();

  auto block_from = [&](const Vec& center, const Mat& cov) {
    Vec mean_point;
    if (bernoulli) {
      // Blend toward one half so the initial parameters stay interior.
      mean_point = (0.3 + 0.4 * center.array()).matrix();
    } else {
      mean_point = component_mean_from_moments(*component, center, cov);
    }
    return component->inverse_mean_map(mean_point);
  };

  if (method == InitMethod::kRandomRows) {
    const std::vector<Eigen::Index> picks = distinct_rows(n, k, rng);
    for (Eigen::Index j = 0; j < k; ++j)
      blocks[j] = block_from(rows.row(picks[j]).transpose(), data_cov);
  } else {
    std::vector<int> assign;
    const Mat centers = kmeans_centers(rows, k, rng, assign);
    for (Eigen::Index j = 0; j < k; ++j) {
      Mat cov = Mat::Zero(p, p);
      double count = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (assign[i] != static_cast<int>(j)) continue;
        const Vec c = rows.row(i).transpose() - centers.row(j).transpose();
        cov += c * c.transpose();
        count += 1.0;
      }
      if (count > static_cast<double>(p)) {
        cov /= count;
        Eigen::LLT<Mat> llt(cov);
        if (llt.info() != Eigen::Success) cov = data_cov;
      } else {
        cov = data_cov;
      }
      blocks[j] = block_from(centers.row(j).transpose(), cov);
      weights[j] = (count + 1.0) / (static_cast<double>(n) + static_cast<double>(k));
    }
    weights /= weights.sum();
  }
  return NaturalParams(mm->complete_family(), mixture.natural_from_parts(weights, blocks));
}

}  // namespace mirror_em
