#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace mirror_em {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Deterministic random source. Only raw mt19937_64 draws are consumed and all
// distributions are derived here by hand, so streams are reproducible across
// standard libraries (std::normal_distribution is not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection-free modulo is fine here: n is tiny
  // compared to 2^64, the bias is unobservable at any statistical tolerance
  // used in this project.
  std::uint64_t below(std::uint64_t n) { return engine_() % n; }

  // Standard normal via Box-Muller (both values used alternately).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  // Index drawn from an unnormalized weight vector.
  Eigen::Index categorical(const Vec& weights) {
    const double total = weights.sum();
    double u = uniform() * total;
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
      u -= weights[i];
      if (u <= 0.0) return i;
    }
    return weights.size() - 1;
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// log(sum_i exp(v_i)) with the usual max shift; -inf input rows are allowed
// as long as at least one entry is finite.
inline double log_sum_exp(const Vec& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) acc += std::exp(v[i] - m);
  return m + std::log(acc);
}

// Packed storage for symmetric p x p matrices: upper triangle, row major,
// diagonal included, each entry stored once. Used by the full-covariance
// Gaussian family for its second-moment block.
inline Eigen::Index packed_size(Eigen::Index p) { return p * (p + 1) / 2; }

inline Eigen::Index packed_index(Eigen::Index p, Eigen::Index i, Eigen::Index j) {
  // requires i <= j
  return i * p - i * (i - 1) / 2 + (j - i);
}

inline Vec pack_symmetric(const Mat& w) {
  const Eigen::Index p = w.rows();
  Vec out(packed_size(p));
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = i; j < p; ++j) out[packed_index(p, i, j)] = w(i, j);
  return out;
}

inline Mat unpack_symmetric(const Vec& v, Eigen::Index p) {
  Mat out(p, p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = i; j < p; ++j) out(i, j) = out(j, i) = v[packed_index(p, i, j)];
  return out;
}

}  // namespace mirror_em
