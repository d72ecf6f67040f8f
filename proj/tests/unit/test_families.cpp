#include <cmath>

#include "doctest.h"
#include "mirror_em/expfam.hpp"
#include "mirror_em/families.hpp"

using namespace mirror_em;

namespace {

// Natural coordinates of N(mean, cov) under the packed parameterization.
NaturalParams mvn_natural(const FamilyPtr& family, const Vec& mean, const Mat& cov) {
  const Eigen::Index p = mean.size();
  const Mat precision = cov.inverse();
  Vec natural(p + packed_size(p));
  natural.head(p) = precision * mean;
  // The quadratic block stores -Lambda/2 packed once per entry.
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i; j < p; ++j) {
      natural[p + packed_index(p, i, j)] = -0.5 * precision(i, j);
    }
  }
  return NaturalParams(family, natural);
}

double closed_form_mvn_kl(const Vec& m0, const Mat& c0, const Vec& m1, const Mat& c1) {
  const Eigen::Index p = m0.size();
  const Mat c1_inv = c1.inverse();
  const Vec shift = m1 - m0;
  return 0.5 * ((c1_inv * c0).trace() + shift.dot(c1_inv * shift) -
                static_cast<double>(p) + std::log(c1.determinant() / c0.determinant()));
}

}  // namespace

TEST_CASE("multivariate gaussian against the closed-form KL") {
  auto family = make_multivariate_gaussian(2);
  Vec m0(2), m1(2);
  m0 << 0.0, 0.5;
  m1 << 1.0, -0.5;
  Mat c0(2, 2), c1(2, 2);
  c0 << 1.0, 0.3, 0.3, 0.8;
  c1 << 1.5, -0.2, -0.2, 1.1;

  const NaturalParams theta0 = mvn_natural(family, m0, c0);
  const NaturalParams theta1 = mvn_natural(family, m1, c1);

  // D_A(phi, theta) = KL(theta || phi)
  CHECK(bregman_divergence(theta1, theta0) ==
        doctest::Approx(closed_form_mvn_kl(m0, c0, m1, c1)).epsilon(1e-10));
  CHECK(bregman_divergence(theta0, theta1) ==
        doctest::Approx(closed_form_mvn_kl(m1, c1, m0, c0)).epsilon(1e-10));
}

TEST_CASE("multivariate gaussian mean map carries the moments") {
  auto family = make_multivariate_gaussian(2);
  Vec m(2);
  m << 1.0, -2.0;
  Mat c(2, 2);
  c << 2.0, 0.5, 0.5, 1.0;
  const Vec mu = mean_map(mvn_natural(family, m, c)).values();
  CHECK(mu[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(mu[1] == doctest::Approx(-2.0).epsilon(1e-10));
  // Second-moment block: diagonal E[x_i^2], doubled cross moments.
  CHECK(mu[2] == doctest::Approx(c(0, 0) + m[0] * m[0]).epsilon(1e-10));
  CHECK(mu[3] == doctest::Approx(2.0 * (c(0, 1) + m[0] * m[1])).epsilon(1e-10));
  CHECK(mu[4] == doctest::Approx(c(1, 1) + m[1] * m[1]).epsilon(1e-10));
}

TEST_CASE("mixture complete family splits its mean coordinates") {
  auto mixture = make_mixture_complete(2, make_gaussian());
  Vec weights(2);
  weights << 0.3, 0.7;
  Vec b0(2), b1(2);
  b0 << 1.0, -0.5;   // N(1, 1)
  b1 << -0.25, -0.125;  // N(-1, 4)
  const Vec natural = mixture->natural_from_parts(weights, {b0, b1});
  const Vec mean = mixture->mean_map(natural);

  Vec part_weights;
  std::vector<Vec> conditionals;
  mixture->mean_parts(mean, part_weights, conditionals);
  CHECK(part_weights[0] == doctest::Approx(0.3).epsilon(1e-10));
  CHECK(part_weights[1] == doctest::Approx(0.7).epsilon(1e-10));
  const Vec mu0 = make_gaussian()->mean_map(b0);
  const Vec mu1 = make_gaussian()->mean_map(b1);
  CHECK((conditionals[0] - mu0).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((conditionals[1] - mu1).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("mixture mean domain excludes degenerate weights and blocks") {
  auto mixture = make_mixture_complete(2, make_gaussian());
  Vec weights(2);
  weights << 0.5, 0.5;
  Vec block(2);
  block << 0.0, -0.5;
  const Vec natural = mixture->natural_from_parts(weights, {block, block});
  Vec mean = mixture->mean_map(natural);

  CHECK(mixture->in_mean_domain(mean));

  Vec zero_weight = mean;
  zero_weight[0] = 0.0;  // first component mass vanishes
  CHECK_FALSE(mixture->in_mean_domain(zero_weight));

  Vec full_weight = mean;
  full_weight[0] = 1.0;  // second component mass vanishes
  CHECK_FALSE(mixture->in_mean_domain(full_weight));

  Vec degenerate_block = mean;
  // Conditional second moment equal to the squared conditional mean: the
  // within-component variance hits zero.
  degenerate_block[2] = 0.5 * 0.0;
  degenerate_block[3] = 0.0;
  CHECK_FALSE(mixture->in_mean_domain(degenerate_block));
}

TEST_CASE("categorical log partition normalizes the pinned coordinate") {
  auto family = make_categorical(3);
  Vec logits(2);
  logits << 1.0, -0.5;
  const double a = family->log_partition(logits);
  // exp(w1) + exp(w2) + 1 summed then logged
  CHECK(a == doctest::Approx(std::log(std::exp(1.0) + std::exp(-0.5) + 1.0))
                 .epsilon(1e-12));
  const Vec pi = family->mean_map(logits);
  CHECK(pi[0] + pi[1] < 1.0);
  CHECK(pi.minCoeff() > 0.0);
}

TEST_CASE("utility helpers") {
  SUBCASE("packed symmetric round trip") {
    Mat m(3, 3);
    m << 1, 2, 3, 2, 5, 6, 3, 6, 9;
    const Vec packed = pack_symmetric(m);
    CHECK(packed.size() == packed_size(3));
    CHECK((unpack_symmetric(packed, 3) - m).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("log sum exp matches the naive sum away from overflow") {
    Vec v(3);
    v << 0.1, -1.0, 2.5;
    const double naive = std::log(std::exp(0.1) + std::exp(-1.0) + std::exp(2.5));
    CHECK(log_sum_exp(v) == doctest::Approx(naive).epsilon(1e-12));

    Vec shifted = v.array() + 1000.0;
    CHECK(log_sum_exp(shifted) == doctest::Approx(naive + 1000.0).epsilon(1e-12));
  }

  SUBCASE("rng streams are reproducible and seed-sensitive") {
    Rng a(42), b(42), c(43);
    bool same = true, different = false;
    for (int i = 0; i < 100; ++i) {
      const double x = a.uniform();
      same = same && (x == b.uniform());
      different = different || (x != c.uniform());
    }
    CHECK(same);
    CHECK(different);
  }

  SUBCASE("categorical draws respect the support") {
    Rng rng(7);
    Vec weights(3);
    weights << 0.2, 0.5, 0.3;
    for (int i = 0; i < 200; ++i) {
      const Eigen::Index draw = rng.categorical(weights);
      CHECK(draw >= 0);
      CHECK(draw < 3);
    }
  }
}
