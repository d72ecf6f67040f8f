#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "mirror_em/laplace.hpp"
#include "mirror_em/models.hpp"
#include "mirror_em/synthetic.hpp"
#include "mirror_em/verify.hpp"

using namespace mirror_em;
using namespace mirror_em::testing;

TEST_CASE("responsibilities") {
  SUBCASE("symmetric mixture splits the midpoint evenly") {
    auto model = make_gaussian_mixture(column_data({0.0}), 2);
    Vec weights(2), means(2), variances(2);
    weights << 0.5, 0.5;
    means << -1.5, 1.5;
    variances << 1.0, 1.0;
    const Responsibilities resp =
        responsibilities(*model, gmm_natural(*model, weights, means, variances));
    CHECK(resp(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(resp(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  }

  SUBCASE("one component gets everything") {
    auto model = make_single_gaussian(column_data({0.3, -1.2, 2.0}));
    Vec weights(1), means(1), variances(1);
    weights << 1.0;
    means << 0.0;
    variances << 1.0;
    const Responsibilities resp =
        responsibilities(*model, gmm_natural(*model, weights, means, variances));
    for (Eigen::Index i = 0; i < 3; ++i) CHECK(resp(i, 0) == 1.0);
  }

  SUBCASE("bayes rule oracle on a separated mixture") {
    auto model = make_gaussian_mixture(column_data({0.0, 10.0, 4.0}), 2);
    Vec weights(2), means(2), variances(2);
    weights << 0.3, 0.7;
    means << 0.0, 10.0;
    variances << 1.0, 1.0;
    const NaturalParams params = gmm_natural(*model, weights, means, variances);
    const Responsibilities resp = responsibilities(*model, params);
    for (Eigen::Index i = 0; i < 3; ++i) {
      const double x = model->data().rows(i, 0);
      const double a = weights[0] * normal_density(x, means[0], variances[0]);
      const double b = weights[1] * normal_density(x, means[1], variances[1]);
      CHECK(resp(i, 0) == doctest::Approx(a / (a + b)).epsilon(1e-10));
      CHECK(resp(i, 0) + resp(i, 1) == doctest::Approx(1.0).epsilon(1e-12));
    }
    // At the first component's mean the other component is ~ e^{-50} away.
    CHECK(resp(0, 1) < 1e-20);
    CHECK(resp(0, 0) > 1.0 - 1e-15);
  }
}

TEST_CASE("expected stats") {
  SUBCASE("single gaussian reduces to data moments") {
    auto model = make_single_gaussian(column_data({1.0, 2.0, 3.0, 6.0}));
    Vec weights(1), means(1), variances(1);
    weights << 1.0;
    means << 0.5;
    variances << 2.0;
    const Vec stats =
        expected_stats(*model, gmm_natural(*model, weights, means, variances)).values();
    CHECK(stats[0] == doctest::Approx(3.0).epsilon(1e-12));           // mean(x)
    CHECK(stats[1] == doctest::Approx(12.5).epsilon(1e-12));          // mean(x^2)
  }

  SUBCASE("enumeration oracle over random instances") {
    Rng rng(555);
    for (int instance = 0; instance < 50; ++instance) {
      const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(5));  // up to 6
      const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng.below(2));  // 2 or 3
      auto model = make_gaussian_mixture(random_column(n, rng), k);
      const NaturalParams params = random_gmm_params(*model, rng);
      const Vec brute = enumerate_posterior_stats(*model, params);
      const Vec fast = expected_stats(*model, params).values();
      CHECK((brute - fast).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("nll") {
  SUBCASE("single gaussian at the mle") {
    const Dataset data = column_data({1.0, 2.0, 4.0, 5.0});
    auto model = make_single_gaussian(data);
    const double mean = data.rows.col(0).mean();
    const double variance =
        (data.rows.col(0).array() - mean).square().sum() / data.n();
    Vec weights(1), means(1), variances(1);
    weights << 1.0;
    means << mean;
    variances << variance;
    const double value = nll(*model, gmm_natural(*model, weights, means, variances));
    CHECK(value ==
          doctest::Approx(0.5 * std::log(2.0 * M_PI * variance) + 0.5).epsilon(1e-12));
  }

  SUBCASE("density-sum oracle and the one-component reduction") {
    Rng rng(99);
    const Dataset data = random_column(12, rng);
    auto mixture_model = make_gaussian_mixture(data, 2);
    Vec weights(2), means(2), variances(2);
    weights << 0.4, 0.6;
    means << -0.5, 1.0;
    variances << 0.7, 2.2;
    const double fast =
        nll(*mixture_model, gmm_natural(*mixture_model, weights, means, variances));
    double direct = 0.0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      double density = 0.0;
      for (int j = 0; j < 2; ++j) {
        density += weights[j] * normal_density(data.rows(i, 0), means[j], variances[j]);
      }
      direct -= std::log(density);
    }
    direct /= static_cast<double>(data.n());
    CHECK(fast == doctest::Approx(direct).epsilon(1e-12));

    auto one = make_gaussian_mixture(data, 1);
    auto single = make_single_gaussian(data);
    Vec w1(1), m1(1), v1(1);
    w1 << 1.0;
    m1 << 0.3;
    v1 << 1.4;
    CHECK(nll(*one, gmm_natural(*one, w1, m1, v1)) ==
          doctest::Approx(nll(*single, gmm_natural(*single, w1, m1, v1))).epsilon(1e-12));
  }
}

TEST_CASE("nll gradient") {
  SUBCASE("matches finite differences") {
    Rng rng(1234);
    auto model = make_gaussian_mixture(random_column(20, rng), 2);
    for (int trial = 0; trial < 5; ++trial) {
      const NaturalParams params = random_gmm_params(*model, rng);
      const Vec analytic = nll_gradient(*model, params);
      const Vec numeric = finite_diff_gradient(
          [&](const Vec& v) {
            return nll(*model, NaturalParams(model->complete_family(), v));
          },
          params.values());
      const double scale = std::max(1.0, analytic.cwiseAbs().maxCoeff());
      CHECK((analytic - numeric).cwiseAbs().maxCoeff() / scale < 1e-5);
    }
  }

  SUBCASE("single gaussian closed form") {
    const Dataset data = column_data({0.5, 1.5, -2.0});
    auto model = make_single_gaussian(data);
    Vec weights(1), means(1), variances(1);
    weights << 1.0;
    means << 0.25;
    variances << 1.8;
    const NaturalParams params = gmm_natural(*model, weights, means, variances);
    const Vec grad = nll_gradient(*model, params);
    const double mean_x = data.rows.col(0).mean();
    const double mean_xx = data.rows.col(0).array().square().mean();
    CHECK(grad[0] == doctest::Approx(0.25 - mean_x).epsilon(1e-12));
    CHECK(grad[1] ==
          doctest::Approx(0.25 * 0.25 + 1.8 - mean_xx).epsilon(1e-12));
  }
}

TEST_CASE("m step") {
  SUBCASE("reproduces the textbook update") {
    Rng rng(77);
    const Dataset data = random_column(15, rng);
    auto model = make_gaussian_mixture(data, 3);
    const NaturalParams params = random_gmm_params(*model, rng);
    const Responsibilities resp = responsibilities(*model, params);

    const Eigen::Index k = 3;
    Vec mass = resp.colwise().sum();
    Vec weights = mass / static_cast<double>(data.n());
    Vec means(k), variances(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      means[j] = (resp.col(j).array() * data.rows.col(0).array()).sum() / mass[j];
      variances[j] =
          (resp.col(j).array() * data.rows.col(0).array().square()).sum() / mass[j] -
          means[j] * means[j];
    }
    const NaturalParams textbook = gmm_natural(*model, weights, means, variances);
    const NaturalParams updated = m_step(*model, expected_stats(*model, params));
    CHECK((textbook.values() - updated.values()).cwiseAbs().maxCoeff() < 1e-9);
  }

  SUBCASE("degenerate statistics raise") {
    auto model = make_gaussian_mixture(column_data({1.0, 1.0, 1.0}), 1);
    // All mass on a single repeated point: implied variance is zero.
    Vec weights(1), means(1), variances(1);
    weights << 1.0;
    means << 0.0;
    variances << 1.0;
    const NaturalParams params = gmm_natural(*model, weights, means, variances);
    CHECK_THROWS_AS(m_step(*model, expected_stats(*model, params)), DomainError);
  }

  SUBCASE("vanished component mass raises") {
    auto model = make_gaussian_mixture(column_data({-1.0, 1.0}), 2);
    Vec stats(model->complete_family()->dim());
    stats << 0.0, 0.0, 0.0, 0.0, 1.0;  // first weight exactly zero
    CHECK_THROWS_AS(
        m_step(*model, MeanParams::unchecked(model->complete_family(), stats)),
        ZeroWeightComponentError);
  }
}

TEST_CASE("surrogate identities") {
  Rng rng(31);
  auto model = make_gaussian_mixture(random_column(10, rng), 2);
  for (int trial = 0; trial < 20; ++trial) {
    const NaturalParams theta = random_gmm_params(*model, rng);
    const NaturalParams phi = random_gmm_params(*model, rng);

    // Q_theta(phi) - Q_theta(theta) = <grad L(theta), phi - theta> + D_A(phi, theta)
    const double lhs = surrogate_value(*model, theta, phi) -
                       surrogate_value(*model, theta, theta);
    const double rhs =
        nll_gradient(*model, theta).dot(phi.values() - theta.values()) +
        bregman_divergence(phi, theta);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));

    // The exact M-step is the surrogate argmin.
    const MeanParams stats = expected_stats(*model, theta);
    const NaturalParams best = m_step(*model, stats);
    CHECK(surrogate_value(*model, theta, best) <=
          surrogate_value(*model, theta, phi) + 1e-12);

    // Q(theta) - Q(argmin) is the dual stationarity divergence.
    const double drop = surrogate_value(*model, theta, theta) -
                        surrogate_value(*model, theta, best);
    const double dual = dual_bregman_divergence(
        MeanParams::unchecked(model->complete_family(), stats.values()),
        mean_map(theta));
    CHECK(drop == doctest::Approx(dual).epsilon(1e-8));
  }
}

TEST_CASE("complete data kl") {
  Rng rng(8);
  auto model = make_gaussian_mixture(random_column(6, rng), 2);

  SUBCASE("identical parameters give zero") {
    const NaturalParams theta = random_gmm_params(*model, rng);
    CHECK(complete_data_kl(*model, theta, theta) == doctest::Approx(0.0).epsilon(1e-14));
  }

  SUBCASE("identical components reduce to the label kl") {
    Vec means(2), variances(2);
    means << 0.5, 0.5;
    variances << 1.3, 1.3;
    Vec wa(2), wb(2);
    wa << 0.3, 0.7;
    wb << 0.6, 0.4;
    const double value =
        complete_data_kl(*model, gmm_natural(*model, wa, means, variances),
                         gmm_natural(*model, wb, means, variances));
    const double label_kl =
        0.3 * std::log(0.3 / 0.6) + 0.7 * std::log(0.7 / 0.4);
    CHECK(value == doctest::Approx(label_kl).epsilon(1e-12));
  }

  SUBCASE("chain rule equals the bregman route") {
    for (int trial = 0; trial < 20; ++trial) {
      const NaturalParams theta = random_gmm_params(*model, rng);
      const NaturalParams phi = random_gmm_params(*model, rng);
      CHECK(complete_data_kl(*model, theta, phi) ==
            doctest::Approx(bregman_divergence(phi, theta)).epsilon(1e-8));
    }
  }
}

TEST_CASE("descent and curvature properties") {
  Rng rng(2024);

  SUBCASE("one em step never increases the nll") {
    for (int trial = 0; trial < 25; ++trial) {
      auto model = make_gaussian_mixture(random_column(12, rng), 2);
      const NaturalParams theta = random_gmm_params(*model, rng);
      const NaturalParams next = m_step(*model, expected_stats(*model, theta));
      CHECK(nll(*model, next) <= nll(*model, theta) + 1e-10);
    }
  }

  SUBCASE("linearization upper bound") {
    auto model = make_gaussian_mixture(random_column(10, rng), 2);
    for (int trial = 0; trial < 100; ++trial) {
      const NaturalParams theta = random_gmm_params(*model, rng);
      const NaturalParams phi = random_gmm_params(*model, rng);
      const double bound = nll(*model, theta) +
                           nll_gradient(*model, theta).dot(phi.values() - theta.values()) +
                           bregman_divergence(phi, theta);
      CHECK(nll(*model, phi) <= bound + 1e-9);
    }
  }

  SUBCASE("latent information is symmetric psd") {
    auto model = make_gaussian_mixture(random_column(30, rng), 2);
    for (int trial = 0; trial < 5; ++trial) {
      const NaturalParams theta = random_gmm_params(*model, rng);
      const Mat nll_hess = finite_diff_hessian(
          [&](const Vec& v) {
            return nll(*model, NaturalParams(model->complete_family(), v));
          },
          theta.values());
      const Mat latent = fisher_information(theta) - nll_hess;
      CHECK((latent - latent.transpose()).cwiseAbs().maxCoeff() < 1e-5);
      Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (latent + latent.transpose()));
      CHECK(eig.eigenvalues().minCoeff() > -1e-4);
    }
  }
}

TEST_CASE("laplace mixture") {
  SUBCASE("hard assignment recovers median and mad") {
    auto model = make_laplace_mixture(column_data({1.0, 2.0, 10.0, 3.0, 12.0}), 2);
    Responsibilities resp = Mat::Zero(5, 2);
    resp(0, 0) = resp(1, 0) = resp(3, 0) = 1.0;  // {1, 2, 3}
    resp(2, 1) = resp(4, 1) = 1.0;               // {10, 12}
    const LaplaceParams fit = laplace_m_step(*model, resp);
    CHECK(fit.locations[0] == 2.0);  // median of {1,2,3}
    CHECK(fit.scales[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(fit.locations[1] == 10.0);  // lower median of {10,12}
    CHECK(fit.scales[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.weights[0] == doctest::Approx(0.6).epsilon(1e-12));
  }

  SUBCASE("m step does not increase the weighted complete nll") {
    Rng rng(404);
    const SyntheticSpec spec{"gmm", 2, 1, 60, 6.0, 11};
    auto model = make_laplace_mixture(generate_synthetic(spec).data, 2);
    LaplaceParams params = initialize_laplace(*model, rng);
    for (int t = 0; t < 10; ++t) {
      const Responsibilities resp = model->responsibilities(params);
      const LaplaceParams next = laplace_m_step(*model, resp);
      CHECK(model->nll(next) <= model->nll(params) + 1e-10);
      params = next;
    }
  }

  SUBCASE("zero column raises") {
    auto model = make_laplace_mixture(column_data({1.0, 2.0}), 2);
    Responsibilities resp = Mat::Zero(2, 2);
    resp(0, 0) = resp(1, 0) = 1.0;
    CHECK_THROWS_AS(laplace_m_step(*model, resp), ZeroWeightComponentError);
  }

  SUBCASE("exponential family surface is unsupported") {
    auto model = make_laplace_mixture(column_data({1.0, 2.0}), 2);
    CHECK_THROWS_AS(model->complete_family(), UnsupportedError);
  }
}

TEST_CASE("bernoulli mixture basics") {
  Mat rows(4, 3);
  rows << 1, 0, 1, 0, 0, 1, 1, 1, 0, 0, 1, 0;
  auto model = make_bernoulli_mixture(make_dataset(rows, {"a", "b", "c"}), 2);
  CHECK(model->components() == 2);
  CHECK(model->complete_family()->dim() == 1 + 2 * 3);

  Mat bad = rows;
  bad(0, 0) = 0.5;
  CHECK_THROWS_AS(make_bernoulli_mixture(make_dataset(bad, {"a", "b", "c"}), 2),
                  ConfigError);
}

TEST_CASE("initialization is seeded and in-domain") {
  Rng rng_a(5), rng_b(5), rng_c(6);
  const SyntheticSpec spec{"gmm", 2, 2, 40, 3.0, 21};
  const Dataset data = generate_synthetic(spec).data;
  auto model = make_gaussian_mixture(data, 2);

  const NaturalParams a = initialize(*model, InitMethod::kKmeans, rng_a);
  const NaturalParams b = initialize(*model, InitMethod::kKmeans, rng_b);
  const NaturalParams c = initialize(*model, InitMethod::kRandomRows, rng_c);
  CHECK((a.values() - b.values()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(model->complete_family()->in_natural_domain(a.values()));
  CHECK(model->complete_family()->in_natural_domain(c.values()));
  CHECK(std::isfinite(nll(*model, a)));
  CHECK(std::isfinite(nll(*model, c)));
}
