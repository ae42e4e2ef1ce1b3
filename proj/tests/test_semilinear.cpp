#include "doctest.h"

#include <numbers>

#include "sasmc/errors.hpp"
#include "sasmc/semilinear.hpp"
#include "test_support.hpp"

using namespace sasmc;
using testing::dense_log_marginal;
using testing::model_from_matrix;
using testing::random_matrix;

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

struct Instance {
  SemiLinearModel model;
  DipoleConfig r;
  Eigen::MatrixXd y;
};

// Lead field over four grid points with N_s in [2, 8]; r has 0..2 dipoles; N_t in [1, 3].
Instance random_instance(Rng& rng) {
  std::uniform_int_distribution<int> ns_dist(2, 8), d_dist(0, 2), nt_dist(1, 3);
  std::uniform_real_distribution<double> scale(0.3, 2.0);
  const int ns = ns_dist(rng);
  Instance in;
  in.model = model_from_matrix(random_matrix(ns, 12, rng), scale(rng), scale(rng), 0.25, 2);
  std::vector<GridIndex> all{0, 1, 2, 3};
  std::shuffle(all.begin(), all.end(), rng);
  in.r = DipoleConfig(std::vector<GridIndex>(all.begin(), all.begin() + d_dist(rng)));
  in.y = random_matrix(ns, nt_dist(rng), rng, -2.0, 2.0);
  return in;
}

}  // namespace

TEST_CASE("empty configurations reduce to white noise densities") {
  Rng rng(1);
  auto m1 = model_from_matrix(random_matrix(1, 3, rng), 1.0, 1.0, 0.25, 1);
  CHECK(log_marginal_likelihood_single(m1, {}, Eigen::VectorXd::Zero(1)) ==
        doctest::Approx(-0.918938533204673).epsilon(1e-14));
  auto m2 = model_from_matrix(random_matrix(2, 3, rng), 1.0, 2.0, 0.25, 1);
  CHECK(log_marginal_likelihood_single(m2, {}, Eigen::VectorXd::Zero(2)) ==
        doctest::Approx(-kLog2Pi - 2.0 * std::log(2.0)).epsilon(1e-14));
  CHECK(-kLog2Pi - 2.0 * std::log(2.0) == doctest::Approx(-3.224171).epsilon(1e-6));
}

TEST_CASE("marginal likelihood matches the stacked joint Gaussian") {
  Rng rng(2024);
  for (int i = 0; i < 200; ++i) {
    const Instance in = random_instance(rng);
    const double expected = dense_log_marginal(assemble_lead_field(*in.model.forward, in.r), in.model.sigma_q,
                                               in.model.sigma_e, in.y);
    const double got = log_marginal_likelihood(in.model, in.r, in.y);
    CHECK(got == doctest::Approx(expected).epsilon(1e-9));
    const MarginalLikelihood cached(in.model, in.y);
    CHECK(cached(in.r) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("cached evaluator handles more time points than sensors") {
  Rng rng(7);
  const auto model = model_from_matrix(random_matrix(3, 15, rng), 0.8, 0.6, 0.25, 3);
  const Eigen::MatrixXd y = random_matrix(3, 11, rng);
  const MarginalLikelihood cached(model, y);
  for (const DipoleConfig& r : {DipoleConfig{}, DipoleConfig{1}, DipoleConfig{0, 4}, DipoleConfig{1, 2, 3}}) {
    const double expected = dense_log_marginal(assemble_lead_field(*model.forward, r), 0.8, 0.6, y);
    CHECK(cached(r) == doctest::Approx(expected).epsilon(1e-10));
    CHECK(log_marginal_likelihood(model, r, y) == doctest::Approx(expected).epsilon(1e-10));
  }
  // Index order does not matter.
  const std::vector<GridIndex> reversed{3, 0};
  CHECK(cached.evaluate(reversed) == doctest::Approx(cached(DipoleConfig{0, 3})).epsilon(1e-13));
}

TEST_CASE("time-series factorization") {
  Rng rng(3);
  const auto model = model_from_matrix(random_matrix(5, 9, rng), 1.0, 0.7, 0.25, 3);
  const DipoleConfig r{0, 2};
  const Eigen::MatrixXd y = random_matrix(5, 5, rng);

  double per_column = 0.0;
  for (Eigen::Index t = 0; t < y.cols(); ++t) per_column += log_marginal_likelihood_single(model, r, y.col(t));
  CHECK(std::abs(log_marginal_likelihood(model, r, y) - per_column) < 1e-9);

  CHECK(log_marginal_likelihood(model, r, y.col(2)) ==
        doctest::Approx(log_marginal_likelihood_single(model, r, y.col(2))).epsilon(1e-14));

  Eigen::MatrixXd same(5, 3);
  same << y.col(1), y.col(1), y.col(1);
  CHECK(log_marginal_likelihood(model, r, same) ==
        doctest::Approx(3.0 * log_marginal_likelihood_single(model, r, y.col(1))).epsilon(1e-12));

  Eigen::MatrixXd permuted(5, 5);
  permuted << y.col(4), y.col(0), y.col(3), y.col(1), y.col(2);
  CHECK(log_marginal_likelihood(model, r, permuted) ==
        doctest::Approx(log_marginal_likelihood(model, r, y)).epsilon(1e-12));
}

TEST_CASE("marginal likelihood matches Monte Carlo integration over the moments") {
  Rng rng(99);
  const Eigen::MatrixXd g = random_matrix(4, 3, rng);
  const auto model = model_from_matrix(g, 1.0, 0.5, 0.25, 1);
  const Eigen::MatrixXd y = random_matrix(4, 1, rng);
  const double exact = log_marginal_likelihood(model, DipoleConfig{0}, y);
  const auto mc = testing::mc_log_marginal(g, 1.0, 0.5, y, 1'000'000, rng);
  CHECK(std::abs(mc.log_mean - exact) < 3.0 * mc.log_se);
}

TEST_CASE("single-sensor density integrates to one") {
  Rng rng(5);
  const auto model = model_from_matrix(random_matrix(1, 3, rng), 1.3, 0.4, 0.25, 1);
  const double sd = std::sqrt(1.69 * model.forward->matrix().squaredNorm() + 0.16);
  const int n = 200001;
  const double lo = -12.0 * sd, h = 24.0 * sd / (n - 1);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    total += w * std::exp(log_marginal_likelihood_single(model, DipoleConfig{0}, Eigen::VectorXd::Constant(1, lo + i * h)));
  }
  CHECK(std::abs(total * h - 1.0) < 1e-6);
}

TEST_CASE("conditional moment posterior matches brute-force joint conditioning") {
  Rng rng(77);
  for (int i = 0; i < 100; ++i) {
    Instance in = random_instance(rng);
    if (in.r.empty()) continue;
    const Eigen::MatrixXd g = assemble_lead_field(*in.model.forward, in.r);
    const MomentPosterior post = conditional_moment_posterior(in.model, in.r, in.y);
    const auto brute = testing::brute_conditional(g, in.model.sigma_q, in.model.sigma_e, in.y);
    const Eigen::Index m = g.cols();
    REQUIRE(post.means.size() == static_cast<std::size_t>(in.y.cols()));
    for (Eigen::Index t = 0; t < in.y.cols(); ++t) {
      CHECK(testing::max_relative_error(post.means[static_cast<std::size_t>(t)], brute.mean.segment(t * m, m)) < 1e-10);
      CHECK(testing::max_relative_error(post.covariance, brute.covariance.block(t * m, t * m, m, m)) < 1e-10);
    }
    // Posterior contracts the prior and stays symmetric.
    CHECK((post.covariance - post.covariance.transpose()).cwiseAbs().maxCoeff() <=
          1e-10 * post.covariance.cwiseAbs().maxCoeff());
    const Eigen::MatrixXd shrink =
        in.model.sigma_q * in.model.sigma_q * Eigen::MatrixXd::Identity(m, m) - post.covariance;
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(shrink).eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("conditional posterior limits") {
  Rng rng(8);
  const Eigen::MatrixXd g = random_matrix(4, 6, rng);
  const DipoleConfig r{0, 1};

  const auto model = model_from_matrix(g, 1.0, 0.5, 0.25, 2);
  const MomentPosterior zero = conditional_moment_posterior(model, r, Eigen::MatrixXd::Zero(4, 2));
  const MomentPosterior other = conditional_moment_posterior(model, r, random_matrix(4, 2, rng));
  for (const auto& m : zero.means) CHECK(m.cwiseAbs().maxCoeff() == 0.0);
  CHECK(zero.covariance.isApprox(other.covariance, 1e-14));

  const auto tight = model_from_matrix(g, 1e-6, 0.5, 0.25, 2);
  const MomentPosterior prior_like = conditional_moment_posterior(tight, r, random_matrix(4, 2, rng));
  CHECK(testing::max_relative_error(prior_like.covariance, 1e-12 * Eigen::MatrixXd::Identity(6, 6)) < 1e-8);
  for (const auto& m : prior_like.means) CHECK(m.cwiseAbs().maxCoeff() < 1e-8);

  CHECK_THROWS_AS(conditional_moment_posterior(model, DipoleConfig{}, Eigen::MatrixXd::Zero(4, 1)), DomainError);
}

TEST_CASE("general-mean Gaussian formulas match brute force") {
  Rng rng(12);
  const Eigen::MatrixXd g = random_matrix(4, 3, rng);
  const Eigen::VectorXd q0 = random_matrix(3, 1, rng);
  const Eigen::VectorXd e0 = random_matrix(4, 1, rng);
  const Eigen::MatrixXd a = random_matrix(3, 3, rng);
  const Eigen::MatrixXd q_cov = a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(3, 3);
  const Eigen::MatrixXd e_cov = 0.3 * Eigen::MatrixXd::Identity(4, 4);
  const Eigen::VectorXd y = random_matrix(4, 1, rng);

  // Joint covariance of (q, y) and the textbook conditioning formula.
  Eigen::MatrixXd joint(7, 7);
  joint << q_cov, q_cov * g.transpose(), g * q_cov, g * q_cov * g.transpose() + e_cov;
  const Eigen::MatrixXd syy_inv = joint.bottomRightCorner(4, 4).inverse();
  const Eigen::VectorXd mean = q0 + joint.topRightCorner(3, 4) * syy_inv * (y - g * q0 - e0);
  const Eigen::MatrixXd cov =
      q_cov - joint.topRightCorner(3, 4) * syy_inv * joint.bottomLeftCorner(4, 3);

  const auto marginal = linear_gaussian_marginal(g, q0, q_cov, e0, e_cov);
  CHECK(marginal.mean.isApprox(g * q0 + e0));
  CHECK(marginal.covariance.isApprox(joint.bottomRightCorner(4, 4)));
  const auto cond = linear_gaussian_conditional(g, q0, q_cov, e0, e_cov, y);
  CHECK(testing::max_relative_error(cond.mean, mean) < 1e-10);
  CHECK(testing::max_relative_error(cond.covariance, cov) < 1e-10);
}

TEST_CASE("adding a dipole never decreases logdet Gamma") {
  // At y = 0 the log marginal likelihood is -logdet/2 plus a constant.
  Rng rng(31);
  const auto model = model_from_matrix(random_matrix(6, 18, rng), 1.0, 0.3, 0.25, 6);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(6, 1);
  DipoleConfig r;
  double previous = log_marginal_likelihood(model, r, zero);
  for (GridIndex c : {4, 1, 5, 0}) {
    r = r.with(c);
    const double next = log_marginal_likelihood(model, r, zero);
    CHECK(next <= previous);
    previous = next;
  }
}

TEST_CASE("prior over configurations") {
  Rng rng(4);
  auto model = model_from_matrix(random_matrix(3, 60, rng), 1.0, 1.0, 0.25, 10);
  CHECK(log_prior(model, {}) == doctest::Approx(-0.24999999999999528).epsilon(1e-14));
  CHECK(log_prior(model, DipoleConfig{1, 7}) == doctest::Approx(log_prior(model, DipoleConfig{3, 19})).epsilon(1e-15));

  // Direct series: Poisson(2)/Z / C(20, 2).
  double z = 0.0;
  for (int k = 0; k <= 10; ++k) z += std::exp(-0.25) * std::pow(0.25, k) / std::tgamma(k + 1.0);
  const double expected = std::log(std::exp(-0.25) * 0.0625 / 2.0 / z) - std::log(190.0);
  CHECK(log_prior(model, DipoleConfig{0, 5}) == doctest::Approx(expected).epsilon(1e-13));

  model.d_max = 1;
  CHECK_THROWS(log_prior(model, DipoleConfig{0, 5}));

  const auto pmf = truncated_poisson_pmf(0.25, 10);
  double total = 0.0;
  for (double p : pmf) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("tempered diagnostic branches") {
  const auto p = testing::make_tiny_problem();
  const SemiLinearModel& model = p.model;
  const auto configs = testing::all_configs(model.grid_size(), model.d_max);

  SUBCASE("both branches agree up to a constant at alpha = 1") {
    const auto first = tempered_diagnostic(model, configs.front(), p.y, 1.0);
    const double offset = first.marginal_of_tempered - first.tempered_marginal;
    for (const auto& r : configs) {
      const auto v = tempered_diagnostic(model, r, p.y, 1.0);
      CHECK(v.marginal_of_tempered - v.tempered_marginal == doctest::Approx(offset).epsilon(1e-12));
      CHECK(v.tempered_marginal ==
            doctest::Approx(log_prior(model, r) + log_marginal_likelihood(model, r, p.y)).epsilon(1e-12));
    }
  }

  SUBCASE("empty configuration at alpha = 1/2 is white noise with doubled variance") {
    const auto v = tempered_diagnostic(model, {}, p.y, 0.5);
    const double s2 = 2.0 * model.sigma_e * model.sigma_e;
    const double n = static_cast<double>(p.y.size());
    const double expected = log_prior(model, {}) - 0.5 * n * std::log(2.0 * std::numbers::pi * s2) -
                            0.5 * p.y.squaredNorm() / s2;
    CHECK(v.marginal_of_tempered == doctest::Approx(expected).epsilon(1e-12));
  }

  SUBCASE("alpha = 0") {
    CHECK_THROWS_AS(tempered_diagnostic(model, {}, p.y, 0.0), DomainError);
    const double n = static_cast<double>(p.y.size());
    for (const auto& r : {configs[0], configs[3], configs[20]}) {
      CHECK(tempered_marginal_log_density(model, r, p.y, 0.0) ==
            doctest::Approx(log_prior(model, r) - 0.5 * n * kLog2Pi).epsilon(1e-12));
    }
  }
}

TEST_CASE("model validation") {
  Rng rng(1);
  auto m = model_from_matrix(random_matrix(3, 6, rng), 1.0, 1.0, 0.25, 2);
  CHECK_NOTHROW(m.validate());
  m.sigma_e = 0.0;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m.sigma_e = 1.0;
  m.d_max = 3;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m.d_max = 2;
  CHECK_THROWS(log_marginal_likelihood(m, {}, Eigen::MatrixXd::Zero(4, 1)));
}
