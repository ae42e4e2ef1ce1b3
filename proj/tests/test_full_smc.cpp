#include <map>

#include <boost/math/distributions/chi_squared.hpp>

#include "doctest.h"

#include "sasmc/estimation.hpp"
#include "sasmc/full_smc.hpp"
#include "test_support.hpp"

using namespace sasmc;

namespace {

std::vector<double> full_number_posterior(const FullSmcResult& res, std::size_t d_max) {
  std::vector<double> p(d_max + 1, 0.0);
  for (const auto& fp : res.particles) p[fp.state.locations.size()] += std::exp(fp.log_weight);
  return p;
}

}  // namespace

TEST_CASE("full likelihood matches a direct Gaussian evaluation") {
  Rng rng(4);
  const Eigen::MatrixXd blocks = testing::random_matrix(4, 9, rng);
  const auto model = testing::model_from_matrix(blocks, 1.5, 0.3);
  const Eigen::VectorXd y = testing::random_matrix(4, 1, rng);
  const FullLikelihood lik(model, y);
  const std::vector<GridIndex> locations{2, 0};
  const Eigen::VectorXd q = testing::random_matrix(6, 1, rng);
  const Eigen::MatrixXd g = assemble_lead_field(*model.forward, locations);
  const double expected = -2.0 * std::log(2.0 * std::numbers::pi * 0.09) - 0.5 * (y - g * q).squaredNorm() / 0.09;
  CHECK(lik(locations, q) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(lik(std::vector<GridIndex>{}, Eigen::VectorXd()) ==
        doctest::Approx(-2.0 * std::log(2.0 * std::numbers::pi * 0.09) - 0.5 * y.squaredNorm() / 0.09));
  CHECK(log_moment_prior(Eigen::VectorXd::Zero(3), 1.0) == doctest::Approx(-1.5 * std::log(2.0 * std::numbers::pi)));
}

TEST_CASE("moment random walk leaves the conditional Gaussian invariant") {
  // One dipole, two sensors: the exact conditional of q given y is Gaussian.
  Rng rng(11);
  const Eigen::MatrixXd blocks = testing::random_matrix(2, 3, rng);
  const auto model = testing::model_from_matrix(blocks, 1.0, 0.5, 0.25, 1);
  const Eigen::VectorXd y = Eigen::Vector2d(0.7, -0.4);
  const FullLikelihood lik(model, y);
  const auto oracle = testing::brute_conditional(blocks, 1.0, 0.5, y);
  const Eigen::LLT<Eigen::MatrixXd> chol(oracle.covariance);

  FullState state;
  state.locations = {0};
  state.moments = Eigen::VectorXd::Zero(3);
  state.log_lik = lik(state.locations, state.moments);
  Rng chain(99);
  const int burn = 2000, thin = 10, samples = 5000, bins = 10;
  for (int i = 0; i < burn; ++i) moment_random_walk(state, lik, 1.0, 0.8, chain);

  const boost::math::chi_squared chi3(3.0);
  std::vector<int> counts(bins, 0);
  for (int s = 0; s < samples; ++s) {
    for (int i = 0; i < thin; ++i) moment_random_walk(state, lik, 1.0, 0.8, chain);
    REQUIRE(state.log_lik == doctest::Approx(lik(state.locations, state.moments)).epsilon(1e-12));
    const Eigen::VectorXd z = chol.matrixL().solve(state.moments - oracle.mean);
    const double u = boost::math::cdf(chi3, z.squaredNorm());
    ++counts[std::min(bins - 1, static_cast<int>(u * bins))];
  }
  double stat = 0.0;
  const double expected = static_cast<double>(samples) / bins;
  for (int c : counts) stat += (c - expected) * (c - expected) / expected;
  const double p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(bins - 1), stat));
  CHECK(p_value > 0.01);
}

TEST_CASE("full sampler on zero-signal data favours the empty configuration") {
  auto p = testing::make_tiny_problem();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(p.y.rows());
  const FullLikelihood lik(p.model, zero);
  const MoveNeighborhoods nb(p.geometry.grid, KernelSettings{});
  int empty_mode = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SmcSettings s;
    s.particle_count = 200;
    s.master_seed = seed;
    const auto res = run_full(lik, nb, KernelSettings{}, s);
    empty_mode += mode_count(full_number_posterior(res, p.model.d_max)) == 0;
  }
  CHECK(empty_mode >= 95);
}

TEST_CASE("full sampler agrees with enumeration") {
  auto p = testing::make_tiny_problem();
  const Eigen::MatrixXd y = p.y.col(0);
  const auto exact = testing::enumerate_posterior(p.model, y);
  const FullLikelihood lik(p.model, y.col(0));
  const MoveNeighborhoods nb(p.geometry.grid, KernelSettings{});
  SmcSettings s;
  s.particle_count = 4000;
  s.master_seed = 5;
  const auto res = run_full(lik, nb, KernelSettings{}, s);

  double total = 0.0;
  for (const auto& fp : res.particles) total += std::exp(fp.log_weight);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(res.alpha == 1.0);

  std::vector<double> exact_d(3, 0.0);
  for (const auto& [r, prob] : exact) exact_d[r.size()] += prob;
  CHECK(testing::total_variation(exact_d, full_number_posterior(res, 2)) < 0.1);

  const auto dense = dense_intensity(res.particles, p.model.grid_size());
  std::vector<double> exact_intensity(p.model.grid_size(), 0.0);
  for (const auto& [r, prob] : exact) {
    for (GridIndex c : r) exact_intensity[static_cast<std::size_t>(c)] += prob;
  }
  double worst = 0.0;
  for (std::size_t c = 0; c < dense.size(); ++c) worst = std::max(worst, std::abs(dense[c] - exact_intensity[c]));
  CHECK(worst < 0.1);
}

TEST_CASE("intensity standard deviation comparison") {
  SUBCASE("a single run gives zero spread") {
    const auto r = compare_intensity_std({{0.5, 0.1}}, {{0.2, 0.3}});
    CHECK(r.std_full == std::vector<double>{0.0, 0.0});
    CHECK(r.std_semi == std::vector<double>{0.0, 0.0});
    CHECK(r.above_threshold.empty());
    CHECK(r.passes);
  }
  SUBCASE("sample standard deviation and fraction") {
    const std::vector<std::vector<double>> full{{0.0, 0.5, 0.2}, {1.0, 0.5, 0.2}, {0.5, 0.5, 0.2}};
    const std::vector<std::vector<double>> semi{{0.4, 0.0, 0.2}, {0.6, 0.3, 0.2}, {0.5, 0.6, 0.2}};
    const auto r = compare_intensity_std(full, semi);
    CHECK(r.std_full[0] == doctest::Approx(0.5));
    CHECK(r.std_semi[0] == doctest::Approx(0.1));
    CHECK(r.std_semi[1] == doctest::Approx(0.3));
    CHECK(r.above_threshold == std::vector<GridIndex>{0, 1});
    CHECK(r.fraction_semi_not_worse == doctest::Approx(0.5));
    CHECK_FALSE(r.passes);
  }
  SUBCASE("run order does not matter") {
    Rng rng(3);
    std::vector<std::vector<double>> full, semi;
    for (int l = 0; l < 6; ++l) {
      full.push_back({uniform01(rng), uniform01(rng), uniform01(rng)});
      semi.push_back({uniform01(rng), uniform01(rng), uniform01(rng)});
    }
    const auto a = compare_intensity_std(full, semi);
    std::reverse(full.begin(), full.end());
    std::rotate(semi.begin(), semi.begin() + 2, semi.end());
    const auto b = compare_intensity_std(full, semi);
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(a.std_full[c] == doctest::Approx(b.std_full[c]));
      CHECK(a.std_semi[c] == doctest::Approx(b.std_semi[c]));
    }
    CHECK(a.fraction_semi_not_worse == b.fraction_semi_not_worse);
  }
}
