#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "sasmc/dipole_config.hpp"
#include "sasmc/forward.hpp"

namespace sasmc {

// N_s x N_t sensor recordings, one column per time point.
using TimeSeriesData = Eigen::MatrixXd;

/// Gaussian semi-linear model y_t = G(r) q_t + e_t with
/// q_t ~ N(0, sigma_q^2 I), e_t ~ N(0, sigma_e^2 I), independent over time,
/// and a truncated Poisson prior on the dipole count.
struct SemiLinearModel {
  double sigma_q = 1.0;
  double sigma_e = 1.0;
  double poisson_lambda = 0.25;
  std::size_t d_max = 10;
  std::shared_ptr<const LeadField> forward;

  Eigen::Index sensor_count() const { return forward->sensor_count(); }
  std::size_t grid_size() const { return forward->grid_size(); }

  // Throws ConfigError if a parameter is out of range.
  void validate() const;
};

// Per-time Gaussian conditional posterior of the moments. The covariance is
// shared by every time point because the prior and noise are stationary.
struct MomentPosterior {
  std::vector<Eigen::VectorXd> means;  // N_t vectors of length 3d
  Eigen::MatrixXd covariance;          // 3d x 3d
};

// log N(y_t; 0, Gamma(r)) including the -(N_s/2) log(2 pi) constant.
double log_marginal_likelihood_single(const SemiLinearModel& model, const DipoleConfig& r,
                                      const Eigen::VectorXd& y_t);

// Sum over time points of the single-column value. Gamma(r) is factorized
// once per call, whatever N_t.
double log_marginal_likelihood(const SemiLinearModel& model, const DipoleConfig& r,
                               const TimeSeriesData& y);

// Requires r non-empty.
MomentPosterior conditional_moment_posterior(const SemiLinearModel& model, const DipoleConfig& r,
                                             const TimeSeriesData& y);

// log of the truncated-Poisson count prior times the uniform prior over
// unordered sets of distinct grid points.
double log_prior(const SemiLinearModel& model, const DipoleConfig& r);

// Truncated Poisson pmf over 0..d_max, normalized.
std::vector<double> truncated_poisson_pmf(double lambda, std::size_t d_max);

/// Unnormalized log-densities over r of the two tempered families.
///
/// `marginal_of_tempered`: the r-marginal of prior x likelihood^alpha over
/// (r, q); equals log pi(r) + sum_t log N(y_t; 0, s_q^2 G G^T + s_e^2/alpha I).
///
/// `tempered_marginal`: prior x (marginal likelihood)^alpha, written as
/// log pi(r) + N_t (1 - alpha)/2 logdet Gamma + sum_t log N(y_t; 0, Gamma/alpha)
/// with the alpha^{N_s N_t / 2} normalizer factor dropped, so alpha = 0 is
/// finite. It differs from log pi(r) + alpha log pi(y|r) by an r-independent
/// constant.
struct TemperedDiagnostic {
  double marginal_of_tempered;
  double tempered_marginal;
};

// Throws DomainError for alpha outside [0, 1] or alpha == 0 (the first
// branch has no alpha -> 0 limit).
TemperedDiagnostic tempered_diagnostic(const SemiLinearModel& model, const DipoleConfig& r,
                                       const TimeSeriesData& y, double alpha);
// The second branch alone; defined on the closed interval [0, 1].
double tempered_marginal_log_density(const SemiLinearModel& model, const DipoleConfig& r,
                                     const TimeSeriesData& y, double alpha);

/// General-mean linear Gaussian formulas: for y = G q + e with
/// q ~ N(q0, Gamma_q) and e ~ N(e0, Gamma_e).
struct GaussianMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};
GaussianMoments linear_gaussian_marginal(const Eigen::MatrixXd& g, const Eigen::VectorXd& q_mean,
                                         const Eigen::MatrixXd& q_cov, const Eigen::VectorXd& e_mean,
                                         const Eigen::MatrixXd& e_cov);
GaussianMoments linear_gaussian_conditional(const Eigen::MatrixXd& g, const Eigen::VectorXd& q_mean,
                                            const Eigen::MatrixXd& q_cov,
                                            const Eigen::VectorXd& e_mean,
                                            const Eigen::MatrixXd& e_cov, const Eigen::VectorXd& y);

/// Marginal likelihood bound to one dataset, with the data projected onto
/// every grid block up front. Each evaluation then costs O(N_s d^2 + d^3),
/// independent of N_t. Read-only after construction; safe to share across
/// threads.
class MarginalLikelihood {
public:
  MarginalLikelihood(SemiLinearModel model, const TimeSeriesData& y);

  double operator()(const DipoleConfig& r) const { return evaluate(r.indices()); }
  double evaluate(std::span<const GridIndex> indices) const;

  const SemiLinearModel& model() const noexcept { return model_; }
  Eigen::Index time_count() const noexcept { return data_.cols(); }
  const TimeSeriesData& data() const noexcept { return data_; }

private:
  SemiLinearModel model_;
  TimeSeriesData data_;
  double data_energy_;       // ||Y||_F^2
  Eigen::MatrixXd projected_;  // 3 N_C x k, G_all^T W with W W^T = Y Y^T
};

}  // namespace sasmc
