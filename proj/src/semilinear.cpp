#include "sasmc/semilinear.hpp"

#include <cmath>
#include <numbers>

#include "sasmc/errors.hpp"

namespace sasmc {
namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

// Cholesky factor of the capacitance matrix C = I + kappa G^T G, which
// carries all the r-dependence of Gamma(r) = sigma_e^2 (I + kappa G G^T):
//   logdet Gamma = N_s log sigma_e^2 + logdet C
//   Gamma^{-1}   = (I - kappa G C^{-1} G^T) / sigma_e^2
struct CapacitanceFactor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double logdet_gamma = 0.0;
};

CapacitanceFactor factor_capacitance(const Eigen::MatrixXd& gram, double kappa, double sigma_e2,
                                     Eigen::Index sensor_count) {
  Eigen::MatrixXd capacitance = kappa * gram;
  capacitance.diagonal().array() += 1.0;
  CapacitanceFactor f;
  f.llt.compute(capacitance);
  if (f.llt.info() != Eigen::Success) {
    throw NumericalError("marginal likelihood: capacitance factorization failed");
  }
  const auto diag = f.llt.matrixLLT().diagonal();
  if ((diag.array() < 1e-12).any()) {
    throw NumericalError("marginal likelihood: ill-conditioned factor");
  }
  f.logdet_gamma = static_cast<double>(sensor_count) * std::log(sigma_e2) +
                   2.0 * diag.array().log().sum();
  return f;
}

struct GaussianTerms {
  double logdet_gamma;  // logdet Gamma(r)
  double quadratic;     // sum_t y_t^T Gamma^{-1} y_t
};

// Both terms of the zero-mean Gaussian log-density for covariance
// sigma_q^2 G G^T + sigma_e^2 I, from one factorization.
GaussianTerms gaussian_terms(const Eigen::MatrixXd& g, double sigma_q, double sigma_e,
                             const TimeSeriesData& y) {
  const double sigma_e2 = sigma_e * sigma_e;
  const double energy = y.squaredNorm();
  if (g.cols() == 0) {
    return {static_cast<double>(g.rows()) * std::log(sigma_e2), energy / sigma_e2};
  }
  const double kappa = (sigma_q * sigma_q) / sigma_e2;
  const CapacitanceFactor f = factor_capacitance(g.transpose() * g, kappa, sigma_e2, g.rows());
  const Eigen::MatrixXd whitened = f.llt.matrixL().solve(g.transpose() * y);
  return {f.logdet_gamma, (energy - kappa * whitened.squaredNorm()) / sigma_e2};
}

double log_gaussian(const GaussianTerms& t, Eigen::Index sensor_count, Eigen::Index time_count) {
  const double n = static_cast<double>(sensor_count * time_count);
  return -0.5 * static_cast<double>(time_count) * t.logdet_gamma - 0.5 * t.quadratic -
         0.5 * n * kLog2Pi;
}

void check_data(const SemiLinearModel& model, const TimeSeriesData& y) {
  if (y.rows() != model.sensor_count()) {
    throw std::invalid_argument("data row count does not match the sensor count");
  }
  if (!y.allFinite()) throw std::invalid_argument("data contains non-finite values");
}

}  // namespace

void SemiLinearModel::validate() const {
  if (!(sigma_q > 0.0)) throw ConfigError("sigma_q must be positive");
  if (!(sigma_e > 0.0)) throw ConfigError("sigma_e must be positive");
  if (!(poisson_lambda > 0.0)) throw ConfigError("poisson_lambda must be positive");
  if (!forward) throw ConfigError("model has no lead field");
  if (d_max < 1 || d_max > grid_size()) throw ConfigError("d_max must lie in [1, grid size]");
}

double log_marginal_likelihood_single(const SemiLinearModel& model, const DipoleConfig& r,
                                      const Eigen::VectorXd& y_t) {
  return log_marginal_likelihood(model, r, TimeSeriesData(y_t));
}

double log_marginal_likelihood(const SemiLinearModel& model, const DipoleConfig& r,
                               const TimeSeriesData& y) {
  check_data(model, y);
  const Eigen::MatrixXd g = assemble_lead_field(*model.forward, r);
  return log_gaussian(gaussian_terms(g, model.sigma_q, model.sigma_e, y), y.rows(), y.cols());
}

MomentPosterior conditional_moment_posterior(const SemiLinearModel& model, const DipoleConfig& r,
                                             const TimeSeriesData& y) {
  if (r.empty()) throw DomainError("conditional_moment_posterior: configuration has no dipoles");
  check_data(model, y);
  const Eigen::MatrixXd g = assemble_lead_field(*model.forward, r);
  const double sigma_q2 = model.sigma_q * model.sigma_q;
  const double sigma_e2 = model.sigma_e * model.sigma_e;
  const double kappa = sigma_q2 / sigma_e2;
  const CapacitanceFactor f = factor_capacitance(g.transpose() * g, kappa, sigma_e2, g.rows());

  // sigma_q^2 G^T Gamma^{-1} = kappa C^{-1} G^T and
  // sigma_q^2 I - sigma_q^4 G^T Gamma^{-1} G = sigma_q^2 C^{-1}.
  const Eigen::MatrixXd mean_matrix = kappa * f.llt.solve(g.transpose() * y);
  MomentPosterior post;
  post.means.reserve(static_cast<std::size_t>(y.cols()));
  for (Eigen::Index t = 0; t < y.cols(); ++t) post.means.emplace_back(mean_matrix.col(t));
  const auto identity = Eigen::MatrixXd::Identity(g.cols(), g.cols());
  Eigen::MatrixXd cov = sigma_q2 * f.llt.solve(identity);
  post.covariance = 0.5 * (cov + cov.transpose());
  return post;
}

std::vector<double> truncated_poisson_pmf(double lambda, std::size_t d_max) {
  std::vector<double> pmf(d_max + 1);
  double total = 0.0;
  for (std::size_t k = 0; k <= d_max; ++k) {
    const double kd = static_cast<double>(k);
    pmf[k] = std::exp(-lambda + kd * std::log(lambda) - std::lgamma(kd + 1.0));
    total += pmf[k];
  }
  for (double& p : pmf) p /= total;
  return pmf;
}

double log_prior(const SemiLinearModel& model, const DipoleConfig& r) {
  const std::size_t d = r.size();
  if (d > model.d_max) throw std::invalid_argument("log_prior: dipole count exceeds d_max");
  const double lambda = model.poisson_lambda;
  double log_norm = 0.0;  // log sum_{k <= d_max} Poisson(k)
  {
    double total = 0.0;
    for (std::size_t k = 0; k <= model.d_max; ++k) {
      const double kd = static_cast<double>(k);
      total += std::exp(-lambda + kd * std::log(lambda) - std::lgamma(kd + 1.0));
    }
    log_norm = std::log(total);
  }
  const double dd = static_cast<double>(d);
  const double n = static_cast<double>(model.grid_size());
  const double log_count = -lambda + dd * std::log(lambda) - std::lgamma(dd + 1.0) - log_norm;
  const double log_sets = std::lgamma(n + 1.0) - std::lgamma(dd + 1.0) - std::lgamma(n - dd + 1.0);
  return log_count - log_sets;
}

TemperedDiagnostic tempered_diagnostic(const SemiLinearModel& model, const DipoleConfig& r,
                                       const TimeSeriesData& y, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw DomainError("tempered_diagnostic: alpha must lie in (0, 1] for the full-model branch");
  }
  check_data(model, y);
  const Eigen::MatrixXd g = assemble_lead_field(*model.forward, r);
  const double prior = log_prior(model, r);
  const GaussianTerms inflated =
      gaussian_terms(g, model.sigma_q, model.sigma_e / std::sqrt(alpha), y);
  return {prior + log_gaussian(inflated, y.rows(), y.cols()),
          tempered_marginal_log_density(model, r, y, alpha)};
}

double tempered_marginal_log_density(const SemiLinearModel& model, const DipoleConfig& r,
                                     const TimeSeriesData& y, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in [0, 1]");
  check_data(model, y);
  const Eigen::MatrixXd g = assemble_lead_field(*model.forward, r);
  const GaussianTerms t = gaussian_terms(g, model.sigma_q, model.sigma_e, y);
  const double nt = static_cast<double>(y.cols());
  const double n = static_cast<double>(y.rows() * y.cols());
  // N(y_t; 0, Gamma/alpha) * alpha^{-N_s/2} = (2 pi)^{-N_s/2} det(Gamma)^{-1/2} exp(-alpha q_t/2)
  const double gaussian = -0.5 * nt * t.logdet_gamma - 0.5 * alpha * t.quadratic - 0.5 * n * kLog2Pi;
  return log_prior(model, r) + 0.5 * nt * (1.0 - alpha) * t.logdet_gamma + gaussian;
}

GaussianMoments linear_gaussian_marginal(const Eigen::MatrixXd& g, const Eigen::VectorXd& q_mean,
                                         const Eigen::MatrixXd& q_cov, const Eigen::VectorXd& e_mean,
                                         const Eigen::MatrixXd& e_cov) {
  return {g * q_mean + e_mean, g * q_cov * g.transpose() + e_cov};
}

GaussianMoments linear_gaussian_conditional(const Eigen::MatrixXd& g, const Eigen::VectorXd& q_mean,
                                            const Eigen::MatrixXd& q_cov,
                                            const Eigen::VectorXd& e_mean,
                                            const Eigen::MatrixXd& e_cov, const Eigen::VectorXd& y) {
  const GaussianMoments marginal = linear_gaussian_marginal(g, q_mean, q_cov, e_mean, e_cov);
  Eigen::LLT<Eigen::MatrixXd> llt(marginal.covariance);
  if (llt.info() != Eigen::Success) throw NumericalError("linear_gaussian_conditional: Gamma not SPD");
  const Eigen::MatrixXd cross = q_cov * g.transpose();  // Gamma_q G^T
  GaussianMoments out;
  out.mean = q_mean + cross * llt.solve(y - marginal.mean);
  out.covariance = q_cov - cross * llt.solve(cross.transpose());
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

MarginalLikelihood::MarginalLikelihood(SemiLinearModel model, const TimeSeriesData& y)
    : model_(std::move(model)), data_(y), data_energy_(y.squaredNorm()) {
  model_.validate();
  check_data(model_, y);
  // Only Y Y^T enters the likelihood, so a factor W with W W^T = Y Y^T of
  // width min(N_t, N_s) carries all the information in the data.
  Eigen::MatrixXd w;
  if (y.cols() <= y.rows()) {
    w = y;
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(y * y.transpose());
    const Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    w = eig.eigenvectors() * roots.asDiagonal();
  }
  projected_ = model_.forward->matrix().transpose() * w;
}

double MarginalLikelihood::evaluate(std::span<const GridIndex> indices) const {
  const Eigen::Index n_s = model_.sensor_count();
  const Eigen::Index time_count = data_.cols();
  const double sigma_e2 = model_.sigma_e * model_.sigma_e;
  const double n = static_cast<double>(n_s * time_count);
  const double nt = static_cast<double>(time_count);
  const auto d = static_cast<Eigen::Index>(indices.size());
  if (d == 0) {
    return -0.5 * nt * static_cast<double>(n_s) * std::log(sigma_e2) - 0.5 * data_energy_ / sigma_e2 -
           0.5 * n * kLog2Pi;
  }
  const double kappa = (model_.sigma_q * model_.sigma_q) / sigma_e2;
  const LeadField& lf = *model_.forward;
  Eigen::MatrixXd gram(3 * d, 3 * d);
  Eigen::MatrixXd proj(3 * d, projected_.cols());
  for (Eigen::Index k = 0; k < d; ++k) {
    const auto bk = lf.block(indices[static_cast<std::size_t>(k)]);
    gram.block<3, 3>(3 * k, 3 * k).noalias() = bk.transpose() * bk;
    for (Eigen::Index l = 0; l < k; ++l) {
      const auto bl = lf.block(indices[static_cast<std::size_t>(l)]);
      gram.block<3, 3>(3 * k, 3 * l).noalias() = bk.transpose() * bl;
      gram.block<3, 3>(3 * l, 3 * k) = gram.block<3, 3>(3 * k, 3 * l).transpose();
    }
    proj.middleRows<3>(3 * k) = projected_.middleRows<3>(3 * static_cast<Eigen::Index>(indices[static_cast<std::size_t>(k)]));
  }
  const CapacitanceFactor f = factor_capacitance(gram, kappa, sigma_e2, n_s);
  f.llt.matrixL().solveInPlace(proj);
  const double quadratic = (data_energy_ - kappa * proj.squaredNorm()) / sigma_e2;
  return -0.5 * nt * f.logdet_gamma - 0.5 * quadratic - 0.5 * n * kLog2Pi;
}

}  // namespace sasmc
