#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Log-domain weight arithmetic shared by the samplers.
namespace sasmc::weights {

// log sum_i exp(x_i), shifted by the maximum. Returns -inf for an empty span
// or when every term is -inf.
double log_sum_exp(std::span<const double> x);

// Subtracts log sum exp(log_w) from every entry; returns that normalizer.
double normalize(std::span<double> log_w);

// 1 / sum_i W_i^2 for normalized log-weights, evaluated in the log domain.
double effective_sample_size(std::span<const double> normalized_log_w);

// ESS of the weights W_i exp(delta * log_lik_i), renormalized.
double incremented_ess(std::span<const double> normalized_log_w, std::span<const double> log_lik,
                       double delta);

// Systematic resampling: offspring parent indices, one per slot, given the
// normalized log-weights and a single uniform u in [0, 1/I).
std::vector<std::size_t> systematic_resample(std::span<const double> normalized_log_w, double u);

}  // namespace sasmc::weights
