#pragma once

// Estimation of (p, sigma0_sq, sigma_mu_sq) from centered single-replicate
// data: self-normalized importance sampling of posterior expectations under
//   pi(sigma0^2, sigma_mu^2) ∝ (sigma0^2 + sigma_mu^2)^-2
//   pi(p) ∝ (1 - p)^alpha
// and maximum likelihood via EM as the alternative route.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "screenopt/mixture.hpp"

namespace screenopt {

struct PriorConfig {
  double prior_exponent_alpha = 5.58;
  double scott_berger_a = 5.0;  // reserved constant of the source construction
  std::size_t importance_samples = 10'000;

  void validate() const;
};

enum class EstimationMethod { kImportanceSampling, kEm };

struct ParamUncertainty {
  double p = 0.0;
  double sigma0_sq = 0.0;
  double sigma_mu_sq = 0.0;
};

struct EstimationResult {
  MixtureParams params;
  ParamUncertainty posterior_sd;  // per-parameter uncertainty of the estimate
  double effective_sample_size = 0.0;
  EstimationMethod method = EstimationMethod::kEm;
  bool degenerate = false;  // boundary collapse (p -> 0/1 or sigma_mu_sq -> 0)
  int iterations = 0;
  double log_likelihood_value = 0.0;
  std::vector<double> log_likelihood_trace;  // EM only; non-decreasing
};

class DegenerateWeightsError : public std::runtime_error {
 public:
  explicit DegenerateWeightsError(const std::string& what) : std::runtime_error(what) {}
};

// removes the sample mean; returns (shifted values, mean_shift)
std::pair<std::vector<double>, double> demean(const std::vector<double>& values);

// sum of log[(1-p) phi(x; sigma0^2) + p phi(x; sigma0^2 + sigma_mu^2)]
double log_likelihood(std::span<const double> values, const MixtureParams& params);

EstimationResult estimate_em(std::span<const double> values, double tolerance = 1e-8,
                             int max_iters = 2000);

EstimationResult estimate_mc(std::span<const double> values, const PriorConfig& config,
                             std::uint64_t seed, int threads = 1);

// gamma/beta samplers used by the importance-sampling proposal
double next_gamma(RngStream& rng, double shape);
double next_beta(RngStream& rng, double a, double b);

}  // namespace screenopt
