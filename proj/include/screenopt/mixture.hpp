#pragma once

// Two-component random-effect normal mixture for multi-stage screens.
// A compound is null (theta=0, pure noise) or active (theta=1, latent effect
// mu drawn once per compound). Averaging r replicates shrinks the noise
// variance by 1/r, so a stage with r replicates observes
//   null:   N(0, sigma0_sq / r)
//   active: N(mu, sigma0_sq / r),  mu ~ N(0, sigma_mu_sq)
// marginally active values are N(0, sigma_mu_sq + sigma0_sq / r).

#include <cstdint>
#include <vector>

#include "screenopt/rng.hpp"

namespace screenopt {

struct MixtureParams {
  double p = 0.0;            // non-null proportion
  double sigma0_sq = 1.0;    // measurement noise variance (single replicate)
  double sigma_mu_sq = 0.0;  // latent signal variance
  double mean_shift = 0.0;   // location removed before analysis; metadata only

  void validate() const;  // throws std::invalid_argument
  double marginal_alt_variance() const { return sigma_mu_sq + sigma0_sq; }
};

struct StageModel {
  MixtureParams params;
  int replicates = 1;

  void validate() const;
  double null_sd() const;
  double alt_sd() const;
  double null_variance() const { return params.sigma0_sq / replicates; }
  double alt_variance() const { return params.sigma_mu_sq + params.sigma0_sq / replicates; }
};

double effective_null_sd(double sigma0_sq, int r);
double effective_alt_sd(const MixtureParams& params, int r);

// Latent truth for one simulated library; mu is 0 for null compounds and is a
// fixed property of the compound, shared by every stage that remeasures it.
struct WorldDraw {
  std::vector<std::uint8_t> theta;
  std::vector<double> mu;
};

WorldDraw draw_world(const MixtureParams& params, std::size_t m, RngStream& rng);

// Replicate-averaged measurements of an existing world at a stage's precision.
std::vector<double> measure_world(const WorldDraw& world, const StageModel& model,
                                  RngStream& rng);

struct SimulatedScreen {
  std::vector<std::uint8_t> theta;
  std::vector<double> values;  // replicate-averaged measurements
  std::uint64_t seed = 0;
};

SimulatedScreen simulate_screen(const StageModel& model, std::size_t m,
                                std::uint64_t seed);

// Confirmatory-stage screen for an already-selected set: latent states are
// inherited, values are drawn from the stage-II effective densities.
SimulatedScreen simulate_stage2_from_selection(const std::vector<std::uint8_t>& selected_theta,
                                               const StageModel& model2,
                                               std::uint64_t seed);

struct DensityPair {
  double null_component;  // (1-p) f0(x)
  double marginal;        // (1-p) f0(x) + p f1(x)
};

DensityPair mixture_density(double x, const StageModel& model);

}  // namespace screenopt
