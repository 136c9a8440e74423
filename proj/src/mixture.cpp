#include "screenopt/mixture.hpp"

#include <cmath>
#include <stdexcept>

#include "screenopt/gauss.hpp"

namespace screenopt {

void MixtureParams::validate() const {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("mixture: p must lie in [0,1]");
  if (!(sigma0_sq > 0.0) || !std::isfinite(sigma0_sq))
    throw std::invalid_argument("mixture: sigma0_sq must be positive");
  if (!(sigma_mu_sq >= 0.0) || !std::isfinite(sigma_mu_sq))
    throw std::invalid_argument("mixture: sigma_mu_sq must be non-negative");
  if (!std::isfinite(mean_shift)) throw std::invalid_argument("mixture: mean_shift must be finite");
}

void StageModel::validate() const {
  params.validate();
  if (replicates < 1) throw std::invalid_argument("mixture: replicates must be >= 1");
}

double StageModel::null_sd() const { return effective_null_sd(params.sigma0_sq, replicates); }

double StageModel::alt_sd() const { return effective_alt_sd(params, replicates); }

double effective_null_sd(double sigma0_sq, int r) {
  if (!(sigma0_sq > 0.0) || !std::isfinite(sigma0_sq))
    throw std::invalid_argument("effective_null_sd: sigma0_sq must be positive");
  if (r < 1) throw std::invalid_argument("effective_null_sd: replicates must be >= 1");
  return std::sqrt(sigma0_sq / r);
}

double effective_alt_sd(const MixtureParams& params, int r) {
  params.validate();
  if (r < 1) throw std::invalid_argument("effective_alt_sd: replicates must be >= 1");
  return std::sqrt(params.sigma_mu_sq + params.sigma0_sq / r);
}

WorldDraw draw_world(const MixtureParams& params, std::size_t m, RngStream& rng) {
  params.validate();
  if (m == 0) throw std::invalid_argument("draw_world: m must be >= 1");
  WorldDraw world;
  world.theta.resize(m);
  world.mu.assign(m, 0.0);
  const double mu_sd = std::sqrt(params.sigma_mu_sq);
  for (std::size_t i = 0; i < m; ++i) {
    const bool active = rng.next_bernoulli(params.p);
    world.theta[i] = active ? 1 : 0;
    if (active) world.mu[i] = mu_sd * rng.next_normal();
  }
  return world;
}

std::vector<double> measure_world(const WorldDraw& world, const StageModel& model,
                                  RngStream& rng) {
  model.validate();
  const double noise_sd = model.null_sd();
  std::vector<double> values(world.theta.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = world.mu[i] + noise_sd * rng.next_normal();
  }
  return values;
}

SimulatedScreen simulate_screen(const StageModel& model, std::size_t m,
                                std::uint64_t seed) {
  model.validate();
  if (m == 0) throw std::invalid_argument("simulate_screen: m must be >= 1");
  RngStream rng(seed);
  WorldDraw world = draw_world(model.params, m, rng);
  SimulatedScreen screen;
  screen.values = measure_world(world, model, rng);
  screen.theta = std::move(world.theta);
  screen.seed = seed;
  return screen;
}

SimulatedScreen simulate_stage2_from_selection(const std::vector<std::uint8_t>& selected_theta,
                                               const StageModel& model2,
                                               std::uint64_t seed) {
  model2.validate();
  if (selected_theta.empty())
    throw std::invalid_argument("simulate_stage2_from_selection: empty selection");
  RngStream rng(seed);
  const double mu_sd = std::sqrt(model2.params.sigma_mu_sq);
  const double noise_sd = model2.null_sd();
  SimulatedScreen screen;
  screen.theta = selected_theta;
  screen.values.resize(selected_theta.size());
  for (std::size_t i = 0; i < selected_theta.size(); ++i) {
    const double mu = selected_theta[i] ? mu_sd * rng.next_normal() : 0.0;
    screen.values[i] = mu + noise_sd * rng.next_normal();
  }
  screen.seed = seed;
  return screen;
}

DensityPair mixture_density(double x, const StageModel& model) {
  model.validate();
  if (!std::isfinite(x)) throw std::invalid_argument("mixture_density: x must be finite");
  const double p = model.params.p;
  const double f0 = norm_pdf(x, model.null_variance());
  const double f1 = norm_pdf(x, model.alt_variance());
  return DensityPair{(1.0 - p) * f0, (1.0 - p) * f0 + p * f1};
}

}  // namespace screenopt
