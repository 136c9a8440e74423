#include "screenopt/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace screenopt {

int one_stage_replicates(const DesignInputs& inputs) {
  const Currency per_pass = inputs.cost1 * inputs.m1;
  return static_cast<int>((inputs.budget + per_pass - 1) / per_pass);
}

BaselineResult one_stage_bh(const DesignInputs& inputs, const WorldDraw& world,
                            std::uint64_t noise_seed) {
  inputs.validate();
  const int r1 = one_stage_replicates(inputs);
  const StageModel model{.params = inputs.stage1_params, .replicates = r1};
  RngStream rng(noise_seed);
  const std::vector<double> values = measure_world(world, model, rng);

  std::vector<double> p_values(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    p_values[i] = two_sided_p_value(values[i], inputs.stage1_params.sigma0_sq, r1);
  }

  BaselineResult result;
  result.method = BaselineMethod::kOneStageBh;
  result.r1 = r1;
  result.spend = inputs.cost1 * r1 * inputs.m1;
  result.rejection = bh_step_up(p_values, inputs.fdr_alpha);
  result.realized_fdp = realized_fdp(result.rejection, world.theta);
  result.true_positives = true_positive_count(result.rejection, world.theta);
  return result;
}

BaselineResult one_stage_bh(const DesignInputs& inputs, std::uint64_t seed) {
  RngStream world_rng(derive_stream(seed, {streams::kWorld}));
  const WorldDraw world =
      draw_world(inputs.stage1_params, static_cast<std::size_t>(inputs.m1), world_rng);
  return one_stage_bh(inputs, world, derive_stream(seed, {streams::kBaselineOne}));
}

BaselineResult two_stage_bh(const DesignInputs& inputs, const WorldDraw& world,
                            std::uint64_t noise_seed, bool empirical_screen_sd) {
  inputs.validate();
  constexpr int kScreenReplicates = 10;
  const Currency stage1_spend = inputs.cost1 * kScreenReplicates * inputs.m1;
  if (inputs.budget <= stage1_spend) {
    throw InfeasibleBudgetError("two_stage_bh: budget cannot cover ten stage-I replicates");
  }

  const StageModel model1{.params = inputs.stage1_params, .replicates = kScreenReplicates};
  RngStream rng(noise_seed);
  const std::vector<double> values = measure_world(world, model1, rng);

  // z-score of the replicate mean against the replication-adjusted null SD
  double screen_sd = model1.null_sd();
  if (empirical_screen_sd) {
    double sum = 0.0, sum_sq = 0.0;
    for (double x : values) {
      sum += x;
      sum_sq += x * x;
    }
    const double n = static_cast<double>(values.size());
    const double mean = sum / n;
    screen_sd = std::sqrt(std::max(sum_sq / n - mean * mean, 1e-12));
  }

  BaselineResult result;
  result.method = BaselineMethod::kTwoStageBh;
  result.r1 = kScreenReplicates;
  result.spend = stage1_spend;

  std::vector<std::size_t> carried_index;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::abs(values[i]) / screen_sd > 2.0) carried_index.push_back(i);
  }
  result.carried = carried_index.size();
  if (carried_index.empty()) return result;  // nothing to confirm; not an error

  const Currency per_replicate = inputs.cost2 * static_cast<Currency>(carried_index.size());
  const int r2 = static_cast<int>((inputs.budget - stage1_spend) / per_replicate);
  if (r2 < 1) return result;  // carried set too large for even one replicate
  result.r2 = r2;
  result.spend = stage1_spend + per_replicate * r2;

  const MixtureParams params2 =
      default_stage2_params(inputs.stage1_params, inputs.precision_ratio);
  const double noise_sd = effective_null_sd(params2.sigma0_sq, r2);
  const double mu_sd = std::sqrt(params2.sigma_mu_sq);

  std::vector<double> stage2_p(carried_index.size());
  for (std::size_t j = 0; j < carried_index.size(); ++j) {
    const std::size_t i = carried_index[j];
    double mu = 0.0;
    if (world.theta[i]) {
      mu = inputs.stage2_latent == Stage2Latent::kCarryMu ? world.mu[i]
                                                          : mu_sd * rng.next_normal();
    }
    const double x2 = mu + noise_sd * rng.next_normal();
    stage2_p[j] = two_sided_p_value(x2, params2.sigma0_sq, r2);
  }

  RejectionSet local = bh_step_up(stage2_p, inputs.fdr_alpha);
  result.rejection.threshold_rank = local.threshold_rank;
  for (std::size_t j : local.indices) result.rejection.indices.push_back(carried_index[j]);
  result.realized_fdp = realized_fdp(result.rejection, world.theta);
  result.true_positives = true_positive_count(result.rejection, world.theta);
  return result;
}

BaselineResult two_stage_bh(const DesignInputs& inputs, std::uint64_t seed,
                            bool empirical_screen_sd) {
  RngStream world_rng(derive_stream(seed, {streams::kWorld}));
  const WorldDraw world =
      draw_world(inputs.stage1_params, static_cast<std::size_t>(inputs.m1), world_rng);
  return two_stage_bh(inputs, world, derive_stream(seed, {streams::kBaselineTwo}),
                      empirical_screen_sd);
}

}  // namespace screenopt
