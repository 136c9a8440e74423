#include "screenopt/experiments.hpp"

#include <cmath>
#include <stdexcept>

#include "screenopt/parallel.hpp"

namespace screenopt {

namespace {

// stream sub-domains within one grid point
constexpr std::uint64_t kOptimizerDomain = 0xA1;

struct MethodTally {
  std::vector<double> fdp;
  std::vector<double> tp;
};

MetricRecord summarize(double grid_point, const std::string& method,
                       const MethodTally& tally) {
  MetricRecord record;
  record.grid_point = grid_point;
  record.method = method;
  const int n = static_cast<int>(tally.fdp.size());
  double fdr_sum = 0.0, tp_sum = 0.0;
  for (double f : tally.fdp) fdr_sum += f;
  for (double t : tally.tp) tp_sum += t;
  record.mean_realized_fdr = fdr_sum / n;
  record.mean_etp = tp_sum / n;
  if (n > 1) {
    double fdr_var = 0.0, tp_var = 0.0;
    for (double f : tally.fdp) fdr_var += (f - record.mean_realized_fdr) * (f - record.mean_realized_fdr);
    for (double t : tally.tp) tp_var += (t - record.mean_etp) * (t - record.mean_etp);
    record.fdr_mc_se = std::sqrt(fdr_var / (n - 1) / n);
    record.etp_mc_se = std::sqrt(tp_var / (n - 1) / n);
  }
  if (record.mean_etp > 0.0) record.ln_etp = std::log(record.mean_etp);
  return record;
}

// one grid point of a comparison study: optimize once, then replay the chosen
// design and both baselines against shared latent worlds
void run_grid_point(const StudyConfig& config, double grid_point, std::size_t grid_index,
                    bool vary_alpha, ComparisonResult* out) {
  DesignInputs inputs = config.base_inputs;
  if (vary_alpha) {
    inputs.fdr_alpha = grid_point;
  } else {
    inputs.stage1_params.p = grid_point;
  }
  inputs.validate();

  const std::uint64_t point_seed =
      derive_stream(config.seed, {streams::kStudy, static_cast<std::uint64_t>(config.study_id),
                                  static_cast<std::uint64_t>(grid_index)});

  const OptimizeResult design =
      optimize(inputs, derive_stream(point_seed, {kOptimizerDomain}), config.threads);

  const int reps = config.repetitions;
  std::vector<DesignOutcome> proposed(static_cast<std::size_t>(reps));
  std::vector<BaselineResult> two_stage(static_cast<std::size_t>(reps));
  std::vector<BaselineResult> one_stage(static_cast<std::size_t>(reps));
  parallel_for(static_cast<std::size_t>(reps), config.threads, [&](std::size_t rep) {
    RngStream world_rng(
        derive_stream(point_seed, {streams::kWorld, static_cast<std::uint64_t>(rep)}));
    const WorldDraw world =
        draw_world(inputs.stage1_params, static_cast<std::size_t>(inputs.m1), world_rng);
    proposed[rep] = apply_design(
        design.best.candidate, inputs, world,
        derive_stream(point_seed, {streams::kStage1Noise, static_cast<std::uint64_t>(rep)}),
        derive_stream(point_seed, {streams::kStage2Noise, static_cast<std::uint64_t>(rep)}));
    two_stage[rep] = two_stage_bh(
        inputs, world,
        derive_stream(point_seed, {streams::kBaselineTwo, static_cast<std::uint64_t>(rep)}));
    one_stage[rep] = one_stage_bh(
        inputs, world,
        derive_stream(point_seed, {streams::kBaselineOne, static_cast<std::uint64_t>(rep)}));
  });

  MethodTally tally_proposed, tally_two, tally_one;
  for (int rep = 0; rep < reps; ++rep) {
    tally_proposed.fdp.push_back(proposed[static_cast<std::size_t>(rep)].realized_fdp);
    tally_proposed.tp.push_back(
        static_cast<double>(proposed[static_cast<std::size_t>(rep)].true_positives));
    tally_two.fdp.push_back(two_stage[static_cast<std::size_t>(rep)].realized_fdp);
    tally_two.tp.push_back(
        static_cast<double>(two_stage[static_cast<std::size_t>(rep)].true_positives));
    tally_one.fdp.push_back(one_stage[static_cast<std::size_t>(rep)].realized_fdp);
    tally_one.tp.push_back(
        static_cast<double>(one_stage[static_cast<std::size_t>(rep)].true_positives));
  }

  out->records.push_back(summarize(grid_point, kMethodProposed, tally_proposed));
  out->records.push_back(summarize(grid_point, kMethodTwoStageBh, tally_two));
  out->records.push_back(summarize(grid_point, kMethodOneStageBh, tally_one));
  out->designs.push_back(GridDesign{grid_point, design.best});
}

ComparisonResult run_comparison(const StudyConfig& config, bool vary_alpha) {
  config.validate();
  ComparisonResult result;
  for (std::size_t g = 0; g < config.grid.size(); ++g) {
    run_grid_point(config, config.grid[g], g, vary_alpha, &result);
  }
  return result;
}

}  // namespace

void StudyConfig::validate() const {
  if (grid.empty()) throw std::invalid_argument("StudyConfig: grid must be nonempty");
  if (repetitions < 1) throw std::invalid_argument("StudyConfig: repetitions must be >= 1");
  base_inputs.validate();
}

ComparisonResult run_sim1(const StudyConfig& config) {
  if (config.study_id != StudyId::kSim1)
    throw std::invalid_argument("run_sim1: config.study_id must be kSim1");
  return run_comparison(config, /*vary_alpha=*/false);
}

ComparisonResult run_sim2(const StudyConfig& config) {
  if (config.study_id != StudyId::kSim2)
    throw std::invalid_argument("run_sim2: config.study_id must be kSim2");
  return run_comparison(config, /*vary_alpha=*/true);
}

std::vector<SweepEntry> run_data_sweep(const StudyConfig& config) {
  if (config.study_id != StudyId::kDataSweep)
    throw std::invalid_argument("run_data_sweep: config.study_id must be kDataSweep");
  config.validate();
  std::vector<SweepEntry> entries;
  for (std::size_t g = 0; g < config.grid.size(); ++g) {
    DesignInputs inputs = config.base_inputs;
    inputs.cost2 = currency_from_dollars(config.grid[g]);
    inputs.validate();
    const std::uint64_t point_seed = derive_stream(
        config.seed, {streams::kStudy, static_cast<std::uint64_t>(config.study_id),
                      static_cast<std::uint64_t>(g)});
    SweepEntry entry;
    entry.cost2_dollars = config.grid[g];
    OptimizeResult result =
        optimize(inputs, derive_stream(point_seed, {kOptimizerDomain}), config.threads);
    entry.best = result.best;
    entry.frontier = std::move(result.frontier);
    entries.push_back(std::move(entry));
  }
  return entries;
}

StudyConfig default_sim1_config(bool quick) {
  StudyConfig config;
  config.study_id = StudyId::kSim1;
  for (int i = 0; i <= 10; ++i) config.grid.push_back(0.10 + 0.01 * i);
  config.repetitions = quick ? 50 : 200;
  config.base_inputs.m1 = 500;
  config.base_inputs.budget = currency_from_dollars(250'000);
  config.base_inputs.cost1 = currency_from_dollars(20);
  config.base_inputs.cost2 = currency_from_dollars(50);
  config.base_inputs.precision_ratio = 3.0;
  config.base_inputs.fdr_alpha = 0.05;
  config.base_inputs.mc_reps = quick ? 25 : 100;
  config.base_inputs.stage1_params = {.p = 0.1, .sigma0_sq = 1.0, .sigma_mu_sq = 6.25};
  return config;
}

StudyConfig default_sim2_config(bool quick) {
  StudyConfig config = default_sim1_config(quick);
  config.study_id = StudyId::kSim2;
  config.grid = {0.02, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30};
  return config;
}

StudyConfig default_data_sweep_config(bool quick) {
  StudyConfig config;
  config.study_id = StudyId::kDataSweep;
  config.grid = quick ? std::vector<double>{50.0} : std::vector<double>{2.0, 5.0, 10.0, 50.0};
  config.repetitions = 1;  // the sweep is one optimize run per cost
  config.base_inputs.m1 = 51'840;
  config.base_inputs.budget = currency_from_dollars(500'000);
  config.base_inputs.cost1 = currency_from_dollars(1);
  config.base_inputs.cost2 = currency_from_dollars(2);
  config.base_inputs.precision_ratio = 3.0;
  config.base_inputs.fdr_alpha = 0.05;
  config.base_inputs.mc_reps = quick ? 25 : 100;
  config.base_inputs.a1_stride = quick ? 400 : 100;
  config.base_inputs.stage1_params = {
      .p = 0.0132, .sigma0_sq = 0.5677, .sigma_mu_sq = 3.0735, .mean_shift = 0.287};
  return config;
}

}  // namespace screenopt
