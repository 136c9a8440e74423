#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "screenopt/fdr.hpp"
#include "screenopt/optimizer.hpp"
#include "screenopt/rng.hpp"

using namespace screenopt;

namespace {

DesignInputs sim_study_inputs() {
  DesignInputs inputs;
  inputs.m1 = 500;
  inputs.budget = currency_from_dollars(250'000);
  inputs.cost1 = currency_from_dollars(20);
  inputs.cost2 = currency_from_dollars(50);
  inputs.precision_ratio = 3.0;
  inputs.fdr_alpha = 0.05;
  inputs.mc_reps = 25;
  inputs.stage1_params = {.p = 0.1, .sigma0_sq = 1.0, .sigma_mu_sq = 6.25};
  return inputs;
}

}  // namespace

TEST_CASE("stage2_replicates worked examples") {
  DesignInputs inputs = sim_study_inputs();
  CHECK(stage2_replicates(inputs, 10, 100) == 30);  // floor(150000 / 5000)
  // budget exactly exhausted by stage I
  CHECK(stage2_replicates(inputs, 25, 1) == 0);
}

TEST_CASE("stage2_replicates satisfies the floor characterization") {
  DesignInputs inputs;
  inputs.m1 = 10;
  inputs.budget = currency_from_dollars(100);
  inputs.cost1 = currency_from_dollars(1);
  inputs.cost2 = currency_from_dollars(2);
  inputs.stage1_params = {.p = 0.1, .sigma0_sq = 1.0, .sigma_mu_sq = 1.0};
  for (int r1 = 1; r1 <= 9; ++r1) {
    for (std::int64_t a1 = 1; a1 <= 10; ++a1) {
      const int r2 = stage2_replicates(inputs, r1, a1);
      if (r2 < 1) continue;
      const Currency stage1 = inputs.cost1 * r1 * inputs.m1;
      CHECK(stage1 + inputs.cost2 * r2 * a1 <= inputs.budget);
      CHECK(stage1 + inputs.cost2 * (r2 + 1) * a1 > inputs.budget);
    }
  }
}

TEST_CASE("enumerate_candidates covers the stated r1 range") {
  DesignInputs inputs = sim_study_inputs();
  CHECK(r1_upper_bound(inputs) == 25);
  auto candidates = enumerate_candidates(inputs);
  int max_r1 = 0;
  for (const auto& c : candidates) {
    max_r1 = std::max(max_r1, c.r1);
    // constructive invariants
    CHECK(c.r1 >= 1);
    CHECK(c.a1_size >= 1);
    CHECK(c.a1_size <= inputs.m1);
    CHECK(c.r2 >= 1);
    CHECK(inputs.cost1 * c.r1 * inputs.m1 + inputs.cost2 * c.r2 * c.a1_size <=
          inputs.budget);
    CHECK(c.r2 == stage2_replicates(inputs, c.r1, c.a1_size));
  }
  // r1 = 25 leaves no stage-II budget, so the last populated value is 24
  CHECK(max_r1 == 24);
}

TEST_CASE("enumerate_candidates matches a hand enumeration on tiny inputs") {
  DesignInputs inputs;
  inputs.m1 = 10;
  inputs.budget = currency_from_dollars(100);
  inputs.cost1 = currency_from_dollars(1);
  inputs.cost2 = currency_from_dollars(2);
  inputs.stage1_params = {.p = 0.1, .sigma0_sq = 1.0, .sigma_mu_sq = 1.0};

  std::vector<DesignCandidate> expected;
  for (int r1 = 1; r1 <= 10; ++r1) {
    const double remaining = 100.0 - 1.0 * r1 * 10.0;
    const std::int64_t a1_max =
        std::min<std::int64_t>(static_cast<std::int64_t>(remaining / 2.0), 10);
    for (std::int64_t a1 = 1; a1 <= a1_max; ++a1) {
      const int r2 = static_cast<int>(remaining / (2.0 * static_cast<double>(a1)));
      if (r2 >= 1) expected.push_back({r1, a1, r2});
    }
  }
  auto actual = enumerate_candidates(inputs);
  REQUIRE(actual.size() == expected.size());
  for (std::size_t i = 0; i < actual.size(); ++i) CHECK(actual[i] == expected[i]);
  CHECK(actual.size() == 85);
}

TEST_CASE("enumerate_candidates honours stride and override") {
  DesignInputs inputs = sim_study_inputs();
  inputs.a1_stride = 7;
  inputs.r1_max_override = 3;
  auto candidates = enumerate_candidates(inputs);
  for (const auto& c : candidates) {
    CHECK(c.r1 <= 3);
    CHECK((c.a1_size - 1) % 7 == 0);
  }
}

TEST_CASE("infeasible budget raises") {
  DesignInputs inputs = sim_study_inputs();
  inputs.budget = currency_from_dollars(5'000);  // below one stage-I pass
  CHECK_THROWS_AS(inputs.validate(), InfeasibleBudgetError);
}

TEST_CASE("evaluate_candidate with no signals confirms nothing") {
  DesignInputs inputs = sim_study_inputs();
  inputs.m1 = 60;
  inputs.budget = currency_from_dollars(40'000);
  inputs.stage1_params.p = 0.0;
  const DesignCandidate candidate{5, 20, stage2_replicates(inputs, 5, 20)};
  REQUIRE(candidate.r2 >= 1);
  auto eval = evaluate_candidate(candidate, inputs, 21);
  CHECK(eval.expected_true_positives == 0.0);
  CHECK(eval.mean_realized_fdp == 0.0);  // the step-up never fires on Lfdr = 1
  CHECK(eval.expected_hits == 0.0);
}

TEST_CASE("evaluate_candidate at a lax FDR level confirms nearly everything") {
  DesignInputs inputs = sim_study_inputs();
  inputs.m1 = 60;
  inputs.budget = currency_from_dollars(40'000);
  inputs.fdr_alpha = 0.99;
  inputs.stage1_params.p = 0.5;
  const DesignCandidate candidate{5, 20, stage2_replicates(inputs, 5, 20)};
  auto eval = evaluate_candidate(candidate, inputs, 22);
  CHECK(eval.expected_hits == doctest::Approx(20.0).epsilon(0.01));
}

TEST_CASE("evaluate_candidate matches a hand-traced execution of the pipeline") {
  DesignInputs inputs;
  inputs.m1 = 3;
  inputs.budget = currency_from_dollars(1'000);
  inputs.cost1 = currency_from_dollars(10);
  inputs.cost2 = currency_from_dollars(20);
  inputs.precision_ratio = 3.0;
  inputs.fdr_alpha = 0.2;
  inputs.mc_reps = 2;
  inputs.stage1_params = {.p = 0.4, .sigma0_sq = 1.0, .sigma_mu_sq = 4.0};
  const std::uint64_t seed = 99;
  const DesignCandidate candidate{2, 2, stage2_replicates(inputs, 2, 2)};
  REQUIRE(candidate.r2 == 23);  // (1000 - 60) / (20 * 2) = 23.5

  // independent re-execution of each step with the published stream names
  double sum_hits = 0.0, sum_tp = 0.0, sum_fdp = 0.0;
  const MixtureParams params2 = default_stage2_params(inputs.stage1_params, 3.0);
  for (int rep = 0; rep < 2; ++rep) {
    RngStream s1(derive_stream(seed, {streams::kStage1Noise, 2, static_cast<std::uint64_t>(rep)}));
    const StageModel model1{.params = inputs.stage1_params, .replicates = 2};
    WorldDraw world = draw_world(model1.params, 3, s1);
    auto values = measure_world(world, model1, s1);

    // rank by descending |x|, ties by index; carry the top 2 in rank order
    std::vector<std::size_t> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(values[a]) > std::abs(values[b]);
    });
    std::vector<std::uint8_t> sel_theta{world.theta[order[0]], world.theta[order[1]]};
    std::vector<double> sel_mu{world.mu[order[0]], world.mu[order[1]]};

    RngStream s2(derive_stream(seed, {streams::kStage2Noise, 2, 2, static_cast<std::uint64_t>(rep)}));
    const double noise_sd = effective_null_sd(params2.sigma0_sq, candidate.r2);
    std::vector<double> stage2_values(2);
    std::size_t active = 0;
    for (std::size_t i = 0; i < 2; ++i) {
      if (sel_theta[i]) {
        ++active;
        stage2_values[i] = sel_mu[i] + noise_sd * s2.next_normal();
      } else {
        stage2_values[i] = noise_sd * s2.next_normal();
      }
    }
    const double p2 = static_cast<double>(active) / 2.0;
    StageModel lfdr_model{.params = params2, .replicates = candidate.r2};
    lfdr_model.params.p = p2;
    std::vector<double> lfdr(2);
    for (std::size_t i = 0; i < 2; ++i) lfdr[i] = lfdr_statistic(stage2_values[i], lfdr_model);
    auto rejected = lfdr_step_up(lfdr, inputs.fdr_alpha);
    sum_hits += static_cast<double>(rejected.indices.size());
    sum_tp += static_cast<double>(true_positive_count(rejected, sel_theta));
    sum_fdp += realized_fdp(rejected, sel_theta);
  }

  auto eval = evaluate_candidate(candidate, inputs, seed);
  CHECK(eval.expected_hits == doctest::Approx(sum_hits / 2.0));
  CHECK(eval.expected_true_positives == doctest::Approx(sum_tp / 2.0));
  CHECK(eval.mean_realized_fdp == doctest::Approx(sum_fdp / 2.0));
}

TEST_CASE("optimize returns the frontier argmax and is seed-stable") {
  DesignInputs inputs = sim_study_inputs();
  inputs.m1 = 80;
  inputs.budget = currency_from_dollars(30'000);
  inputs.cost1 = currency_from_dollars(10);
  inputs.cost2 = currency_from_dollars(25);
  inputs.mc_reps = 10;
  inputs.a1_stride = 4;

  auto result = optimize(inputs, 314, 2);
  const auto* best = &result.frontier.front();
  for (const auto& eval : result.frontier) {
    if (eval.expected_hits > best->expected_hits) best = &eval;
  }
  CHECK(result.best.candidate == best->candidate);

  auto again = optimize(inputs, 314, 1);  // different worker count, same stream names
  CHECK(again.best.candidate == result.best.candidate);
  REQUIRE(again.frontier.size() == result.frontier.size());
  for (std::size_t i = 0; i < again.frontier.size(); ++i) {
    CHECK(again.frontier[i].expected_hits == result.frontier[i].expected_hits);
    CHECK(again.frontier[i].mean_realized_fdp == result.frontier[i].mean_realized_fdp);
  }

  auto other_seed = optimize(inputs, 315, 2);
  bool any_difference = false;
  for (std::size_t i = 0; i < other_seed.frontier.size(); ++i) {
    if (other_seed.frontier[i].expected_hits != result.frontier[i].expected_hits)
      any_difference = true;
  }
  CHECK(any_difference);
}

TEST_CASE("optimize with a single feasible candidate returns it") {
  DesignInputs inputs;
  inputs.m1 = 50;
  inputs.budget = currency_from_dollars(1'060);
  inputs.cost1 = currency_from_dollars(20);
  inputs.cost2 = currency_from_dollars(30);
  inputs.mc_reps = 4;
  inputs.stage1_params = {.p = 0.2, .sigma0_sq = 1.0, .sigma_mu_sq = 3.0};
  auto candidates = enumerate_candidates(inputs);
  REQUIRE(candidates.size() == 2);  // a1 = 1 with r2 = 2, a1 = 2 with r2 = 1
  auto result = optimize(inputs, 5, 1);
  CHECK(result.frontier.size() == 2);
}

TEST_CASE("standalone evaluation equals the frontier entry") {
  DesignInputs inputs = sim_study_inputs();
  inputs.m1 = 60;
  inputs.budget = currency_from_dollars(20'000);
  inputs.cost1 = currency_from_dollars(10);
  inputs.cost2 = currency_from_dollars(20);
  inputs.mc_reps = 8;
  inputs.a1_stride = 9;
  auto result = optimize(inputs, 777, 2);
  const auto& probe = result.frontier[result.frontier.size() / 2];
  auto standalone = evaluate_candidate(probe.candidate, inputs, 777, 1);
  CHECK(standalone.expected_hits == probe.expected_hits);
  CHECK(standalone.expected_true_positives == probe.expected_true_positives);
  CHECK(standalone.mean_realized_fdp == probe.mean_realized_fdp);
}

TEST_CASE("apply_design matches a re-derivation through the public operations") {
  DesignInputs inputs;
  inputs.m1 = 40;
  inputs.budget = currency_from_dollars(5'000);
  inputs.cost1 = currency_from_dollars(2);
  inputs.cost2 = currency_from_dollars(10);
  inputs.fdr_alpha = 0.15;
  inputs.stage1_params = {.p = 0.3, .sigma0_sq = 1.0, .sigma_mu_sq = 5.0};
  const DesignCandidate candidate{3, 12, stage2_replicates(inputs, 3, 12)};
  REQUIRE(candidate.r2 >= 1);

  RngStream world_rng(derive_stream(55, {streams::kWorld}));
  const WorldDraw world = draw_world(inputs.stage1_params, 40, world_rng);
  const auto outcome = apply_design(candidate, inputs, world, 601, 602);

  // independent replay: measure, rank by |x| descending, carry, confirm
  RngStream stage1(601);
  const StageModel model1{.params = inputs.stage1_params, .replicates = 3};
  const auto values = measure_world(world, model1, stage1);
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(values[a]) > std::abs(values[b]);
  });
  std::vector<std::uint8_t> sel_theta;
  std::vector<double> sel_mu;
  for (std::size_t i = 0; i < 12; ++i) {
    sel_theta.push_back(world.theta[order[i]]);
    sel_mu.push_back(world.mu[order[i]]);
  }
  RngStream stage2(602);
  const MixtureParams params2 = default_stage2_params(inputs.stage1_params, 3.0);
  const double noise_sd = effective_null_sd(params2.sigma0_sq, candidate.r2);
  std::vector<double> x2(12);
  std::size_t active = 0;
  for (std::size_t i = 0; i < 12; ++i) {
    if (sel_theta[i]) {
      ++active;
      x2[i] = sel_mu[i] + noise_sd * stage2.next_normal();
    } else {
      x2[i] = noise_sd * stage2.next_normal();
    }
  }
  StageModel lfdr_model{.params = params2, .replicates = candidate.r2};
  lfdr_model.params.p = static_cast<double>(active) / 12.0;
  std::vector<double> lfdr(12);
  for (std::size_t i = 0; i < 12; ++i) lfdr[i] = lfdr_statistic(x2[i], lfdr_model);
  const auto rejected = lfdr_step_up(lfdr, inputs.fdr_alpha);

  CHECK(outcome.hits == rejected.indices.size());
  CHECK(outcome.true_positives == true_positive_count(rejected, sel_theta));
  CHECK(outcome.realized_fdp == doctest::Approx(realized_fdp(rejected, sel_theta)));
}

TEST_CASE("best candidate keeps the realized FDR near the nominal level") {
  DesignInputs inputs = sim_study_inputs();
  inputs.m1 = 200;
  inputs.budget = currency_from_dollars(100'000);
  inputs.mc_reps = 40;
  inputs.a1_stride = 8;

  for (auto latent : {Stage2Latent::kCarryMu, Stage2Latent::kRedrawMu}) {
    inputs.stage2_latent = latent;
    auto result = optimize(inputs, 2025, 2);
    CHECK(result.best.mean_realized_fdp <=
          inputs.fdr_alpha + 3.0 * result.best.fdp_mc_se);
    CHECK(result.best.expected_true_positives <= result.best.expected_hits);
  }
}
