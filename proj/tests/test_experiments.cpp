#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "screenopt/experiments.hpp"

using namespace screenopt;

namespace {

StudyConfig tiny_sim1() {
  StudyConfig config = default_sim1_config(true);
  config.grid = {0.10, 0.15};
  config.repetitions = 6;
  config.base_inputs.m1 = 80;
  config.base_inputs.budget = currency_from_dollars(40'000);
  config.base_inputs.cost1 = currency_from_dollars(20);
  config.base_inputs.cost2 = currency_from_dollars(50);
  config.base_inputs.mc_reps = 6;
  config.base_inputs.a1_stride = 8;
  config.seed = 11;
  return config;
}

}  // namespace

TEST_CASE("run_sim1 emits one record per grid point and method with no gaps") {
  auto result = run_sim1(tiny_sim1());
  CHECK(result.records.size() == 6);  // 2 grid points x 3 methods
  CHECK(result.designs.size() == 2);
  std::set<std::pair<double, std::string>> seen;
  for (const auto& r : result.records) {
    seen.insert({r.grid_point, r.method});
    if (r.mean_etp > 0.0) {
      REQUIRE(r.ln_etp.has_value());
      CHECK(*r.ln_etp == doctest::Approx(std::log(r.mean_etp)));
    } else {
      CHECK(!r.ln_etp.has_value());
    }
  }
  CHECK(seen.size() == 6);
}

TEST_CASE("studies are reproducible bit for bit under a fixed seed") {
  StudyConfig config = tiny_sim1();
  config.threads = 1;
  auto a = run_sim1(config);
  config.threads = 2;  // worker count must not change anything
  auto b = run_sim1(config);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].method == b.records[i].method);
    CHECK(a.records[i].mean_realized_fdr == b.records[i].mean_realized_fdr);
    CHECK(a.records[i].mean_etp == b.records[i].mean_etp);
    CHECK(a.records[i].fdr_mc_se == b.records[i].fdr_mc_se);
  }
  for (std::size_t i = 0; i < a.designs.size(); ++i) {
    CHECK(a.designs[i].chosen.candidate == b.designs[i].chosen.candidate);
  }

  StudyConfig reseeded = tiny_sim1();
  reseeded.seed = 12;
  auto c = run_sim1(reseeded);
  bool differs = false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    if (a.records[i].mean_etp != c.records[i].mean_etp) differs = true;
  }
  CHECK(differs);
}

TEST_CASE("a single repetition with a fixed seed is a deterministic row") {
  StudyConfig config = tiny_sim1();
  config.grid = {0.12};
  config.repetitions = 1;
  auto once = run_sim1(config);
  auto twice = run_sim1(config);
  REQUIRE(once.records.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(once.records[i].mean_etp == twice.records[i].mean_etp);
    CHECK(once.records[i].mean_realized_fdr == twice.records[i].mean_realized_fdr);
    CHECK(once.records[i].fdr_mc_se == 0.0);  // single rep has no spread
  }
}

TEST_CASE("run_sim2 varies the FDR level") {
  StudyConfig config = tiny_sim1();
  config.study_id = StudyId::kSim2;
  config.grid = {0.05, 0.30};
  config.repetitions = 12;
  auto result = run_sim2(config);
  REQUIRE(result.records.size() == 6);
  // the proposed design confirms more at the laxer level, up to MC noise
  const auto& strict = result.records[0];
  const auto& lax = result.records[3];
  REQUIRE(strict.method == kMethodProposed);
  REQUIRE(lax.method == kMethodProposed);
  CHECK(lax.mean_etp >=
        strict.mean_etp - 2.0 * std::hypot(lax.etp_mc_se, strict.etp_mc_se));
}

TEST_CASE("run_data_sweep returns one entry per cost with frontiers") {
  StudyConfig config;
  config.study_id = StudyId::kDataSweep;
  config.grid = {5.0, 50.0};
  config.repetitions = 1;
  config.base_inputs.m1 = 300;
  config.base_inputs.budget = currency_from_dollars(3'000);
  config.base_inputs.cost1 = currency_from_dollars(1);
  config.base_inputs.cost2 = currency_from_dollars(5);
  config.base_inputs.mc_reps = 5;
  config.base_inputs.a1_stride = 20;
  config.base_inputs.stage1_params = {.p = 0.05, .sigma0_sq = 1.0, .sigma_mu_sq = 4.0};
  config.seed = 3;
  auto entries = run_data_sweep(config);
  REQUIRE(entries.size() == 2);
  for (const auto& entry : entries) {
    CHECK(!entry.frontier.empty());
    const auto* best = &entry.frontier.front();
    for (const auto& eval : entry.frontier) {
      if (eval.expected_hits > best->expected_hits) best = &eval;
    }
    CHECK(entry.best.candidate == best->candidate);
  }
  // the sweep re-prices stage II, so feasible candidate sets differ
  CHECK(entries[0].frontier.size() > entries[1].frontier.size());
}

TEST_CASE("study config validation") {
  StudyConfig config = tiny_sim1();
  config.grid.clear();
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = tiny_sim1();
  config.repetitions = 0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = tiny_sim1();
  CHECK_THROWS_AS(run_sim2(config), std::invalid_argument);  // wrong study id
}
