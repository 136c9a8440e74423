#pragma once

// Comparison procedures under the same total budget: one-stage replicated BH
// spends everything on stage I; two-stage replicated BH screens at a fixed
// ten replicates, carries |z| > 2, and confirms with BH at stage II.

#include <cstdint>

#include "screenopt/fdr.hpp"
#include "screenopt/mixture.hpp"
#include "screenopt/optimizer.hpp"

namespace screenopt {

enum class BaselineMethod { kOneStageBh, kTwoStageBh };

struct BaselineResult {
  BaselineMethod method = BaselineMethod::kOneStageBh;
  RejectionSet rejection;  // indices into the original library
  double realized_fdp = 0.0;
  std::size_t true_positives = 0;
  Currency spend = 0;
  int r1 = 0;
  int r2 = 0;           // 0 when no stage II ran
  std::size_t carried = 0;
};

// r1 = ceil(B / (c1 m1)); rounding up may exceed B by part of one pass
int one_stage_replicates(const DesignInputs& inputs);

// the world-taking overloads let callers share one latent truth across
// methods; the seed-only forms draw their own world
BaselineResult one_stage_bh(const DesignInputs& inputs, const WorldDraw& world,
                            std::uint64_t noise_seed);
BaselineResult one_stage_bh(const DesignInputs& inputs, std::uint64_t seed);

// set empirical_screen_sd to standardize the two-SD screen against the
// spread observed across compounds instead of the theoretical null SD
BaselineResult two_stage_bh(const DesignInputs& inputs, const WorldDraw& world,
                            std::uint64_t noise_seed, bool empirical_screen_sd = false);
BaselineResult two_stage_bh(const DesignInputs& inputs, std::uint64_t seed,
                            bool empirical_screen_sd = false);

}  // namespace screenopt
