#pragma once

// Grid search over feasible (r1, |A1|) designs: every candidate is scored by
// N Monte Carlo two-stage screens and the design with the largest expected
// number of confirmed hits wins. The FDR constraint is enforced inside each
// evaluation by the Lfdr step-up at stage II.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "screenopt/mixture.hpp"

namespace screenopt {

// currency in minor units so budget arithmetic is exact
using Currency = std::int64_t;

inline Currency currency_from_dollars(double dollars) {
  return static_cast<Currency>(std::llround(dollars * 100.0));
}
inline double currency_to_dollars(Currency cents) {
  return static_cast<double>(cents) / 100.0;
}

class InfeasibleBudgetError : public std::runtime_error {
 public:
  explicit InfeasibleBudgetError(const std::string& what) : std::runtime_error(what) {}
};

// which non-null proportion enters the stage-II Lfdr after selection
enum class Stage2Proportion {
  kRealized,  // fraction of theta = 1 among the carried set, per replicate
  kInherit,   // reuse the stage-I estimate p
};

// how the latent effects of carried compounds behave at stage II
enum class Stage2Latent {
  kCarryMu,   // the compound's effect is a fixed property; only noise is redrawn
  kRedrawMu,  // active effects are redrawn from N(0, sigma_mu_sq)
};

struct DesignInputs {
  std::int64_t m1 = 0;        // library size
  Currency budget = 0;        // B
  Currency cost1 = 0;         // c1 per stage-I replicate per compound
  Currency cost2 = 0;         // c2 per stage-II replicate per compound
  double precision_ratio = 3.0;
  double fdr_alpha = 0.05;
  int mc_reps = 100;          // N
  MixtureParams stage1_params;
  std::int64_t a1_stride = 1;
  std::optional<int> r1_max_override;
  Stage2Proportion stage2_p = Stage2Proportion::kRealized;
  Stage2Latent stage2_latent = Stage2Latent::kCarryMu;

  void validate() const;
};

// stage-II parameters: the precision ratio shrinks the noise variance only
MixtureParams default_stage2_params(const MixtureParams& stage1, double precision_ratio);

struct DesignCandidate {
  int r1 = 0;
  std::int64_t a1_size = 0;
  int r2 = 0;

  bool operator==(const DesignCandidate&) const = default;
};

struct CandidateEvaluation {
  DesignCandidate candidate;
  double expected_hits = 0.0;            // E|A2|
  double expected_true_positives = 0.0;  // E|A2 . theta|
  double mean_realized_fdp = 0.0;
  double hits_mc_se = 0.0;
  double tp_mc_se = 0.0;
  double fdp_mc_se = 0.0;
};

// largest stage-I replicate count the budget admits
int r1_upper_bound(const DesignInputs& inputs);

// floor((B - c1 r1 m1) / (c2 a1)); 0 signals infeasibility
int stage2_replicates(const DesignInputs& inputs, int r1, std::int64_t a1_size);

std::vector<DesignCandidate> enumerate_candidates(const DesignInputs& inputs);

CandidateEvaluation evaluate_candidate(const DesignCandidate& candidate,
                                       const DesignInputs& inputs, std::uint64_t seed,
                                       int threads = 1);

struct OptimizeResult {
  CandidateEvaluation best;
  std::vector<CandidateEvaluation> frontier;  // every evaluation, enumeration order
};

OptimizeResult optimize(const DesignInputs& inputs, std::uint64_t seed, int threads = 0);

// one realized two-stage run of a fixed design against a given latent truth;
// used by the study runners to compare methods on a shared world
struct DesignOutcome {
  std::size_t hits = 0;
  std::size_t true_positives = 0;
  double realized_fdp = 0.0;
};

DesignOutcome apply_design(const DesignCandidate& candidate, const DesignInputs& inputs,
                           const WorldDraw& world, std::uint64_t stage1_noise_seed,
                           std::uint64_t stage2_noise_seed);

}  // namespace screenopt
