#include "screenopt/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>

#include "screenopt/fdr.hpp"
#include "screenopt/gauss.hpp"
#include "screenopt/parallel.hpp"

namespace screenopt {

void DesignInputs::validate() const {
  stage1_params.validate();
  if (m1 < 1) throw std::invalid_argument("DesignInputs: m1 must be >= 1");
  if (cost1 <= 0 || cost2 <= 0) throw std::invalid_argument("DesignInputs: costs must be positive");
  if (budget < cost1 * m1 + cost2) {
    throw InfeasibleBudgetError(
        "DesignInputs: budget cannot cover one stage-I pass plus one stage-II measurement");
  }
  if (!(precision_ratio >= 1.0))
    throw std::invalid_argument("DesignInputs: precision_ratio must be >= 1");
  if (!(fdr_alpha > 0.0 && fdr_alpha < 1.0))
    throw std::invalid_argument("DesignInputs: fdr_alpha must lie in (0,1)");
  if (mc_reps < 1) throw std::invalid_argument("DesignInputs: mc_reps must be >= 1");
  if (a1_stride < 1) throw std::invalid_argument("DesignInputs: a1_stride must be >= 1");
  if (r1_max_override && *r1_max_override < 1)
    throw std::invalid_argument("DesignInputs: r1_max_override must be >= 1");
}

MixtureParams default_stage2_params(const MixtureParams& stage1, double precision_ratio) {
  MixtureParams stage2 = stage1;
  stage2.sigma0_sq = stage1.sigma0_sq / precision_ratio;
  return stage2;
}

int r1_upper_bound(const DesignInputs& inputs) {
  inputs.validate();
  std::int64_t bound = inputs.budget / (inputs.cost1 * inputs.m1);
  if (inputs.r1_max_override) bound = std::min<std::int64_t>(bound, *inputs.r1_max_override);
  return static_cast<int>(bound);
}

int stage2_replicates(const DesignInputs& inputs, int r1, std::int64_t a1_size) {
  const std::int64_t remaining = inputs.budget - inputs.cost1 * r1 * inputs.m1;
  if (remaining <= 0 || a1_size < 1) return 0;
  const std::int64_t r2 = remaining / (inputs.cost2 * a1_size);
  return static_cast<int>(std::min<std::int64_t>(r2, 1'000'000'000));
}

std::vector<DesignCandidate> enumerate_candidates(const DesignInputs& inputs) {
  inputs.validate();
  std::vector<DesignCandidate> candidates;
  const int r1_max = r1_upper_bound(inputs);
  for (int r1 = 1; r1 <= r1_max; ++r1) {
    const std::int64_t remaining = inputs.budget - inputs.cost1 * r1 * inputs.m1;
    if (remaining < inputs.cost2) continue;  // stage II unaffordable at this r1
    const std::int64_t a1_max = std::min(remaining / inputs.cost2, inputs.m1);
    for (std::int64_t a1 = 1; a1 <= a1_max; a1 += inputs.a1_stride) {
      const int r2 = stage2_replicates(inputs, r1, a1);
      if (r2 < 1) continue;
      candidates.push_back(DesignCandidate{r1, a1, r2});
    }
  }
  if (candidates.empty()) {
    throw InfeasibleBudgetError("enumerate_candidates: no feasible design under the budget");
  }
  return candidates;
}

namespace {

// selection order: descending |x|, ties by index; this is ascending Lfdr
// under the symmetric mixture
std::vector<std::uint32_t> rank_by_significance(const std::vector<double>& values,
                                                std::int64_t keep) {
  std::vector<std::uint32_t> order(values.size());
  std::iota(order.begin(), order.end(), 0u);
  const auto more_significant = [&](std::uint32_t a, std::uint32_t b) {
    const double fa = std::abs(values[a]);
    const double fb = std::abs(values[b]);
    if (fa != fb) return fa > fb;
    return a < b;
  };
  if (keep < static_cast<std::int64_t>(values.size())) {
    std::partial_sort(order.begin(), order.begin() + keep, order.end(), more_significant);
    order.resize(static_cast<std::size_t>(keep));
  } else {
    std::sort(order.begin(), order.end(), more_significant);
  }
  return order;
}

// stage-I screen reduced to the ranked prefix of (theta, mu)
struct RankedScreen {
  std::vector<std::uint8_t> theta;
  std::vector<double> mu;
};

RankedScreen ranked_stage1(const DesignInputs& inputs, int r1, std::int64_t prefix,
                           std::uint64_t seed, int rep) {
  RngStream rng(derive_stream(
      seed, {streams::kStage1Noise, static_cast<std::uint64_t>(r1),
             static_cast<std::uint64_t>(rep)}));
  const StageModel model{.params = inputs.stage1_params, .replicates = r1};
  WorldDraw world = draw_world(model.params, static_cast<std::size_t>(inputs.m1), rng);
  const std::vector<double> values = measure_world(world, model, rng);
  const auto order = rank_by_significance(values, std::min<std::int64_t>(prefix, inputs.m1));

  RankedScreen ranked;
  ranked.theta.resize(order.size());
  ranked.mu.resize(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    ranked.theta[i] = world.theta[order[i]];
    ranked.mu[i] = world.mu[order[i]];
  }
  return ranked;
}

// fast Lfdr evaluation with the per-model constants hoisted out of the loop;
// matches lfdr_statistic (cross-checked in tests)
struct LfdrEvaluator {
  double c0, c1, inv0, inv1;
  bool all_null, all_signal;

  LfdrEvaluator(double p, double null_var, double alt_var)
      : c0(0.0), c1(0.0), inv0(0.5 / null_var), inv1(0.5 / alt_var),
        all_null(p <= 0.0), all_signal(p >= 1.0) {
    if (!all_null && !all_signal) {
      c0 = std::log1p(-p) - 0.5 * std::log(null_var);
      c1 = std::log(p) - 0.5 * std::log(alt_var);
    }
  }

  double operator()(double x) const {
    if (all_null) return 1.0;
    if (all_signal) return 0.0;
    const double x2 = x * x;
    const double d = (c1 - x2 * inv1) - (c0 - x2 * inv0);
    if (d > 700.0) return 0.0;
    return 1.0 / (1.0 + std::exp(d));
  }
};

struct StepUpOutcome {
  std::size_t rejected = 0;
  std::size_t true_positives = 0;
};

// rejection count of the Lfdr step-up plus the true-positive count; same rule
// as lfdr_step_up with (value, index) ordering, without materializing the set
StepUpOutcome step_up_outcome(const std::vector<double>& lfdr,
                              std::span<const std::uint8_t> theta, double alpha,
                              std::vector<std::uint32_t>& scratch) {
  scratch.resize(lfdr.size());
  std::iota(scratch.begin(), scratch.end(), 0u);
  std::stable_sort(scratch.begin(), scratch.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return lfdr[a] < lfdr[b]; });
  std::size_t k = 0;
  double running = 0.0;
  for (std::size_t j = 0; j < scratch.size(); ++j) {
    running += lfdr[scratch[j]];
    if (running <= alpha * static_cast<double>(j + 1)) k = j + 1;
  }
  StepUpOutcome outcome;
  outcome.rejected = k;
  for (std::size_t j = 0; j < k; ++j) {
    if (theta[scratch[j]]) ++outcome.true_positives;
  }
  return outcome;
}

struct Stage2Scratch {
  std::vector<double> values;
  std::vector<double> lfdr;
  std::vector<std::uint32_t> order;
};

// confirmatory stage for a carried set: simulate stage-II measurements, apply
// the Lfdr step-up at the nominal level
StepUpOutcome confirm_stage2(std::span<const std::uint8_t> sel_theta,
                             std::span<const double> sel_mu, const DesignInputs& inputs,
                             int r2, RngStream& rng, Stage2Scratch& scratch) {
  const MixtureParams stage2 =
      default_stage2_params(inputs.stage1_params, inputs.precision_ratio);
  const double noise_sd = effective_null_sd(stage2.sigma0_sq, r2);
  const double mu_sd = std::sqrt(stage2.sigma_mu_sq);
  const double null_var = noise_sd * noise_sd;
  const double alt_var = stage2.sigma_mu_sq + null_var;
  const std::size_t a1 = sel_theta.size();

  scratch.values.resize(a1);
  scratch.lfdr.resize(a1);
  std::size_t carried_active = 0;
  for (std::size_t i = 0; i < a1; ++i) {
    if (sel_theta[i]) {
      ++carried_active;
      const double mu = inputs.stage2_latent == Stage2Latent::kCarryMu
                            ? sel_mu[i]
                            : mu_sd * rng.next_normal();
      scratch.values[i] = mu + noise_sd * rng.next_normal();
    } else {
      scratch.values[i] = noise_sd * rng.next_normal();
    }
  }

  const double p2 = inputs.stage2_p == Stage2Proportion::kRealized
                        ? static_cast<double>(carried_active) / static_cast<double>(a1)
                        : inputs.stage1_params.p;
  const LfdrEvaluator eval(p2, null_var, alt_var);
  for (std::size_t i = 0; i < a1; ++i) scratch.lfdr[i] = eval(scratch.values[i]);
  return step_up_outcome(scratch.lfdr, sel_theta, inputs.fdr_alpha, scratch.order);
}

struct Accumulator {
  double sum = 0.0, sum_sq = 0.0;
  void add(double x) {
    sum += x;
    sum_sq += x * x;
  }
  double mean(int n) const { return sum / n; }
  double se(int n) const {
    if (n < 2) return 0.0;
    const double m = mean(n);
    const double var = std::max(0.0, (sum_sq - n * m * m) / (n - 1));
    return std::sqrt(var / n);
  }
};

CandidateEvaluation evaluate_against_cache(const DesignCandidate& candidate,
                                           const DesignInputs& inputs,
                                           const std::vector<RankedScreen>& cache,
                                           std::uint64_t seed) {
  const Currency spend = inputs.cost1 * candidate.r1 * inputs.m1 +
                         inputs.cost2 * candidate.r2 * candidate.a1_size;
  if (spend > inputs.budget) {
    throw std::logic_error("evaluate_candidate: candidate overspends the budget");
  }
  const std::size_t a1 = static_cast<std::size_t>(candidate.a1_size);

  Accumulator hits, tps, fdps;
  Stage2Scratch scratch;
  for (int rep = 0; rep < inputs.mc_reps; ++rep) {
    const RankedScreen& ranked = cache[static_cast<std::size_t>(rep)];
    RngStream rng(derive_stream(
        seed, {streams::kStage2Noise, static_cast<std::uint64_t>(candidate.r1),
               static_cast<std::uint64_t>(candidate.a1_size),
               static_cast<std::uint64_t>(rep)}));
    const StepUpOutcome outcome =
        confirm_stage2(std::span(ranked.theta).first(a1), std::span(ranked.mu).first(a1),
                       inputs, candidate.r2, rng, scratch);
    hits.add(static_cast<double>(outcome.rejected));
    tps.add(static_cast<double>(outcome.true_positives));
    fdps.add(outcome.rejected == 0
                 ? 0.0
                 : static_cast<double>(outcome.rejected - outcome.true_positives) /
                       static_cast<double>(outcome.rejected));
  }

  CandidateEvaluation eval;
  eval.candidate = candidate;
  eval.expected_hits = hits.mean(inputs.mc_reps);
  eval.expected_true_positives = tps.mean(inputs.mc_reps);
  eval.mean_realized_fdp = fdps.mean(inputs.mc_reps);
  eval.hits_mc_se = hits.se(inputs.mc_reps);
  eval.tp_mc_se = tps.se(inputs.mc_reps);
  eval.fdp_mc_se = fdps.se(inputs.mc_reps);
  return eval;
}

// evaluates all candidates that share one r1; the stage-I screens are keyed by
// (r1, rep) only, so cached and standalone evaluations are bit-identical
std::vector<CandidateEvaluation> evaluate_r1_group(const std::vector<DesignCandidate>& group,
                                                   const DesignInputs& inputs,
                                                   std::uint64_t seed, int threads) {
  const int r1 = group.front().r1;
  std::int64_t max_a1 = 0;
  for (const auto& c : group) max_a1 = std::max(max_a1, c.a1_size);

  std::vector<RankedScreen> cache(static_cast<std::size_t>(inputs.mc_reps));
  parallel_for(static_cast<std::size_t>(inputs.mc_reps), threads, [&](std::size_t rep) {
    cache[rep] = ranked_stage1(inputs, r1, max_a1, seed, static_cast<int>(rep));
  });

  std::vector<CandidateEvaluation> evals(group.size());
  parallel_for(group.size(), threads, [&](std::size_t i) {
    evals[i] = evaluate_against_cache(group[i], inputs, cache, seed);
  });
  return evals;
}

}  // namespace

CandidateEvaluation evaluate_candidate(const DesignCandidate& candidate,
                                       const DesignInputs& inputs, std::uint64_t seed,
                                       int threads) {
  inputs.validate();
  if (candidate.r1 < 1 || candidate.a1_size < 1 || candidate.a1_size > inputs.m1 ||
      candidate.r2 < 1) {
    throw std::invalid_argument("evaluate_candidate: candidate outside enumeration bounds");
  }
  if (threads <= 0) threads = default_thread_count();
  return evaluate_r1_group({candidate}, inputs, seed, threads).front();
}

OptimizeResult optimize(const DesignInputs& inputs, std::uint64_t seed, int threads) {
  if (threads <= 0) threads = default_thread_count();
  const std::vector<DesignCandidate> candidates = enumerate_candidates(inputs);

  OptimizeResult result;
  result.frontier.reserve(candidates.size());
  std::size_t begin = 0;
  while (begin < candidates.size()) {
    std::size_t end = begin;
    while (end < candidates.size() && candidates[end].r1 == candidates[begin].r1) ++end;
    const std::vector<DesignCandidate> group(candidates.begin() + begin,
                                             candidates.begin() + end);
    auto evals = evaluate_r1_group(group, inputs, seed, threads);
    result.frontier.insert(result.frontier.end(), evals.begin(), evals.end());
    begin = end;
  }

  // ties break toward cheaper stage I: enumeration order is (r1, a1) ascending
  const CandidateEvaluation* best = &result.frontier.front();
  for (const auto& eval : result.frontier) {
    if (eval.expected_hits > best->expected_hits) best = &eval;
  }
  result.best = *best;
  return result;
}

DesignOutcome apply_design(const DesignCandidate& candidate, const DesignInputs& inputs,
                           const WorldDraw& world, std::uint64_t stage1_noise_seed,
                           std::uint64_t stage2_noise_seed) {
  inputs.validate();
  const StageModel model1{.params = inputs.stage1_params, .replicates = candidate.r1};
  RngStream stage1_rng(stage1_noise_seed);
  const std::vector<double> values = measure_world(world, model1, stage1_rng);
  const auto order = rank_by_significance(values, candidate.a1_size);

  std::vector<std::uint8_t> sel_theta(order.size());
  std::vector<double> sel_mu(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    sel_theta[i] = world.theta[order[i]];
    sel_mu[i] = world.mu[order[i]];
  }

  RngStream stage2_rng(stage2_noise_seed);
  Stage2Scratch scratch;
  const StepUpOutcome outcome =
      confirm_stage2(sel_theta, sel_mu, inputs, candidate.r2, stage2_rng, scratch);
  DesignOutcome result;
  result.hits = outcome.rejected;
  result.true_positives = outcome.true_positives;
  result.realized_fdp =
      outcome.rejected == 0
          ? 0.0
          : static_cast<double>(outcome.rejected - outcome.true_positives) /
                static_cast<double>(outcome.rejected);
  return result;
}

}  // namespace screenopt
