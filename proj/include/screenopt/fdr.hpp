#pragma once

// Lfdr statistic, Lfdr and Benjamini-Hochberg step-up procedures, two-sided
// p-values for replicate means, and realized error/power metrics.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "screenopt/mixture.hpp"

namespace screenopt {

struct RejectionSet {
  std::vector<std::size_t> indices;  // rejected positions, ascending
  std::size_t threshold_rank = 0;    // k of the step-up rule; 0 when empty
};

// posterior probability of null given x under the stage's mixture; in [0, 1]
double lfdr_statistic(double x, const StageModel& model);

// ranks ascending (ties by original index) and rejects the k smallest where
// k = max{ j : (1/j) sum_{i<=j} Lfdr_(i) <= alpha }
RejectionSet lfdr_step_up(std::span<const double> lfdr_values, double alpha);

// 2 (1 - Phi(|xbar| sqrt(r) / sigma0))
double two_sided_p_value(double xbar, double sigma0_sq, int r);

// k = max{ j : p_(j) <= j alpha / m }
RejectionSet bh_step_up(std::span<const double> p_values, double alpha);

// (# rejected with theta=0) / max(1, # rejected); 0 when nothing is rejected
double realized_fdp(const RejectionSet& rejected, std::span<const std::uint8_t> theta);

std::size_t true_positive_count(const RejectionSet& rejected,
                                std::span<const std::uint8_t> theta);

// ranking order used for stage-I selection: ascending Lfdr, ties by index;
// under the symmetric model this equals descending |x|
std::vector<std::size_t> ascending_order(std::span<const double> values);

}  // namespace screenopt
