#include "screenopt/fdr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "screenopt/gauss.hpp"

namespace screenopt {

double lfdr_statistic(double x, const StageModel& model) {
  model.validate();
  if (!std::isfinite(x)) throw std::invalid_argument("lfdr_statistic: x must be finite");
  const double p = model.params.p;
  if (p <= 0.0) return 1.0;
  if (p >= 1.0) return 0.0;
  // log-domain ratio keeps large |x| stable where f0 underflows
  const double log_null = std::log1p(-p) + norm_log_pdf(x, model.null_variance());
  const double log_alt = std::log(p) + norm_log_pdf(x, model.alt_variance());
  const double d = log_alt - log_null;
  if (d > 700.0) return 0.0;
  return 1.0 / (1.0 + std::exp(d));
}

std::vector<std::size_t> ascending_order(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  return order;
}

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("step-up: alpha must lie in (0,1)");
}

void check_unit_interval(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument(std::string("step-up: ") + what + " outside [0,1]");
  }
}

RejectionSet take_smallest(const std::vector<std::size_t>& order, std::size_t k) {
  RejectionSet result;
  result.threshold_rank = k;
  result.indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(result.indices.begin(), result.indices.end());
  return result;
}

}  // namespace

RejectionSet lfdr_step_up(std::span<const double> lfdr_values, double alpha) {
  check_alpha(alpha);
  check_unit_interval(lfdr_values, "Lfdr value");
  if (lfdr_values.empty()) return RejectionSet{};
  const auto order = ascending_order(lfdr_values);
  std::size_t k = 0;
  double running_sum = 0.0;
  for (std::size_t j = 0; j < order.size(); ++j) {
    running_sum += lfdr_values[order[j]];
    if (running_sum <= alpha * static_cast<double>(j + 1)) k = j + 1;
  }
  return take_smallest(order, k);
}

double two_sided_p_value(double xbar, double sigma0_sq, int r) {
  if (!std::isfinite(xbar)) throw std::invalid_argument("two_sided_p_value: xbar must be finite");
  const double sd = effective_null_sd(sigma0_sq, r);
  return two_sided_tail(xbar / sd);
}

RejectionSet bh_step_up(std::span<const double> p_values, double alpha) {
  check_alpha(alpha);
  check_unit_interval(p_values, "p-value");
  if (p_values.empty()) return RejectionSet{};
  const auto order = ascending_order(p_values);
  const double m = static_cast<double>(p_values.size());
  std::size_t k = 0;
  for (std::size_t j = 0; j < order.size(); ++j) {
    if (p_values[order[j]] <= alpha * static_cast<double>(j + 1) / m) k = j + 1;
  }
  return take_smallest(order, k);
}

double realized_fdp(const RejectionSet& rejected, std::span<const std::uint8_t> theta) {
  if (rejected.indices.empty()) return 0.0;
  std::size_t false_positives = 0;
  for (std::size_t idx : rejected.indices) {
    if (idx >= theta.size()) throw std::invalid_argument("realized_fdp: index out of bounds");
    if (theta[idx] == 0) ++false_positives;
  }
  return static_cast<double>(false_positives) / static_cast<double>(rejected.indices.size());
}

std::size_t true_positive_count(const RejectionSet& rejected,
                                std::span<const std::uint8_t> theta) {
  std::size_t count = 0;
  for (std::size_t idx : rejected.indices) {
    if (idx >= theta.size()) throw std::invalid_argument("true_positive_count: index out of bounds");
    if (theta[idx] != 0) ++count;
  }
  return count;
}

}  // namespace screenopt
