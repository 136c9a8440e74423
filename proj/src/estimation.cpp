#include "screenopt/estimation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "screenopt/gauss.hpp"
#include "screenopt/parallel.hpp"

namespace screenopt {

namespace {

constexpr double kPFloor = 1e-6;  // keeps log p / log(1-p) finite during search

double median_of(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid - 1), v.end());
  return 0.5 * (hi + v[mid - 1]);
}

// squared robust scale from the median absolute deviation
double mad_variance(std::span<const double> values) {
  std::vector<double> buf(values.begin(), values.end());
  const double med = median_of(buf);
  for (auto& x : buf) x = std::abs(x - med);
  const double mad = median_of(std::move(buf));
  const double sd = mad * 1.4826022185056018;
  return std::max(sd * sd, 1e-12);
}

double second_moment(std::span<const double> values) {
  double s = 0.0, c = 0.0;
  for (double x : values) {  // Kahan
    const double y = x * x - c;
    const double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s / static_cast<double>(values.size());
}

double clamp_p(double p) { return std::clamp(p, kPFloor, 1.0 - kPFloor); }

struct EmState {
  double p, sigma0_sq, sigma1_sq;  // sigma1_sq = sigma0_sq + sigma_mu_sq
};

// one EM sweep; returns the log-likelihood at the *input* state
double em_sweep(std::span<const double> values, EmState& state) {
  const double log_w1 = std::log(state.p);
  const double log_w0 = std::log1p(-state.p);
  const double inv0 = 0.5 / state.sigma0_sq;
  const double inv1 = 0.5 / state.sigma1_sq;
  const double c0 = log_w0 - 0.5 * std::log(state.sigma0_sq) - kLogSqrt2Pi;
  const double c1 = log_w1 - 0.5 * std::log(state.sigma1_sq) - kLogSqrt2Pi;

  double loglik = 0.0;
  double sum_w = 0.0, sum_w_x2 = 0.0, sum_x2 = 0.0;
  for (double x : values) {
    const double x2 = x * x;
    const double a = c0 - x2 * inv0;
    const double b = c1 - x2 * inv1;
    const double hi = std::max(a, b);
    const double lse = hi + std::log1p(std::exp(std::min(a, b) - hi));
    loglik += lse;
    const double w = std::exp(b - lse);  // responsibility of the signal component
    sum_w += w;
    sum_w_x2 += w * x2;
    sum_x2 += x2;
  }
  const double n = static_cast<double>(values.size());
  const double new_p = clamp_p(sum_w / n);
  double new_s1 = sum_w > 1e-12 ? sum_w_x2 / sum_w : state.sigma1_sq;
  double new_s0 = (n - sum_w) > 1e-12 ? (sum_x2 - sum_w_x2) / (n - sum_w) : state.sigma0_sq;
  new_s0 = std::max(new_s0, 1e-12);
  new_s1 = std::max(new_s1, 1e-12);
  if (new_s1 < new_s0) {  // relabel so the wider component is the signal
    std::swap(new_s0, new_s1);
    state.p = clamp_p(1.0 - new_p);
  } else {
    state.p = new_p;
  }
  state.sigma0_sq = new_s0;
  state.sigma1_sq = new_s1;
  return loglik;
}

MixtureParams params_from(const EmState& s) {
  return MixtureParams{.p = s.p,
                       .sigma0_sq = s.sigma0_sq,
                       .sigma_mu_sq = std::max(0.0, s.sigma1_sq - s.sigma0_sq)};
}

bool boundary_collapse(const MixtureParams& params) {
  // p near 0/1, vanishing signal variance, or vanishing signal mass p*sigma_mu_sq
  // (the likelihood ridge of null-like data)
  return params.p <= 2e-3 || params.p >= 1.0 - 2e-3 ||
         params.sigma_mu_sq <= 0.02 * params.sigma0_sq ||
         params.p * params.sigma_mu_sq <= 0.02 * params.sigma0_sq;
}

struct ParamCovariance {
  std::array<std::array<double, 3>, 3> cov{};  // order: p, sigma0_sq, sigma_mu_sq
  bool ok = false;
};

ParamCovariance hessian_covariance(std::span<const double> values, const MixtureParams& at);

// observed-information standard errors via a central-difference Hessian of the
// log-likelihood in (p, sigma0_sq, sigma_mu_sq)
ParamUncertainty hessian_se(std::span<const double> values, const MixtureParams& at,
                            bool* ok) {
  const ParamCovariance pc = hessian_covariance(values, at);
  *ok = pc.ok;
  if (pc.ok) {
    return ParamUncertainty{.p = std::sqrt(pc.cov[0][0]),
                            .sigma0_sq = std::sqrt(pc.cov[1][1]),
                            .sigma_mu_sq = std::sqrt(pc.cov[2][2])};
  }
  // fallback: parameter-scale uncertainty so downstream checks stay finite
  return ParamUncertainty{.p = std::max(0.05, at.p),
                          .sigma0_sq = 0.5 * at.sigma0_sq,
                          .sigma_mu_sq = std::max(0.5 * at.sigma_mu_sq, 0.25 * at.sigma0_sq)};
}

ParamCovariance hessian_covariance(std::span<const double> values, const MixtureParams& at) {
  const std::array<double, 3> center{at.p, at.sigma0_sq, at.sigma_mu_sq};
  const std::array<double, 3> step{
      std::max(1e-6, 0.02 * std::min(at.p, 1.0 - at.p)),
      std::max(1e-8, 1e-3 * at.sigma0_sq),
      std::max(1e-8, 1e-3 * std::max(at.sigma_mu_sq, 0.05 * at.sigma0_sq))};

  const auto eval = [&](std::array<double, 3> q) {
    q[0] = clamp_p(q[0]);
    q[1] = std::max(q[1], 1e-12);
    q[2] = std::max(q[2], 0.0);
    return log_likelihood(values, {.p = q[0], .sigma0_sq = q[1], .sigma_mu_sq = q[2]});
  };

  std::array<std::array<double, 3>, 3> hess{};
  const double f0 = eval(center);
  for (int i = 0; i < 3; ++i) {
    auto plus = center, minus = center;
    plus[i] += step[i];
    minus[i] -= step[i];
    hess[i][i] = (eval(plus) - 2.0 * f0 + eval(minus)) / (step[i] * step[i]);
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      auto pp = center, pm = center, mp = center, mm = center;
      pp[i] += step[i]; pp[j] += step[j];
      pm[i] += step[i]; pm[j] -= step[j];
      mp[i] -= step[i]; mp[j] += step[j];
      mm[i] -= step[i]; mm[j] -= step[j];
      hess[i][j] = hess[j][i] =
          (eval(pp) - eval(pm) - eval(mp) + eval(mm)) / (4.0 * step[i] * step[j]);
    }
  }

  // covariance = inverse of the negated Hessian (3x3 adjugate)
  std::array<std::array<double, 3>, 3> info{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) info[i][j] = -hess[i][j];
  const double det = info[0][0] * (info[1][1] * info[2][2] - info[1][2] * info[2][1]) -
                     info[0][1] * (info[1][0] * info[2][2] - info[1][2] * info[2][0]) +
                     info[0][2] * (info[1][0] * info[2][1] - info[1][1] * info[2][0]);
  ParamCovariance result;
  if (std::abs(det) < 1e-300) return result;
  const auto cof = [&](int i, int j) {
    const int r0 = (i + 1) % 3, r1 = (i + 2) % 3;
    const int c0 = (j + 1) % 3, c1 = (j + 2) % 3;
    return info[r0][c0] * info[r1][c1] - info[r0][c1] * info[r1][c0];
  };
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) result.cov[i][j] = cof(j, i) / det;
  }
  if (result.cov[0][0] <= 0.0 || result.cov[1][1] <= 0.0 || result.cov[2][2] <= 0.0)
    return result;
  result.ok = true;
  return result;
}

}  // namespace

void PriorConfig::validate() const {
  if (!(prior_exponent_alpha > -1.0))
    throw std::invalid_argument("PriorConfig: prior_exponent_alpha must exceed -1");
  if (importance_samples < 1000)
    throw std::invalid_argument("PriorConfig: importance_samples must be >= 1000");
}

std::pair<std::vector<double>, double> demean(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("demean: empty input");
  double s = 0.0, c = 0.0;
  for (double x : values) {
    const double y = x - c;
    const double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  const double mean = s / static_cast<double>(values.size());
  std::vector<double> shifted(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) shifted[i] = values[i] - mean;
  return {std::move(shifted), mean};
}

double log_likelihood(std::span<const double> values, const MixtureParams& params) {
  params.validate();
  const double p = clamp_p(params.p);
  const double s0 = params.sigma0_sq;
  const double s1 = params.sigma0_sq + params.sigma_mu_sq;
  const double c0 = std::log1p(-p) - 0.5 * std::log(s0) - kLogSqrt2Pi;
  const double c1 = std::log(p) - 0.5 * std::log(s1) - kLogSqrt2Pi;
  const double inv0 = 0.5 / s0;
  const double inv1 = 0.5 / s1;
  double sum = 0.0, comp = 0.0;
  for (double x : values) {
    if (!std::isfinite(x)) throw std::invalid_argument("log_likelihood: non-finite value");
    const double x2 = x * x;
    const double a = c0 - x2 * inv0;
    const double b = c1 - x2 * inv1;
    const double hi = std::max(a, b);
    const double term = hi + std::log1p(std::exp(std::min(a, b) - hi));
    const double y = term - comp;  // Kahan
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

EstimationResult estimate_em(std::span<const double> values, double tolerance,
                             int max_iters) {
  if (values.size() < 3) throw std::invalid_argument("estimate_em: too few values");
  if (!(tolerance > 0.0)) throw std::invalid_argument("estimate_em: tolerance must be positive");

  const double s_robust = mad_variance(values);
  const double m2 = second_moment(values);
  EmState state;
  state.sigma0_sq = s_robust;
  state.sigma1_sq = std::max({m2 * 1.2, s_robust * 2.0, 1e-10});
  // crude exceedance-based start for p
  std::size_t exceed = 0;
  const double cut = 2.0 * std::sqrt(s_robust);
  for (double x : values) {
    if (std::abs(x) > cut) ++exceed;
  }
  const double frac = static_cast<double>(exceed) / static_cast<double>(values.size());
  state.p = clamp_p(std::clamp((frac - 0.0455) / 0.5, 1e-3, 0.5));

  EstimationResult result;
  result.method = EstimationMethod::kEm;
  double prev = -std::numeric_limits<double>::infinity();
  int iter = 0;
  for (; iter < max_iters; ++iter) {
    EmState before = state;
    const double loglik = em_sweep(values, state);
    result.log_likelihood_trace.push_back(loglik);
    if (loglik + 1e-9 * std::abs(loglik) < prev) {
      throw std::logic_error("estimate_em: log-likelihood decreased");
    }
    if (iter > 0 && loglik - prev < tolerance) {
      state = before;  // parameters that produced the converged likelihood
      prev = loglik;
      ++iter;
      break;
    }
    prev = loglik;
  }
  result.iterations = iter;
  result.params = params_from(state);
  if (iter == max_iters) {
    // loop exhausted: report the likelihood of the params actually returned
    prev = log_likelihood(values, result.params);
  }
  result.log_likelihood_value = prev;
  result.degenerate = boundary_collapse(result.params);

  bool hess_ok = false;
  result.posterior_sd = hessian_se(values, result.params, &hess_ok);
  if (!hess_ok) result.degenerate = true;
  result.effective_sample_size = static_cast<double>(values.size());
  return result;
}

// Marsaglia-Tsang
double next_gamma(RngStream& rng, double shape) {
  if (!(shape > 0.0)) throw std::invalid_argument("next_gamma: shape must be positive");
  if (shape < 1.0) {
    const double u = rng.next_unit();
    return next_gamma(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.next_normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.next_unit();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double next_beta(RngStream& rng, double a, double b) {
  const double ga = next_gamma(rng, a);
  const double gb = next_gamma(rng, b);
  return ga / (ga + gb);
}

namespace {

double beta_log_pdf(double x, double a, double b) {
  if (x <= 0.0 || x >= 1.0) return -std::numeric_limits<double>::infinity();
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) + std::lgamma(a + b) -
         std::lgamma(a) - std::lgamma(b);
}

struct BetaMix {
  double a_narrow, b_narrow;
  double a_wide, b_wide;
  double wide_prob;

  double sample(RngStream& rng) const {
    return rng.next_bernoulli(wide_prob) ? next_beta(rng, a_wide, b_wide)
                                         : next_beta(rng, a_narrow, b_narrow);
  }
  double log_pdf(double x) const {
    const double n = beta_log_pdf(x, a_narrow, b_narrow);
    const double w = beta_log_pdf(x, a_wide, b_wide);
    const double hi = std::max(n + std::log1p(-wide_prob), w + std::log(wide_prob));
    const double lo = std::min(n + std::log1p(-wide_prob), w + std::log(wide_prob));
    return hi + std::log1p(std::exp(lo - hi));
  }
};

// correlated proposal for (sigma0_sq, total variance) on the log scale; the
// wide component shares the shape with 4x the spread
struct ScalePairMix {
  double center0, center1;        // log sigma0_sq, log total
  double l00, l10, l11;           // Cholesky factor of the narrow covariance
  double wide_prob;
  static constexpr double kWideFactor = 4.0;

  std::pair<double, double> sample(RngStream& rng) const {
    const double f = rng.next_bernoulli(wide_prob) ? kWideFactor : 1.0;
    const double z0 = rng.next_normal();
    const double z1 = rng.next_normal();
    const double u0 = center0 + f * l00 * z0;
    const double u1 = center1 + f * (l10 * z0 + l11 * z1);
    return {std::exp(u0), std::exp(u1)};
  }

  double component_log_pdf(double x0, double x1, double f) const {
    // forward-solve (f L) y = u, then the Gaussian density plus log-normal Jacobian
    const double u0 = std::log(x0) - center0;
    const double u1 = std::log(x1) - center1;
    const double y0 = u0 / (f * l00);
    const double y1 = (u1 - f * l10 * y0) / (f * l11);
    return -0.5 * (y0 * y0 + y1 * y1) - std::log(2.0 * std::numbers::pi) -
           std::log(f * l00) - std::log(f * l11) - std::log(x0) - std::log(x1);
  }

  double log_pdf(double x0, double x1) const {
    if (x0 <= 0.0 || x1 <= 0.0) return -std::numeric_limits<double>::infinity();
    const double n = component_log_pdf(x0, x1, 1.0) + std::log1p(-wide_prob);
    const double w = component_log_pdf(x0, x1, kWideFactor) + std::log(wide_prob);
    const double hi = std::max(n, w);
    return hi + std::log1p(std::exp(std::min(n, w) - hi));
  }
};

// fit Beta(a,b) to a mean and standard deviation, keeping some mass everywhere
BetaMix make_p_proposal(double mean, double sd, double prior_alpha) {
  const double m = std::clamp(mean, 1e-4, 0.95);
  const double s = std::clamp(sd, 1e-4, 0.45);
  double kappa = m * (1.0 - m) / (s * s) - 1.0;
  kappa = std::clamp(kappa, 1.5, 1e7);
  BetaMix mix;
  mix.a_narrow = std::max(m * kappa, 0.05);
  mix.b_narrow = std::max((1.0 - m) * kappa, 0.05);
  // wide component is the prior itself, Beta(1, alpha + 1)
  mix.a_wide = 1.0;
  mix.b_wide = prior_alpha + 1.0;
  mix.wide_prob = 0.15;
  return mix;
}

// 2x2 covariance of (log sigma0_sq, log total) from the pilot covariance of
// (sigma0_sq, sigma_mu_sq) by the delta method, inflated and floored
ScalePairMix make_scale_proposal(double s0, double total, double var_s0, double cov_s0_smu,
                                 double var_smu) {
  constexpr double kInflate = 9.0;  // 3x on the standard deviation
  double c00 = kInflate * var_s0 / (s0 * s0);
  double c11 = kInflate * (var_s0 + 2.0 * cov_s0_smu + var_smu) / (total * total);
  double c01 = kInflate * (var_s0 + cov_s0_smu) / (s0 * total);
  c00 = std::clamp(c00, 4e-4, 1.0);
  c11 = std::clamp(c11, 4e-4, 1.0);
  const double bound = 0.95 * std::sqrt(c00 * c11);
  c01 = std::clamp(c01, -bound, bound);

  ScalePairMix mix;
  mix.center0 = std::log(std::max(s0, 1e-12));
  mix.center1 = std::log(std::max(total, 1e-12));
  mix.l00 = std::sqrt(c00);
  mix.l10 = c01 / mix.l00;
  mix.l11 = std::sqrt(c11 - mix.l10 * mix.l10);
  mix.wide_prob = 0.15;
  return mix;
}

}  // namespace

EstimationResult estimate_mc(std::span<const double> values, const PriorConfig& config,
                             std::uint64_t seed, int threads) {
  config.validate();
  if (values.size() < 3) throw std::invalid_argument("estimate_mc: too few values");
  if (threads <= 0) threads = default_thread_count();

  // pilot fit centers the proposal; robust moments are the fallback
  double center_p = 0.05, center_s0 = mad_variance(values);
  double center_total = std::max(second_moment(values), center_s0 * 1.05);
  double sd_p = 0.04;
  double var_s0 = 0.01 * center_s0 * center_s0;
  double var_smu = 0.04 * center_total * center_total;
  double cov_s0_smu = 0.0;
  try {
    const EstimationResult pilot = estimate_em(values, 1e-6, 500);
    const ParamCovariance pc = hessian_covariance(values, pilot.params);
    if (!pilot.degenerate && pc.ok) {
      center_p = pilot.params.p;
      center_s0 = pilot.params.sigma0_sq;
      center_total = pilot.params.sigma0_sq + pilot.params.sigma_mu_sq;
      sd_p = std::max(3.0 * std::sqrt(pc.cov[0][0]), 0.25 * center_p);
      var_s0 = pc.cov[1][1];
      var_smu = pc.cov[2][2];
      cov_s0_smu = pc.cov[1][2];
    }
  } catch (const std::exception&) {
    // keep fallback centers
  }

  const BetaMix q_p = make_p_proposal(center_p, sd_p, config.prior_exponent_alpha);
  const ScalePairMix q_scales =
      make_scale_proposal(center_s0, center_total, var_s0, cov_s0_smu, var_smu);

  const std::size_t n_draws = config.importance_samples;
  std::vector<double> draw_p(n_draws), draw_s0(n_draws), draw_smu(n_draws);
  std::vector<double> log_w(n_draws);
  const double alpha = config.prior_exponent_alpha;

  for (std::size_t i = 0; i < n_draws; ++i) {
    RngStream rng(derive_stream(seed, {streams::kEstimation, static_cast<std::uint64_t>(i)}));
    const double p = q_p.sample(rng);
    const auto [s0, total] = q_scales.sample(rng);
    draw_p[i] = p;
    draw_s0[i] = s0;
    draw_smu[i] = total - s0;
    if (total <= s0 || p <= 0.0 || p >= 1.0) {
      log_w[i] = -std::numeric_limits<double>::infinity();  // outside the support
      continue;
    }
    const double log_prior = alpha * std::log1p(-p) - 2.0 * std::log(total);
    const double log_q = q_p.log_pdf(p) + q_scales.log_pdf(s0, total);
    log_w[i] = log_prior - log_q;  // likelihood added below, in parallel
  }

  parallel_for(n_draws, threads, [&](std::size_t i) {
    if (!std::isfinite(log_w[i])) return;
    log_w[i] += log_likelihood(
        values, {.p = draw_p[i], .sigma0_sq = draw_s0[i], .sigma_mu_sq = draw_smu[i]});
  });

  // fixed-order self-normalization keeps results identical for any thread count
  double max_lw = -std::numeric_limits<double>::infinity();
  for (double lw : log_w) max_lw = std::max(max_lw, lw);
  if (!std::isfinite(max_lw)) {
    throw DegenerateWeightsError(
        "estimate_mc: all importance weights vanished; increase importance_samples "
        "or widen the proposal");
  }
  std::vector<double> weight(n_draws);
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < n_draws; ++i) {
    weight[i] = std::isfinite(log_w[i]) ? std::exp(log_w[i] - max_lw) : 0.0;
    weight_sum += weight[i];
  }
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < n_draws; ++i) {
    weight[i] /= weight_sum;
    sum_sq += weight[i] * weight[i];
  }
  const double ess = 1.0 / sum_sq;
  if (ess < 50.0) {
    throw DegenerateWeightsError(
        "estimate_mc: effective sample size " + std::to_string(ess) +
        " is below 50; increase importance_samples or use a different proposal");
  }

  const auto weighted_summary = [&](const std::vector<double>& h, double* mean_out,
                                    double* sd_out) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n_draws; ++i) mean += weight[i] * h[i];
    double var = 0.0, mcse_sq = 0.0;
    for (std::size_t i = 0; i < n_draws; ++i) {
      const double d = h[i] - mean;
      var += weight[i] * d * d;
      mcse_sq += weight[i] * weight[i] * d * d;
    }
    *mean_out = mean;
    // posterior spread plus the Monte Carlo error of the mean estimate
    *sd_out = std::sqrt(var + mcse_sq);
  };

  EstimationResult result;
  result.method = EstimationMethod::kImportanceSampling;
  result.effective_sample_size = ess;
  weighted_summary(draw_p, &result.params.p, &result.posterior_sd.p);
  weighted_summary(draw_s0, &result.params.sigma0_sq, &result.posterior_sd.sigma0_sq);
  weighted_summary(draw_smu, &result.params.sigma_mu_sq, &result.posterior_sd.sigma_mu_sq);
  result.params.sigma_mu_sq = std::max(result.params.sigma_mu_sq, 0.0);
  result.log_likelihood_value = log_likelihood(values, result.params);
  result.degenerate = boundary_collapse(result.params);
  return result;
}

}  // namespace screenopt
