// screenopt: optimal two-stage screening designs under a budget with FDR
// control at the confirmatory stage.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "screenopt/estimation.hpp"
#include "screenopt/experiments.hpp"
#include "screenopt/io.hpp"
#include "screenopt/optimizer.hpp"

namespace fs = std::filesystem;
using namespace screenopt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInfeasible = 3;

struct GlobalOptions {
  std::uint64_t seed = 1;
  std::string config_path;
  std::string out_dir = ".";
  bool quick = false;
  std::optional<std::int64_t> stride;
  std::string stage2_p;       // realized | inherit
  std::string stage2_latent;  // carry | redraw
  std::string method = "mc";  // mc | em
  int threads = 0;
};

KeyValueConfig load_optional_config(const std::string& path) {
  if (path.empty()) return {};
  return read_config(path);
}

// model parameters either from a key = value file or from an estimate JSON
KeyValueConfig load_params_file(const std::string& path) {
  if (path.ends_with(".json")) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open params file: " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw DataError("cannot parse params JSON: " + std::string(e.what()));
    }
    KeyValueConfig kv;
    for (const char* key : {"p", "sigma0_sq", "sigma_mu_sq", "mean_shift"}) {
      if (j.contains(key)) kv[key] = format_double(j[key].get<double>());
    }
    return kv;
  }
  return read_config(path);
}

void apply_global_overrides(DesignInputs& inputs, const GlobalOptions& global) {
  if (global.stride) inputs.a1_stride = *global.stride;
  if (global.stage2_p == "realized") inputs.stage2_p = Stage2Proportion::kRealized;
  if (global.stage2_p == "inherit") inputs.stage2_p = Stage2Proportion::kInherit;
  if (global.stage2_latent == "carry") inputs.stage2_latent = Stage2Latent::kCarryMu;
  if (global.stage2_latent == "redraw") inputs.stage2_latent = Stage2Latent::kRedrawMu;
}

RunMetadata make_metadata(const GlobalOptions& global, const std::string& command,
                          const DesignInputs& inputs) {
  RunMetadata meta;
  meta.seed = global.seed;
  meta.command = command;
  std::istringstream serialized(design_inputs_to_config(inputs));
  std::string line;
  while (std::getline(serialized, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) {
      meta.parameters.emplace_back(line.substr(0, eq), line.substr(eq + 3));
    }
  }
  return meta;
}

int run_estimate(const GlobalOptions& global, const std::string& data_path,
                 const std::string& column, std::size_t samples) {
  auto dataset = ingest_zscores(data_path, column);
  double mean = 0.0;
  for (double v : dataset.values) mean += v;
  mean /= static_cast<double>(dataset.values.size());
  double var = 0.0;
  for (double v : dataset.values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(dataset.values.size() > 1 ? dataset.values.size() - 1 : 1);
  std::printf("ingested %zu rows from %s (column %s, %zu dropped); mean %.6g, sd %.6g\n",
              dataset.values.size(), data_path.c_str(), column.c_str(), dataset.dropped_rows,
              mean, std::sqrt(var));
  if (dataset.values.size() < 100) {
    std::fprintf(stderr, "warning: only %zu values; estimates will be unstable\n",
                 dataset.values.size());
  }

  auto [centered, shift] = demean(dataset.values);
  EstimationResult result;
  if (global.method == "em") {
    result = estimate_em(centered);
  } else {
    PriorConfig prior;
    prior.importance_samples = samples;
    result = estimate_mc(centered, prior, global.seed, global.threads);
  }
  result.params.mean_shift = shift;

  RunMetadata meta;
  meta.seed = global.seed;
  meta.command = "estimate";
  meta.parameters = {{"data", data_path},
                     {"column", column},
                     {"method", global.method},
                     {"rows", std::to_string(dataset.values.size())},
                     {"dropped_rows", std::to_string(dataset.dropped_rows)}};
  const fs::path out = fs::path(global.out_dir) / "estimate.json";
  write_estimate_json(out, result, meta);
  std::printf("p=%.6g sigma0_sq=%.6g sigma_mu_sq=%.6g mean_shift=%.6g (ess %.1f%s)\n",
              result.params.p, result.params.sigma0_sq, result.params.sigma_mu_sq,
              result.params.mean_shift, result.effective_sample_size,
              result.degenerate ? ", degenerate" : "");
  std::printf("wrote %s\n", out.string().c_str());
  return kExitOk;
}

int run_optimize(const GlobalOptions& global, const std::string& params_path,
                 const KeyValueConfig& flag_overrides) {
  KeyValueConfig merged = load_optional_config(global.config_path);
  for (const auto& [k, v] : load_params_file(params_path)) merged[k] = v;
  for (const auto& [k, v] : flag_overrides) merged[k] = v;
  DesignInputs inputs = design_inputs_from_config(merged);
  apply_global_overrides(inputs, global);
  if (global.quick) inputs.mc_reps = std::min(inputs.mc_reps, 25);
  inputs.validate();

  auto result = optimize(inputs, global.seed, global.threads);
  const RunMetadata meta = make_metadata(global, "optimize", inputs);
  const fs::path frontier_path = fs::path(global.out_dir) / "frontier.csv";
  const fs::path best_path = fs::path(global.out_dir) / "best.json";
  write_frontier_csv(frontier_path, result.frontier, meta);
  write_best_json(best_path, result.best, meta);
  std::printf("best design: r1=%d |A1|=%lld r2=%d  E|A2|=%.3f  ETP=%.3f  FDP=%.4f\n",
              result.best.candidate.r1, static_cast<long long>(result.best.candidate.a1_size),
              result.best.candidate.r2, result.best.expected_hits,
              result.best.expected_true_positives, result.best.mean_realized_fdp);
  std::printf("wrote %s and %s (%zu candidates)\n", frontier_path.string().c_str(),
              best_path.string().c_str(), result.frontier.size());
  return kExitOk;
}

void write_study_outputs(const GlobalOptions& global, const std::string& command,
                         const StudyConfig& config, const ComparisonResult& result,
                         bool charts) {
  RunMetadata meta = make_metadata(global, command, config.base_inputs);
  meta.parameters.emplace_back("repetitions", std::to_string(config.repetitions));
  const fs::path dir(global.out_dir);
  write_metrics_csv(dir / (command + "_metrics.csv"), result.records, meta);
  write_study_summary_json(dir / (command + "_summary.json"), result, meta);
  if (charts) {
    std::vector<ChartSeries> fdr_series(3), etp_series(3);
    const std::vector<std::string> methods{kMethodProposed, kMethodTwoStageBh,
                                           kMethodOneStageBh};
    for (std::size_t m = 0; m < methods.size(); ++m) {
      fdr_series[m].name = methods[m];
      etp_series[m].name = methods[m];
      for (const auto& r : result.records) {
        if (r.method != methods[m]) continue;
        fdr_series[m].x.push_back(r.grid_point);
        fdr_series[m].y.push_back(r.mean_realized_fdr);
        if (r.ln_etp) {
          etp_series[m].x.push_back(r.grid_point);
          etp_series[m].y.push_back(*r.ln_etp);
        }
      }
    }
    write_line_chart_svg(dir / (command + "_fdr.svg"), "realized FDR", fdr_series, meta);
    write_line_chart_svg(dir / (command + "_ln_etp.svg"), "ln ETP", etp_series, meta);
  }
  std::printf("wrote %s and %s\n", (dir / (command + "_metrics.csv")).string().c_str(),
              (dir / (command + "_summary.json")).string().c_str());
}

int run_sim(const GlobalOptions& global, bool second_study, int reps_override,
            int mc_reps_override, double sigma_mu_override, bool charts) {
  StudyConfig config =
      second_study ? default_sim2_config(global.quick) : default_sim1_config(global.quick);
  config.seed = global.seed;
  config.threads = global.threads;
  if (reps_override > 0) config.repetitions = reps_override;
  if (mc_reps_override > 0) config.base_inputs.mc_reps = mc_reps_override;
  if (sigma_mu_override > 0) config.base_inputs.stage1_params.sigma_mu_sq = sigma_mu_override;
  apply_config_overrides(config.base_inputs, load_optional_config(global.config_path));
  apply_global_overrides(config.base_inputs, global);
  config.base_inputs.validate();

  const std::string command = second_study ? "sim2" : "sim1";
  const ComparisonResult result = second_study ? run_sim2(config) : run_sim1(config);
  write_study_outputs(global, command, config, result, charts);
  return kExitOk;
}

int run_sweep(const GlobalOptions& global, const std::vector<double>& c2_list,
              int mc_reps_override, const std::string& params_path) {
  StudyConfig config = default_data_sweep_config(global.quick);
  config.seed = global.seed;
  config.threads = global.threads;
  if (!c2_list.empty()) config.grid = c2_list;
  if (mc_reps_override > 0) config.base_inputs.mc_reps = mc_reps_override;
  if (!params_path.empty()) {
    for (const auto& [k, v] : load_params_file(params_path)) {
      KeyValueConfig one{{k, v}};
      apply_config_overrides(config.base_inputs, one);
    }
  }
  apply_config_overrides(config.base_inputs, load_optional_config(global.config_path));
  apply_global_overrides(config.base_inputs, global);
  config.base_inputs.validate();

  auto entries = run_data_sweep(config);
  RunMetadata meta = make_metadata(global, "sweep", config.base_inputs);
  const fs::path dir(global.out_dir);
  write_sweep_json(dir / "sweep.json", entries, meta);
  for (const auto& entry : entries) {
    char name[64];
    std::snprintf(name, sizeof(name), "frontier_c2_%g.csv", entry.cost2_dollars);
    write_frontier_csv(dir / name, entry.frontier, meta);
    std::printf("c2=%g: r1=%d |A1|=%lld r2=%d E|A2|=%.2f ETP=%.2f\n", entry.cost2_dollars,
                entry.best.candidate.r1, static_cast<long long>(entry.best.candidate.a1_size),
                entry.best.candidate.r2, entry.best.expected_hits,
                entry.best.expected_true_positives);
  }
  std::printf("wrote %s\n", (dir / "sweep.json").string().c_str());
  return kExitOk;
}

int run_baseline(const GlobalOptions& global, const std::string& which,
                 const std::string& params_path, bool empirical_sd) {
  StudyConfig defaults = default_sim1_config(true);
  DesignInputs inputs = defaults.base_inputs;
  if (!params_path.empty()) {
    for (const auto& [k, v] : load_params_file(params_path)) {
      KeyValueConfig one{{k, v}};
      apply_config_overrides(inputs, one);
    }
  }
  apply_config_overrides(inputs, load_optional_config(global.config_path));
  apply_global_overrides(inputs, global);
  inputs.validate();

  BaselineResult result;
  if (which == "one-stage-bh") {
    result = one_stage_bh(inputs, global.seed);
  } else {
    result = two_stage_bh(inputs, global.seed, empirical_sd);
  }
  const RunMetadata meta = make_metadata(global, "baseline " + which, inputs);
  const fs::path out = fs::path(global.out_dir) / "baseline.json";
  write_baseline_json(out, result, meta);
  std::printf("%s: rejections=%zu TP=%zu FDP=%.4f spend=%.2f\n", which.c_str(),
              result.rejection.indices.size(), result.true_positives, result.realized_fdp,
              currency_to_dollars(result.spend));
  std::printf("wrote %s\n", out.string().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"optimal two-stage screening design via FDR control"};
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("--seed", global.seed, "master RNG seed")->capture_default_str();
  app.add_option("--config", global.config_path, "key = value configuration file");
  app.add_option("--out", global.out_dir, "output directory")->capture_default_str();
  app.add_flag("--quick", global.quick, "desk-scale presets (fewer repetitions, coarser grid)");
  app.add_option("--stride", global.stride, "grid step for |A1|");
  app.add_option("--stage2-p", global.stage2_p, "stage-II Lfdr proportion: realized | inherit")
      ->check(CLI::IsMember({"realized", "inherit"}));
  app.add_option("--stage2-latent", global.stage2_latent,
                 "stage-II latent effects: carry | redraw")
      ->check(CLI::IsMember({"carry", "redraw"}));
  app.add_option("--method", global.method, "estimator: mc | em")
      ->check(CLI::IsMember({"mc", "em"}));
  app.add_option("--threads", global.threads, "worker threads (0 = hardware)");

  // estimate
  auto* estimate_cmd = app.add_subcommand("estimate", "estimate mixture parameters from z-scores");
  std::string data_path, column = "B";
  std::size_t samples = 10'000;
  estimate_cmd->add_option("--data", data_path, "delimited z-score file")->required();
  estimate_cmd->add_option("--column", column, "replicate column name")->capture_default_str();
  estimate_cmd->add_option("--samples", samples, "importance samples")->capture_default_str();

  // optimize
  auto* optimize_cmd = app.add_subcommand("optimize", "search for the optimal (r1, |A1|, r2)");
  std::string params_path;
  optimize_cmd->add_option("--params", params_path, "model parameters (key = value or estimate JSON)")
      ->required();
  std::optional<double> opt_budget, opt_c1, opt_c2, opt_alpha, opt_precision;
  std::optional<std::int64_t> opt_m1;
  std::optional<int> opt_mc_reps, opt_r1_max;
  optimize_cmd->add_option("--budget", opt_budget, "total budget B in dollars");
  optimize_cmd->add_option("--c1", opt_c1, "stage-I cost per replicate");
  optimize_cmd->add_option("--c2", opt_c2, "stage-II cost per replicate");
  optimize_cmd->add_option("--m1", opt_m1, "library size");
  optimize_cmd->add_option("--alpha", opt_alpha, "FDR level");
  optimize_cmd->add_option("--precision", opt_precision, "stage-II precision ratio");
  optimize_cmd->add_option("--mc-reps", opt_mc_reps, "Monte Carlo replications per candidate");
  optimize_cmd->add_option("--r1-max", opt_r1_max, "cap on stage-I replicates");

  // studies
  auto* sim1_cmd = app.add_subcommand("sim1", "simulation study over the non-null proportion");
  auto* sim2_cmd = app.add_subcommand("sim2", "simulation study over the FDR level");
  int reps_override = 0, mc_reps_override = 0;
  double sigma_mu_override = 0.0;
  bool charts = false;
  for (auto* cmd : {sim1_cmd, sim2_cmd}) {
    cmd->add_option("--reps", reps_override, "repetitions per grid point");
    cmd->add_option("--mc-reps", mc_reps_override, "Monte Carlo replications per candidate");
    cmd->add_option("--sigma-mu-sq", sigma_mu_override, "signal variance");
    cmd->add_flag("--charts", charts, "emit SVG line charts");
  }

  auto* sweep_cmd = app.add_subcommand("sweep", "data-analysis design sweep over stage-II costs");
  std::vector<double> c2_list;
  std::string sweep_params;
  int sweep_mc_reps = 0;
  sweep_cmd->add_option("--c2", c2_list, "stage-II costs in dollars");
  sweep_cmd->add_option("--params", sweep_params, "model parameters file");
  sweep_cmd->add_option("--mc-reps", sweep_mc_reps, "Monte Carlo replications per candidate");

  auto* baseline_cmd = app.add_subcommand("baseline", "run a single BH baseline");
  std::string which = "one-stage-bh";
  std::string baseline_params;
  bool empirical_sd = false;
  baseline_cmd->add_option("--which", which, "one-stage-bh | two-stage-bh")
      ->check(CLI::IsMember({"one-stage-bh", "two-stage-bh"}));
  baseline_cmd->add_option("--params", baseline_params, "model parameters file");
  baseline_cmd->add_flag("--empirical-screen-sd", empirical_sd,
                         "standardize the two-SD screen against the observed spread");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (estimate_cmd->parsed()) return run_estimate(global, data_path, column, samples);
    if (optimize_cmd->parsed()) {
      KeyValueConfig overrides;
      if (opt_budget) overrides["budget"] = format_double(*opt_budget);
      if (opt_c1) overrides["cost1"] = format_double(*opt_c1);
      if (opt_c2) overrides["cost2"] = format_double(*opt_c2);
      if (opt_m1) overrides["m1"] = std::to_string(*opt_m1);
      if (opt_alpha) overrides["fdr_alpha"] = format_double(*opt_alpha);
      if (opt_precision) overrides["precision_ratio"] = format_double(*opt_precision);
      if (opt_mc_reps) overrides["mc_reps"] = std::to_string(*opt_mc_reps);
      if (opt_r1_max) overrides["r1_max"] = std::to_string(*opt_r1_max);
      return run_optimize(global, params_path, overrides);
    }
    if (sim1_cmd->parsed())
      return run_sim(global, false, reps_override, mc_reps_override, sigma_mu_override, charts);
    if (sim2_cmd->parsed())
      return run_sim(global, true, reps_override, mc_reps_override, sigma_mu_override, charts);
    if (sweep_cmd->parsed()) return run_sweep(global, c2_list, sweep_mc_reps, sweep_params);
    if (baseline_cmd->parsed()) return run_baseline(global, which, baseline_params, empirical_sd);
  } catch (const InfeasibleBudgetError& e) {
    std::fprintf(stderr, "infeasible budget: %s\n", e.what());
    return kExitInfeasible;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const DegenerateWeightsError& e) {
    std::fprintf(stderr, "estimation error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
