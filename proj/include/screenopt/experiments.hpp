#pragma once

// Scripted, seed-deterministic study runners: the two simulation studies that
// compare the proposed design against the replicated BH baselines, and the
// real-data design sweep over stage-II costs.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "screenopt/baselines.hpp"
#include "screenopt/optimizer.hpp"

namespace screenopt {

enum class StudyId { kSim1, kSim2, kDataSweep };

struct StudyConfig {
  StudyId study_id = StudyId::kSim1;
  std::vector<double> grid;  // p1 values, alpha values, or c2 in dollars
  int repetitions = 200;
  DesignInputs base_inputs;
  std::uint64_t seed = 0;
  int threads = 0;

  void validate() const;
};

struct MetricRecord {
  double grid_point = 0.0;
  std::string method;  // proposed | two-stage-bh | one-stage-bh
  double mean_realized_fdr = 0.0;
  double fdr_mc_se = 0.0;
  double mean_etp = 0.0;
  double etp_mc_se = 0.0;
  std::optional<double> ln_etp;  // absent when no run rejected anything
};

struct GridDesign {
  double grid_point = 0.0;
  CandidateEvaluation chosen;  // the optimizer's pick and its internal scores
};

struct ComparisonResult {
  std::vector<MetricRecord> records;  // one per (grid point x method), no gaps
  std::vector<GridDesign> designs;    // proposed design per grid point
};

ComparisonResult run_sim1(const StudyConfig& config);
ComparisonResult run_sim2(const StudyConfig& config);

struct SweepEntry {
  double cost2_dollars = 0.0;
  CandidateEvaluation best;
  std::vector<CandidateEvaluation> frontier;
};

std::vector<SweepEntry> run_data_sweep(const StudyConfig& config);

// full-scale defaults; quick mode drops repetitions/N for desk runs
StudyConfig default_sim1_config(bool quick = false);
StudyConfig default_sim2_config(bool quick = false);
StudyConfig default_data_sweep_config(bool quick = false);

inline const char* kMethodProposed = "proposed";
inline const char* kMethodTwoStageBh = "two-stage-bh";
inline const char* kMethodOneStageBh = "one-stage-bh";

}  // namespace screenopt
