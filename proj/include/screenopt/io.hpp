#pragma once

// Data ingestion, flat key = value configuration, and report serialization
// (CSV tables, JSON records, simple SVG line charts). Every output carries a
// metadata header sufficient to reproduce the run.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "screenopt/estimation.hpp"
#include "screenopt/experiments.hpp"
#include "screenopt/optimizer.hpp"

namespace screenopt {

inline constexpr const char* kVersion = "screenopt 0.1.0";

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

struct ZScoreDataset {
  std::vector<std::string> compound_ids;
  std::string column;          // selected replicate column name
  std::vector<double> values;  // finite values only
  std::size_t dropped_rows = 0;
  std::vector<std::string> available_columns;
};

// delimited text with a header row; rows with missing or unparseable cells in
// the selected column are dropped and counted; >1% unparseable is a hard error
ZScoreDataset ingest_zscores(const std::filesystem::path& path, const std::string& column);

void write_zscores(const std::filesystem::path& path, const std::string& column,
                   const std::vector<double>& values);

// flat `key = value` configuration with # comments
using KeyValueConfig = std::map<std::string, std::string>;
KeyValueConfig parse_config_text(const std::string& text);
KeyValueConfig read_config(const std::filesystem::path& path);

// applies only the keys present in the config
void apply_config_overrides(DesignInputs& inputs, const KeyValueConfig& config);

// requires the core keys (m1, budget, cost1, cost2, p, sigma0_sq, sigma_mu_sq)
DesignInputs design_inputs_from_config(const KeyValueConfig& config);
std::string design_inputs_to_config(const DesignInputs& inputs);

// run metadata stamped on every output file
struct RunMetadata {
  std::uint64_t seed = 0;
  std::string command;
  std::vector<std::pair<std::string, std::string>> parameters;
};

// deterministic shortest-round-trip formatting used in all outputs
std::string format_double(double value);

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<MetricRecord>& records, const RunMetadata& meta);
void write_frontier_csv(const std::filesystem::path& path,
                        const std::vector<CandidateEvaluation>& frontier,
                        const RunMetadata& meta);
void write_estimate_json(const std::filesystem::path& path, const EstimationResult& result,
                         const RunMetadata& meta);
void write_best_json(const std::filesystem::path& path, const CandidateEvaluation& best,
                     const RunMetadata& meta);
void write_sweep_json(const std::filesystem::path& path, const std::vector<SweepEntry>& entries,
                      const RunMetadata& meta);
void write_study_summary_json(const std::filesystem::path& path,
                              const ComparisonResult& result, const RunMetadata& meta);
void write_baseline_json(const std::filesystem::path& path, const BaselineResult& result,
                         const RunMetadata& meta);

// display-only convenience chart: one polyline per named series
struct ChartSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};
void write_line_chart_svg(const std::filesystem::path& path, const std::string& title,
                          const std::vector<ChartSeries>& series, const RunMetadata& meta);

}  // namespace screenopt
