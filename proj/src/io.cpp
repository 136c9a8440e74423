#include "screenopt/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace screenopt {

namespace {

using nlohmann::ordered_json;

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_row(const std::string& line, char delim) {
  std::vector<std::string> cells;
  if (delim == ' ') {  // any whitespace run
    std::istringstream in(line);
    std::string cell;
    while (in >> cell) cells.push_back(cell);
    return cells;
  }
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, delim)) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == delim) cells.push_back("");
  return cells;
}

char detect_delimiter(const std::string& header) {
  if (header.find(',') != std::string::npos) return ',';
  if (header.find('\t') != std::string::npos) return '\t';
  if (header.find(';') != std::string::npos) return ';';
  return ' ';
}

bool parse_double(const std::string& text, double* out) {
  if (text.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size()) return false;
  if (!std::isfinite(v)) return false;
  *out = v;
  return true;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);  // binary keeps bytes identical across platforms
  if (!out) throw DataError("cannot open for writing: " + path.string());
  return out;
}

void write_metadata_comment(std::ofstream& out, const RunMetadata& meta) {
  out << "# version = " << kVersion << "\n";
  out << "# command = " << meta.command << "\n";
  out << "# seed = " << meta.seed << "\n";
  for (const auto& [key, value] : meta.parameters) {
    out << "# " << key << " = " << value << "\n";
  }
}

ordered_json metadata_json(const RunMetadata& meta) {
  ordered_json j;
  j["version"] = kVersion;
  j["command"] = meta.command;
  j["seed"] = meta.seed;
  for (const auto& [key, value] : meta.parameters) j["parameters"][key] = value;
  return j;
}

ordered_json candidate_json(const CandidateEvaluation& eval) {
  ordered_json j;
  j["r1"] = eval.candidate.r1;
  j["a1_size"] = eval.candidate.a1_size;
  j["r2"] = eval.candidate.r2;
  j["expected_hits"] = eval.expected_hits;
  j["expected_true_positives"] = eval.expected_true_positives;
  j["mean_realized_fdp"] = eval.mean_realized_fdp;
  j["hits_mc_se"] = eval.hits_mc_se;
  j["tp_mc_se"] = eval.tp_mc_se;
  j["fdp_mc_se"] = eval.fdp_mc_se;
  return j;
}

void dump_json(const std::filesystem::path& path, const ordered_json& j) {
  auto out = open_for_write(path);
  out << j.dump(2) << "\n";
}

}  // namespace

std::string format_double(double value) {
  if (value == std::floor(value) && std::abs(value) < 9.007199254740992e15) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%lld", static_cast<long long>(value));
    return buffer;
  }
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  // shortest representation that round-trips
  for (int precision = 1; precision < 17; ++precision) {
    char probe[64];
    std::snprintf(probe, sizeof(probe), "%.*g", precision, value);
    if (std::strtod(probe, nullptr) == value) return probe;
  }
  return buffer;
}

ZScoreDataset ingest_zscores(const std::filesystem::path& path, const std::string& column) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file: " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw DataError("empty data file: " + path.string());
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const char delim = detect_delimiter(header);
  const auto names = split_row(header, delim);

  ZScoreDataset dataset;
  dataset.column = column;
  dataset.available_columns = names;
  std::ptrdiff_t column_index = -1;
  std::ptrdiff_t id_index = -1;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == column) column_index = static_cast<std::ptrdiff_t>(i);
    if (names[i] == "compound_id" || names[i] == "id") id_index = static_cast<std::ptrdiff_t>(i);
  }
  if (column_index < 0) {
    std::string known;
    for (const auto& n : names) {
      if (!known.empty()) known += ", ";
      known += n;
    }
    throw DataError("column '" + column + "' not found; available columns: " + known);
  }

  std::string line;
  std::size_t parsed_rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    ++parsed_rows;
    const auto cells = split_row(line, delim);
    double value = 0.0;
    if (static_cast<std::size_t>(column_index) >= cells.size() ||
        !parse_double(cells[static_cast<std::size_t>(column_index)], &value)) {
      ++dataset.dropped_rows;
      continue;
    }
    dataset.values.push_back(value);
    if (id_index >= 0 && static_cast<std::size_t>(id_index) < cells.size()) {
      dataset.compound_ids.push_back(cells[static_cast<std::size_t>(id_index)]);
    } else {
      dataset.compound_ids.push_back(std::to_string(dataset.values.size()));
    }
  }
  if (parsed_rows == 0) throw DataError("no data rows in " + path.string());
  if (static_cast<double>(dataset.dropped_rows) > 0.01 * static_cast<double>(parsed_rows)) {
    throw DataError("more than 1% of rows unparseable in " + path.string() + " (" +
                    std::to_string(dataset.dropped_rows) + " of " +
                    std::to_string(parsed_rows) + ")");
  }
  return dataset;
}

void write_zscores(const std::filesystem::path& path, const std::string& column,
                   const std::vector<double>& values) {
  auto out = open_for_write(path);
  out << "compound_id," << column << "\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    out << (i + 1) << "," << format_double(values[i]) << "\n";
  }
}

KeyValueConfig parse_config_text(const std::string& text) {
  KeyValueConfig config;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("config line missing '=': " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw DataError("config line has empty key: " + line);
    config[key] = value;
  }
  return config;
}

KeyValueConfig read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

namespace {

double require_double(const KeyValueConfig& config, const std::string& key) {
  const auto it = config.find(key);
  if (it == config.end()) throw DataError("config is missing key '" + key + "'");
  double v = 0.0;
  if (!parse_double(it->second, &v)) throw DataError("config key '" + key + "' is not a number");
  return v;
}

double optional_double(const KeyValueConfig& config, const std::string& key, double fallback) {
  return config.contains(key) ? require_double(config, key) : fallback;
}

}  // namespace

void apply_config_overrides(DesignInputs& inputs, const KeyValueConfig& config) {
  if (config.contains("m1"))
    inputs.m1 = static_cast<std::int64_t>(require_double(config, "m1"));
  if (config.contains("budget"))
    inputs.budget = currency_from_dollars(require_double(config, "budget"));
  if (config.contains("cost1"))
    inputs.cost1 = currency_from_dollars(require_double(config, "cost1"));
  if (config.contains("cost2"))
    inputs.cost2 = currency_from_dollars(require_double(config, "cost2"));
  inputs.precision_ratio = optional_double(config, "precision_ratio", inputs.precision_ratio);
  inputs.fdr_alpha = optional_double(config, "fdr_alpha", inputs.fdr_alpha);
  inputs.mc_reps = static_cast<int>(optional_double(config, "mc_reps", inputs.mc_reps));
  inputs.a1_stride =
      static_cast<std::int64_t>(optional_double(config, "a1_stride", static_cast<double>(inputs.a1_stride)));
  if (config.contains("r1_max")) {
    inputs.r1_max_override = static_cast<int>(require_double(config, "r1_max"));
  }
  inputs.stage1_params.p = optional_double(config, "p", inputs.stage1_params.p);
  inputs.stage1_params.sigma0_sq =
      optional_double(config, "sigma0_sq", inputs.stage1_params.sigma0_sq);
  inputs.stage1_params.sigma_mu_sq =
      optional_double(config, "sigma_mu_sq", inputs.stage1_params.sigma_mu_sq);
  inputs.stage1_params.mean_shift =
      optional_double(config, "mean_shift", inputs.stage1_params.mean_shift);
  if (config.contains("stage2_p")) {
    const std::string& mode = config.at("stage2_p");
    if (mode == "realized") {
      inputs.stage2_p = Stage2Proportion::kRealized;
    } else if (mode == "inherit") {
      inputs.stage2_p = Stage2Proportion::kInherit;
    } else {
      throw DataError("config stage2_p must be 'realized' or 'inherit'");
    }
  }
  if (config.contains("stage2_latent")) {
    const std::string& mode = config.at("stage2_latent");
    if (mode == "carry") {
      inputs.stage2_latent = Stage2Latent::kCarryMu;
    } else if (mode == "redraw") {
      inputs.stage2_latent = Stage2Latent::kRedrawMu;
    } else {
      throw DataError("config stage2_latent must be 'carry' or 'redraw'");
    }
  }
}

DesignInputs design_inputs_from_config(const KeyValueConfig& config) {
  for (const char* key : {"m1", "budget", "cost1", "cost2", "p", "sigma0_sq", "sigma_mu_sq"}) {
    if (!config.contains(key)) throw DataError(std::string("config is missing key '") + key + "'");
  }
  DesignInputs inputs;
  apply_config_overrides(inputs, config);
  inputs.validate();
  return inputs;
}

std::string design_inputs_to_config(const DesignInputs& inputs) {
  std::ostringstream out;
  out << "m1 = " << inputs.m1 << "\n";
  out << "budget = " << format_double(currency_to_dollars(inputs.budget)) << "\n";
  out << "cost1 = " << format_double(currency_to_dollars(inputs.cost1)) << "\n";
  out << "cost2 = " << format_double(currency_to_dollars(inputs.cost2)) << "\n";
  out << "precision_ratio = " << format_double(inputs.precision_ratio) << "\n";
  out << "fdr_alpha = " << format_double(inputs.fdr_alpha) << "\n";
  out << "mc_reps = " << inputs.mc_reps << "\n";
  out << "a1_stride = " << inputs.a1_stride << "\n";
  if (inputs.r1_max_override) out << "r1_max = " << *inputs.r1_max_override << "\n";
  out << "p = " << format_double(inputs.stage1_params.p) << "\n";
  out << "sigma0_sq = " << format_double(inputs.stage1_params.sigma0_sq) << "\n";
  out << "sigma_mu_sq = " << format_double(inputs.stage1_params.sigma_mu_sq) << "\n";
  out << "mean_shift = " << format_double(inputs.stage1_params.mean_shift) << "\n";
  out << "stage2_p = "
      << (inputs.stage2_p == Stage2Proportion::kRealized ? "realized" : "inherit") << "\n";
  out << "stage2_latent = "
      << (inputs.stage2_latent == Stage2Latent::kCarryMu ? "carry" : "redraw") << "\n";
  return out.str();
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<MetricRecord>& records, const RunMetadata& meta) {
  auto out = open_for_write(path);
  write_metadata_comment(out, meta);
  out << "grid_point,method,mean_realized_fdr,fdr_mc_se,mean_etp,etp_mc_se,ln_etp\n";
  for (const auto& r : records) {
    out << format_double(r.grid_point) << "," << r.method << ","
        << format_double(r.mean_realized_fdr) << "," << format_double(r.fdr_mc_se) << ","
        << format_double(r.mean_etp) << "," << format_double(r.etp_mc_se) << ",";
    if (r.ln_etp) {
      out << format_double(*r.ln_etp);
    } else {
      out << "absent";
    }
    out << "\n";
  }
}

void write_frontier_csv(const std::filesystem::path& path,
                        const std::vector<CandidateEvaluation>& frontier,
                        const RunMetadata& meta) {
  auto out = open_for_write(path);
  write_metadata_comment(out, meta);
  out << "r1,a1_size,r2,expected_hits,hits_mc_se,expected_true_positives,tp_mc_se,"
         "mean_realized_fdp,fdp_mc_se\n";
  for (const auto& e : frontier) {
    out << e.candidate.r1 << "," << e.candidate.a1_size << "," << e.candidate.r2 << ","
        << format_double(e.expected_hits) << "," << format_double(e.hits_mc_se) << ","
        << format_double(e.expected_true_positives) << "," << format_double(e.tp_mc_se)
        << "," << format_double(e.mean_realized_fdp) << "," << format_double(e.fdp_mc_se)
        << "\n";
  }
}

void write_estimate_json(const std::filesystem::path& path, const EstimationResult& result,
                         const RunMetadata& meta) {
  ordered_json j;
  j["p"] = result.params.p;
  j["sigma0_sq"] = result.params.sigma0_sq;
  j["sigma_mu_sq"] = result.params.sigma_mu_sq;
  j["mean_shift"] = result.params.mean_shift;
  j["method"] =
      result.method == EstimationMethod::kImportanceSampling ? "importance-sampling" : "em";
  j["posterior_sd"]["p"] = result.posterior_sd.p;
  j["posterior_sd"]["sigma0_sq"] = result.posterior_sd.sigma0_sq;
  j["posterior_sd"]["sigma_mu_sq"] = result.posterior_sd.sigma_mu_sq;
  j["effective_sample_size"] = result.effective_sample_size;
  j["degenerate"] = result.degenerate;
  j["iterations"] = result.iterations;
  j["log_likelihood"] = result.log_likelihood_value;
  j["metadata"] = metadata_json(meta);
  dump_json(path, j);
}

void write_best_json(const std::filesystem::path& path, const CandidateEvaluation& best,
                     const RunMetadata& meta) {
  ordered_json j = candidate_json(best);
  j["metadata"] = metadata_json(meta);
  dump_json(path, j);
}

void write_sweep_json(const std::filesystem::path& path, const std::vector<SweepEntry>& entries,
                      const RunMetadata& meta) {
  ordered_json j;
  j["entries"] = ordered_json::array();
  for (const auto& entry : entries) {
    ordered_json e;
    e["cost2"] = entry.cost2_dollars;
    e["best"] = candidate_json(entry.best);
    e["frontier_size"] = entry.frontier.size();
    j["entries"].push_back(e);
  }
  j["metadata"] = metadata_json(meta);
  dump_json(path, j);
}

void write_study_summary_json(const std::filesystem::path& path,
                              const ComparisonResult& result, const RunMetadata& meta) {
  ordered_json j;
  j["records"] = ordered_json::array();
  for (const auto& r : result.records) {
    ordered_json rec;
    rec["grid_point"] = r.grid_point;
    rec["method"] = r.method;
    rec["mean_realized_fdr"] = r.mean_realized_fdr;
    rec["fdr_mc_se"] = r.fdr_mc_se;
    rec["mean_etp"] = r.mean_etp;
    rec["etp_mc_se"] = r.etp_mc_se;
    if (r.ln_etp) {
      rec["ln_etp"] = *r.ln_etp;
    } else {
      rec["ln_etp"] = nullptr;
    }
    j["records"].push_back(rec);
  }
  j["designs"] = ordered_json::array();
  for (const auto& d : result.designs) {
    ordered_json rec;
    rec["grid_point"] = d.grid_point;
    rec["chosen"] = candidate_json(d.chosen);
    j["designs"].push_back(rec);
  }
  j["metadata"] = metadata_json(meta);
  dump_json(path, j);
}

void write_baseline_json(const std::filesystem::path& path, const BaselineResult& result,
                         const RunMetadata& meta) {
  ordered_json j;
  j["method"] = result.method == BaselineMethod::kOneStageBh ? "one-stage-bh" : "two-stage-bh";
  j["r1"] = result.r1;
  j["r2"] = result.r2;
  j["carried"] = result.carried;
  j["rejections"] = result.rejection.indices.size();
  j["true_positives"] = result.true_positives;
  j["realized_fdp"] = result.realized_fdp;
  j["spend"] = currency_to_dollars(result.spend);
  j["metadata"] = metadata_json(meta);
  dump_json(path, j);
}

void write_line_chart_svg(const std::filesystem::path& path, const std::string& title,
                          const std::vector<ChartSeries>& series, const RunMetadata& meta) {
  constexpr double kWidth = 640.0, kHeight = 420.0, kMargin = 60.0;
  double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
  for (const auto& s : series) {
    for (double x : s.x) {
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
    }
    for (double y : s.y) {
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  }
  if (x_min > x_max) {
    x_min = 0;
    x_max = 1;
  }
  if (y_min >= y_max) {
    y_min -= 0.5;
    y_max += 0.5;
  }
  const auto map_x = [&](double x) {
    return kMargin + (x - x_min) / (x_max - x_min) * (kWidth - 2 * kMargin);
  };
  const auto map_y = [&](double y) {
    return kHeight - kMargin - (y - y_min) / (y_max - y_min) * (kHeight - 2 * kMargin);
  };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

  auto out = open_for_write(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\">\n";
  out << "<!-- version = " << kVersion << "; command = " << meta.command
      << "; seed = " << meta.seed << " -->\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << title << "</text>\n";
  out << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\""
      << kWidth - kMargin << "\" y2=\"" << kHeight - kMargin
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin
      << "\" y2=\"" << kHeight - kMargin << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << kMargin << "\" y=\"" << kHeight - kMargin + 18
      << "\" font-size=\"11\">" << format_double(x_min) << "</text>\n";
  out << "<text x=\"" << kWidth - kMargin << "\" y=\"" << kHeight - kMargin + 18
      << "\" text-anchor=\"end\" font-size=\"11\">" << format_double(x_max) << "</text>\n";
  out << "<text x=\"" << kMargin - 6 << "\" y=\"" << kHeight - kMargin
      << "\" text-anchor=\"end\" font-size=\"11\">" << format_double(y_min) << "</text>\n";
  out << "<text x=\"" << kMargin - 6 << "\" y=\"" << kMargin
      << "\" text-anchor=\"end\" font-size=\"11\">" << format_double(y_max) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& curve = series[s];
    out << "<polyline fill=\"none\" stroke=\"" << kColors[s % 4] << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < curve.x.size(); ++i) {
      out << map_x(curve.x[i]) << "," << map_y(curve.y[i]) << " ";
    }
    out << "\"/>\n";
    out << "<text x=\"" << kWidth - kMargin + 4 << "\" y=\"" << kMargin + 16 * s
        << "\" font-size=\"11\" fill=\"" << kColors[s % 4] << "\">" << curve.name
        << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace screenopt
