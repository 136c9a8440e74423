#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "screenopt/io.hpp"
#include "screenopt/mixture.hpp"

using namespace screenopt;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "screenopt_io_tests";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

TEST_CASE("ingest_zscores parses a well-formed file") {
  const auto path = temp_file("well_formed.csv");
  write_text(path, "compound_id,A,B\nc1,0.1,1.5\nc2,0.2,-0.25\nc3,0.3,0.75\n");
  auto dataset = ingest_zscores(path, "B");
  CHECK(dataset.values == std::vector<double>{1.5, -0.25, 0.75});
  CHECK(dataset.compound_ids == std::vector<std::string>{"c1", "c2", "c3"});
  CHECK(dataset.dropped_rows == 0);
}

TEST_CASE("ingest_zscores drops rows with blank or bad cells and counts them") {
  const auto path = temp_file("dropped.csv");
  // 200 rows so a single bad row stays under the 1% hard-error threshold
  std::ostringstream text;
  text << "id,B\n";
  for (int i = 0; i < 199; ++i) text << "c" << i << "," << (0.01 * i) << "\n";
  text << "c199,\n";
  write_text(path, text.str());
  auto dataset = ingest_zscores(path, "B");
  CHECK(dataset.values.size() == 199);
  CHECK(dataset.dropped_rows == 1);
}

TEST_CASE("ingest_zscores hard-errors above one percent unparseable") {
  const auto path = temp_file("too_bad.csv");
  write_text(path, "id,B\nc1,1.0\nc2,oops\nc3,2.0\n");
  CHECK_THROWS_AS(ingest_zscores(path, "B"), DataError);
}

TEST_CASE("ingest_zscores lists available columns when the selector is missing") {
  const auto path = temp_file("missing_col.csv");
  write_text(path, "id,A,B\nc1,0.5,1.0\n");
  try {
    ingest_zscores(path, "Z");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string what = e.what();
    CHECK(what.find("'Z' not found") != std::string::npos);
    CHECK(what.find("A, B") != std::string::npos);
  }
}

TEST_CASE("ingest_zscores handles tab-delimited files") {
  const auto path = temp_file("tabs.tsv");
  write_text(path, "id\tB\nc1\t0.25\nc2\t-1.75\n");
  auto dataset = ingest_zscores(path, "B");
  CHECK(dataset.values == std::vector<double>{0.25, -1.75});
}

TEST_CASE("a simulated screen round-trips through write and ingest exactly") {
  const StageModel model{.params = {.p = 0.1, .sigma0_sq = 1.0, .sigma_mu_sq = 6.25},
                         .replicates = 1};
  auto screen = simulate_screen(model, 500, 77);
  const auto path = temp_file("round_trip.csv");
  write_zscores(path, "B", screen.values);
  auto dataset = ingest_zscores(path, "B");
  REQUIRE(dataset.values.size() == screen.values.size());
  for (std::size_t i = 0; i < screen.values.size(); ++i) {
    CHECK(dataset.values[i] == screen.values[i]);  // shortest-round-trip formatting
  }
}

TEST_CASE("config parsing handles comments and rejects malformed lines") {
  auto config = parse_config_text("# comment\n m1 = 500 \n\nbudget=250000 # inline\n");
  CHECK(config.at("m1") == "500");
  CHECK(config.at("budget") == "250000");
  CHECK_THROWS_AS(parse_config_text("no_equals_here\n"), DataError);
  CHECK_THROWS_AS(parse_config_text("= value\n"), DataError);
}

TEST_CASE("design inputs round-trip through the config format") {
  DesignInputs inputs;
  inputs.m1 = 51'840;
  inputs.budget = currency_from_dollars(500'000);
  inputs.cost1 = currency_from_dollars(1);
  inputs.cost2 = currency_from_dollars(2.5);
  inputs.precision_ratio = 3.0;
  inputs.fdr_alpha = 0.05;
  inputs.mc_reps = 100;
  inputs.a1_stride = 100;
  inputs.r1_max_override = 9;
  inputs.stage1_params = {
      .p = 0.0132, .sigma0_sq = 0.5677, .sigma_mu_sq = 3.0735, .mean_shift = 0.287};
  inputs.stage2_p = Stage2Proportion::kInherit;
  inputs.stage2_latent = Stage2Latent::kRedrawMu;

  DesignInputs parsed = design_inputs_from_config(parse_config_text(design_inputs_to_config(inputs)));
  CHECK(parsed.m1 == inputs.m1);
  CHECK(parsed.budget == inputs.budget);
  CHECK(parsed.cost1 == inputs.cost1);
  CHECK(parsed.cost2 == inputs.cost2);
  CHECK(parsed.precision_ratio == inputs.precision_ratio);
  CHECK(parsed.fdr_alpha == inputs.fdr_alpha);
  CHECK(parsed.mc_reps == inputs.mc_reps);
  CHECK(parsed.a1_stride == inputs.a1_stride);
  CHECK(parsed.r1_max_override == inputs.r1_max_override);
  CHECK(parsed.stage1_params.p == inputs.stage1_params.p);
  CHECK(parsed.stage1_params.sigma0_sq == inputs.stage1_params.sigma0_sq);
  CHECK(parsed.stage1_params.sigma_mu_sq == inputs.stage1_params.sigma_mu_sq);
  CHECK(parsed.stage1_params.mean_shift == inputs.stage1_params.mean_shift);
  CHECK(parsed.stage2_p == inputs.stage2_p);
  CHECK(parsed.stage2_latent == inputs.stage2_latent);

  CHECK_THROWS_AS(design_inputs_from_config(parse_config_text("m1 = 10\n")), DataError);
}

TEST_CASE("format_double round-trips doubles and prints integers plainly") {
  CHECK(format_double(250000.0) == "250000");
  CHECK(format_double(0.05) == "0.05");
  for (double v : {0.1, 1.0 / 3.0, 558.6012345678901, -1e-17, 6.25}) {
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
}

TEST_CASE("csv and json writers are byte-deterministic") {
  std::vector<MetricRecord> records(2);
  records[0] = {.grid_point = 0.1,
                .method = "proposed",
                .mean_realized_fdr = 0.04321,
                .fdr_mc_se = 0.001,
                .mean_etp = 41.25,
                .etp_mc_se = 0.5,
                .ln_etp = std::log(41.25)};
  records[1] = {.grid_point = 0.1,
                .method = "one-stage-bh",
                .mean_realized_fdr = 0.02,
                .fdr_mc_se = 0.002,
                .mean_etp = 0.0,
                .etp_mc_se = 0.0,
                .ln_etp = std::nullopt};
  RunMetadata meta{.seed = 7, .command = "sim1", .parameters = {{"m1", "500"}}};

  const auto a = temp_file("metrics_a.csv");
  const auto b = temp_file("metrics_b.csv");
  write_metrics_csv(a, records, meta);
  write_metrics_csv(b, records, meta);
  const std::string bytes = read_bytes(a);
  CHECK(bytes == read_bytes(b));
  CHECK(bytes.find("absent") != std::string::npos);  // flagged, never fabricated
  CHECK(bytes.find("# seed = 7") != std::string::npos);
}
