#pragma once

// Experiment runner: validated configs, deterministic runs, CSV tables, the
// JSON summary and the aggregate report over several runs.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cuspflow::experiments {

inline constexpr int kSchemaVersion = 1;

using Json = nlohmann::ordered_json;

struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 1;
  int threads = 1;
  std::optional<double> budget;  // cap on work units, checked before any work
  Json params = Json::object();  // missing keys take their defaults
};

// Known experiment ids, in CLI order (without "report").
const std::vector<std::string>& experiment_ids();
// Parameter list with defaults and the CSV columns, as plain text.
std::string experiment_help(const std::string& id);
Json default_params(const std::string& id);

// TOML document with top-level experiment, seed, threads, budget and a
// [params] table. Errors carry the offending field name.
ExperimentConfig parse_config(const std::string& toml_text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Fills defaults and checks every parameter against its range; all problems
// are reported at once, one "params.<name>: ..." line each.
ExperimentConfig validate(const ExperimentConfig& config);
// Estimated work units of a validated config.
double work_units(const ExperimentConfig& config);

struct Metric {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t samples = 0;
};

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

// One CSV file. Every row starts with experiment, seed and sample columns.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;  // sample index first, then columns
  void add(std::uint64_t sample, std::vector<std::string> cells);
};

struct RunReport {
  ExperimentConfig config;  // validated
  std::map<std::string, Metric> metrics;
  std::vector<Check> checks;
  std::vector<Table> tables;
  double wall_seconds = 0.0;

  bool passed() const;
  // Depends only on (config, seed): no timing and no thread count.
  Json summary() const;
  Json run_meta() const;
  std::string csv(const Table& table) const;
};

RunReport run(const ExperimentConfig& config);

// <dir>/<experiment>_<table>.csv, <dir>/summary.json and <dir>/run_meta.json.
void write_outputs(const RunReport& report, const std::filesystem::path& dir);

struct AggregateRow {
  std::string experiment;
  std::uint64_t seed = 0;
  std::string name;
  std::string value;
  std::string status;  // PASS, FAIL or empty for plain metrics
};

struct Aggregate {
  std::vector<AggregateRow> rows;
  bool passed = true;
  std::string render() const;
};

// Merges run summaries. Folner runs contribute their per-t_n cusp masses to a
// family row with the sup and the max/min ratio. Mixed schema versions are
// rejected.
Aggregate aggregate(const std::vector<Json>& summaries);
Aggregate aggregate_files(const std::vector<std::filesystem::path>& paths);

// Formatting used for every CSV and table cell.
std::string format_number(double v);

}  // namespace cuspflow::experiments
