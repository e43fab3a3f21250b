// Experiment orchestration: INI-style configs with sweep lists, per-cell
// deterministic execution, CSV outputs carrying the config hash, manifests,
// and aggregation of finished runs into summary tables and plot data.
#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace qelab {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ExperimentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"qe-regular",    "qe-anderson", "cone-solve",        "cone-spectrum",
                                              "green-moments", "sigma-ac",    "biregular-weights", "diagnostics"};
  return names;
}

// Flattened "section.key" -> value settings.
struct ExperimentConfig {
  std::string source;  // file name or "<string>"
  std::map<std::string, std::string> values;

  std::string experiment() const;
  bool has(const std::string& key) const { return values.count(key) != 0; }
  std::string get(const std::string& key) const;  // throws ConfigError if missing
  std::string get(const std::string& key, const std::string& fallback) const;
  int get_int(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  // Comma-separated list, or "lo:hi:count" for an evenly spaced grid. Empty lists are errors.
  std::vector<double> get_list(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;

  // "section.key=value" lines in sorted order (comments and layout do not matter).
  std::string canonical() const;
  // SHA-256 of canonical(), hex encoded.
  std::string hash() const;
};

// Parses an INI file (';' or '#' comments). Overrides are "section.key=value".
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<string>",
                              const std::vector<std::string>& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

// Checks the experiment name, required keys, value types and non-empty sweep lists.
void validate_config(const ExperimentConfig& cfg);

struct RunOptions {
  std::filesystem::path output;  // overrides [experiment] output when non-empty
  int threads = 1;
  bool quiet = true;
};

struct RunResult {
  std::filesystem::path directory;
  std::vector<std::string> files;  // CSV outputs, relative to directory
};

// Output directory: explicit option, else [experiment] output resolved against
// $QELAB_OUTPUT_ROOT (or the working directory), else "<root>/<experiment>-<hash8>".
std::filesystem::path resolve_output(const ExperimentConfig& cfg, const RunOptions& opts);

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

struct ReportResult {
  std::vector<std::filesystem::path> aggregates;
  std::vector<std::filesystem::path> plots;
};

// Aggregates every run (directory holding manifest.json) below `dir` into
// dir/report: mean and sample standard deviation per cell, plus two-column
// plot files per series.
ReportResult report(const std::filesystem::path& dir);

// Rows of a CSV file (header first), skipping '#' comment lines.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);
// Body of a CSV file without comment lines (for reproducibility comparisons).
std::string csv_body(const std::filesystem::path& path);

}  // namespace qelab
