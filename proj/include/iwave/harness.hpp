#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "iwave/quantize.hpp"

namespace iwave {

extern const char* const kCodeVersion;

/// Experiments the harness can dispatch.
const std::vector<std::string>& experiment_names();

struct ForcingSpec {
  std::string kind = "gaussian";  // "gaussian" or "mode"
  double width = 2.0;             // gaussian: exp(-|k|^2 / width^2)
  int k1 = 1;
  int k2 = 0;
};

struct ExperimentConfig {
  std::string experiment;
  std::string symbol = "shear";
  std::map<std::string, double> params;
  int N = 16;
  double delta = 0.1;
  double s = -0.6;
  std::vector<double> nu_grid;
  std::vector<double> omega_grid;
  std::vector<double> t_grid;
  std::uint64_t seed = 1;
  std::string output_dir = "results";
  std::size_t budget = kDenseBudget;
  unsigned jobs = 1;

  /// Path to a record of a passing dynamics run for the same symbol.
  std::string certificate;
  /// Run scaling/timescale experiments without a certificate, flagged.
  bool waive_certificate = false;

  std::size_t n_samples = 400;
  double horizon = 200.0;
  double inner_fraction = 0.5;
  double delta1 = 0.15;
  double omega0 = 0.03;
  int points_per_decade = 16;
  double slope_bound_Hs = 1.0 / 3.0 + 0.1;
  double slope_bound_L2 = 1.0 / 6.0 + 0.1;
  ForcingSpec forcing;
};

/// Parses and validates a config; all problems are reported together in one
/// InvalidConfig whose message lists "field: reason" lines.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
/// Full config with every default filled in.
nlohmann::json to_json(const ExperimentConfig& cfg);
/// 16 hex digits of FNV-1a over the canonical JSON form.
std::string config_hash(const ExperimentConfig& cfg);

/// Expands a grid descriptor: a number, an array of numbers, or an object
/// {"linspace"|"geomspace": [lo, hi, n]} or {"halving": [start, count]}.
std::vector<double> expand_grid(const nlohmann::json& desc);

SpectralField make_forcing(const ForcingSpec& fs, int N);

struct ResultRecord {
  std::string config_hash;
  std::string experiment;
  std::string code_version;
  std::string timestamp;
  nlohmann::json config;
  /// One object per grid point, in grid order.
  std::vector<nlohmann::json> points;
  std::map<std::string, double> summary;
  std::vector<std::string> flags;
  std::map<std::string, bool> verdicts;
  /// Named curves that do not fit the per-point table, e.g. per-nu suprema.
  nlohmann::json series = nlohmann::json::object();
  /// Directory the artifacts were written to, empty if not persisted.
  std::string directory;

  bool passed() const;
  nlohmann::json to_json() const;
};

struct RunOptions {
  bool persist = true;
};

/// Dispatches to the owning module, records per-point failures without
/// aborting, and writes record.json, points.csv and run_info.json.
ResultRecord run(const ExperimentConfig& cfg, const RunOptions& opts = {});

/// Plot-ready CSV files for a record; throws MissingMetric when the record
/// lacks what the kind needs. Returns the written paths.
std::vector<std::string> emit_plot_data(const ResultRecord& record, const std::string& kind,
                                        const std::string& directory);

/// points.csv content: sorted union of keys as columns, rows in point order.
std::string points_csv(const std::vector<nlohmann::json>& points);

}  // namespace iwave
