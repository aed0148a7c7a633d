// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "core/config.hpp"

namespace agrad {

enum class OutputFormat { kCsv, kJson };

struct RunOptions {
  std::optional<std::string> out_dir;  // overrides config.out_dir
  std::optional<std::uint64_t> seed;   // overrides config.seed and config.init_seed
  std::size_t workers = 1;
  std::size_t cap = 500;
  OutputFormat format = OutputFormat::kCsv;
  std::function<void(const std::string&)> log;  // progress lines; may be empty
};

/// Applies the overrides in `options` to a copy of `config`.
ExperimentConfig with_overrides(ExperimentConfig config, const RunOptions& options);

/// Runs one non-sweep config and returns its record without touching disk
/// beyond the mode's own artifacts (written to `out_dir` when non-empty).
/// Record fields: config_digest, config, seed, mode, status, metrics,
/// wall_time_seconds, artifacts, metadata.
nlohmann::json run_cell(const ExperimentConfig& config, const std::string& out_dir);

/// Executes the configured mode, writes record-<digest>.json (and, for
/// sweeps, summary.csv or summary.json) under the output directory and
/// returns the record, or the sweep summary for mode == sweep.
nlohmann::json run_experiment(const ExperimentConfig& config, const RunOptions& options);

/// Expanded sweep grid: one resolved cell config per Cartesian point, in
/// row-major axis order. Throws ConfigError when the count exceeds `cap`.
struct SweepCell {
  ExperimentConfig config;
  std::vector<nlohmann::json> axis_values;
  std::string digest;
};
std::vector<SweepCell> expand_sweep(const ExperimentConfig& config, std::size_t cap);

/// Seed of one sweep cell: a hash of the master seed and the cell's axis
/// names and values, independent of the other values on each axis.
std::uint64_t cell_seed(std::uint64_t master, const std::vector<SweepAxis>& axes,
                        const std::vector<nlohmann::json>& values);

/// The single number a record contributes to a sweep summary: final top-1
/// for training, the mean of the first row or surface for analyses.
double headline(const nlohmann::json& record);

/// Writes train.csv and test.csv for the config's synthetic dataset spec.
nlohmann::json generate_dataset(const ExperimentConfig& config, const RunOptions& options);

/// Plot-data kinds understood by emit_plot_data.
const std::vector<std::string>& plot_kinds();

/// Reads every record-*.json under `dir` and writes plotdata-<kind>.csv (or
/// .json). With `expected` set, cells of that sweep without a record are
/// reported in an IoError. Returns {path, rows, ...} (accuracy-vs-i adds
/// spearman_rho).
nlohmann::json emit_plot_data(const std::string& dir, const std::string& kind, OutputFormat format,
                              const std::optional<ExperimentConfig>& expected = std::nullopt);

std::vector<nlohmann::json> load_records(const std::string& dir);

/// Spearman rank correlation with average ranks for ties; NaN when either
/// side is constant.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

/// Loads the dataset a config points to (generating synthetic data when
/// requested), applying grayscale conversion if configured.
DatasetSplit load_dataset(const DatasetSection& dataset);

}  // namespace agrad
