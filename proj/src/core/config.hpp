// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "core/activations.hpp"
#include "core/dataset.hpp"
#include "core/grad_error.hpp"
#include "core/models.hpp"
#include "core/quant_noise.hpp"
#include "core/train.hpp"

namespace agrad {

enum class Mode { kTrain, kSweep, kAnalyzeGsd, kAnalyzeSurface, kAnalyzeAccum, kAnalyzeEbp };

std::string_view to_string(Mode mode);
std::optional<Mode> parse_mode(std::string_view name);

/// Where analog pipelines go when the model comes from a preset.
struct AnalogFlags {
  bool inputs = true;
  bool signals = true;
  bool weights = true;
  friend bool operator==(const AnalogFlags&, const AnalogFlags&) = default;
};

struct ModelSection {
  std::string preset = "convnet-mini";  // convnet-mini | conv-stack | mlp | custom
  std::size_t conv_layers = 6;           // conv-stack only
  std::size_t linear_layers = 3;         // conv-stack and mlp
  std::vector<std::size_t> channels = {8, 16, 32};
  std::vector<std::size_t> hidden = {64, 32};
  AnalogFlags analog;
  std::vector<LayerSpec> layers;  // custom only
  Shape input_shape;              // empty: taken from the dataset
  std::size_t classes = 0;        // 0: taken from the dataset
  friend bool operator==(const ModelSection&, const ModelSection&) = default;
};

struct DatasetSection {
  std::string source = "synthetic";  // synthetic | csv | idx
  SyntheticSpec synthetic;
  std::string train_path, test_path;               // csv
  std::string train_images, train_labels;          // idx
  std::string test_images, test_labels;            // idx
  bool grayscale = false;
  friend bool operator==(const DatasetSection&, const DatasetSection&) = default;
};

struct AnalysisSection {
  double x0 = 0.0;
  double eps = 1e-3;
  std::vector<double> i_values;  // empty: use activation.i only
  int bits = 8;
  double ep = 0.5;
  std::size_t grid_points = 11;
  std::size_t trials = 10000;
  ProductMode product = ProductMode::kClosedForm;
  std::vector<double> x_values = {0.0};
  std::vector<std::size_t> n_values = {1000000};
  double sigma = 0.01;
  std::vector<double> s_values;  // empty: use activation.s only
  std::vector<int> bits_values;  // empty: use analysis.bits only
  double window = 0.25;
  friend bool operator==(const AnalysisSection&, const AnalysisSection&) = default;
};

/// One sweep axis. Values stay JSON so string axes (activation kind) and
/// numeric axes share a representation.
struct SweepAxis {
  std::string name;
  std::vector<nlohmann::json> values;
  friend bool operator==(const SweepAxis&, const SweepAxis&) = default;
};

struct SweepSection {
  Mode base = Mode::kTrain;
  std::vector<SweepAxis> axes;
  friend bool operator==(const SweepSection&, const SweepSection&) = default;
};

struct ExperimentConfig {
  Mode mode = Mode::kTrain;
  std::uint64_t seed = 1;       // noise and shuffling
  std::uint64_t init_seed = 1;  // weight initialization; defaults to seed
  std::string out_dir = "out";
  ActivationSpec activation;
  std::optional<QuantNoiseSpec> noise;  // absent: digital
  ModelSection model;
  TrainConfig train;
  DatasetSection dataset;
  AnalysisSection analysis;
  SweepSection sweep;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Axis names accepted in sweep.axes.
const std::vector<std::string>& sweep_axis_names();

/// Parses and validates. Unknown keys, wrong types and out-of-range values
/// throw ConfigError naming the dotted field path; malformed JSON reports
/// line and column.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig parse_config_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);

/// Fully resolved form: every default written out, noise carrying both
/// sigma and ep. parse_config(to_json(c)) == c.
nlohmann::json to_json(const ExperimentConfig& config);

/// Cross-field checks (sweep axes iff mode == sweep, dataset vs model
/// shape, batch size vs dataset). Called by parse_config.
void validate(const ExperimentConfig& config);

/// FNV-1a 64 of the canonical JSON dump (sorted keys), as 16 hex digits.
/// The output directory is excluded so relocating results keeps digests.
std::string config_digest(const ExperimentConfig& config);
std::string fnv1a_hex(std::string_view bytes);

/// Applies one axis value to a copy of `config` (see sweep_axis_names).
void apply_axis(ExperimentConfig& config, const std::string& axis, const nlohmann::json& value);

/// The model the config describes, with the noise spec wired into the
/// preset's analog sites. `sample_shape` and `classes` come from the loaded
/// dataset and fill in whatever the model section leaves open.
ModelConfig model_config(const ExperimentConfig& config, const Shape& sample_shape, std::size_t classes);

/// Sample shape and class count of the synthetic source, or nullopt when
/// they are only known after reading the files.
std::optional<std::pair<Shape, std::size_t>> declared_dataset_shape(const DatasetSection& dataset);

}  // namespace agrad
