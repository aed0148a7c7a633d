// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "core/activations.hpp"
#include "core/autodiff.hpp"
#include "core/quant_noise.hpp"

namespace agrad {

enum class LayerKind { kLinear, kConv2d, kMaxPool, kFlatten, kActivation };

std::string_view to_string(LayerKind kind);
std::optional<LayerKind> parse_layer_kind(std::string_view name);

/// One layer. `in`/`out` are features (linear) or channels (conv2d).
/// `analog` corrupts the layer output, `weight_analog` the weights and
/// biases on every read.
struct LayerSpec {
  LayerKind kind = LayerKind::kLinear;
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t kernel = 3;
  std::size_t padding = 1;
  ActivationSpec activation;
  std::optional<QuantNoiseSpec> analog;
  std::optional<QuantNoiseSpec> weight_analog;

  bool has_weights() const noexcept { return kind == LayerKind::kLinear || kind == LayerKind::kConv2d; }
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ModelConfig {
  Shape input_shape;  // per sample: [C, H, W] or [F]
  std::vector<LayerSpec> layers;
  std::optional<QuantNoiseSpec> input_analog;
  std::size_t classes = 10;
  std::string preset;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Which signals of a preset pass through the quantized-noise pipeline.
struct AnalogPlacement {
  std::optional<QuantNoiseSpec> noise;  // absent: a plain digital network
  bool inputs = true;
  bool signals = true;
  bool weights = true;
};

/// Six 3x3 conv layers in three pairs (each pair followed by a 2x2 max-pool
/// while the spatial extent allows it), then three linear layers.
ModelConfig convnet_mini(const Shape& input_shape, std::size_t classes, const ActivationSpec& act,
                         const AnalogPlacement& analog, std::vector<std::size_t> channels = {8, 16, 32},
                         std::vector<std::size_t> hidden = {64, 32});

/// Generalized family: `conv_layers` convs (channels grow by pair) then
/// `linear_layers` linear layers. conv_layers may be 0.
ModelConfig conv_stack(const Shape& input_shape, std::size_t classes, const ActivationSpec& act,
                       const AnalogPlacement& analog, std::size_t conv_layers, std::size_t linear_layers,
                       std::vector<std::size_t> channels = {8, 16, 32}, std::size_t hidden = 64);

/// `linear_layers` linear layers (flattening image inputs first), hidden
/// width `hidden`.
ModelConfig mlp(std::size_t linear_layers, const Shape& input_shape, std::size_t classes, const ActivationSpec& act,
                const AnalogPlacement& analog, std::size_t hidden = 64);

/// Per-sample shape after each layer; throws ConfigError naming the first
/// layer that breaks the chain ("model.layers[3]").
std::vector<Shape> infer_shapes(const ModelConfig& config);

struct Model {
  ModelConfig config;
  Graph graph;
  NodeId logits = 0;
  NodeId loss = 0;
  std::vector<std::string> parameter_names;
  std::size_t signal_sites = 0;  // pipelines on the input and on layer outputs
  std::size_t weight_sites = 0;  // pipelines on weights and biases
};

/// Builds the autodiff graph: input "x" ([N, ...input_shape]), labels "y",
/// outputs "logits" and "loss". Weights use fan-in scaled uniform
/// initialization U(-1/sqrt(fan_in), 1/sqrt(fan_in)) drawn from `seed`.
Model build_model(const ModelConfig& config, std::uint64_t seed);

}  // namespace agrad
