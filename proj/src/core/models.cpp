// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#include "core/models.hpp"

#include <cmath>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace agrad {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kLinear: return "linear";
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kActivation: return "activation";
  }
  return "unknown";
}

std::optional<LayerKind> parse_layer_kind(std::string_view name) {
  if (name == "linear") return LayerKind::kLinear;
  if (name == "conv2d") return LayerKind::kConv2d;
  if (name == "maxpool") return LayerKind::kMaxPool;
  if (name == "flatten") return LayerKind::kFlatten;
  if (name == "activation") return LayerKind::kActivation;
  return std::nullopt;
}

namespace {

LayerSpec weighted(LayerKind kind, std::size_t in, std::size_t out, const AnalogPlacement& analog) {
  LayerSpec l;
  l.kind = kind;
  l.in = in;
  l.out = out;
  if (analog.noise && analog.signals) l.analog = analog.noise;
  if (analog.noise && analog.weights) l.weight_analog = analog.noise;
  return l;
}

LayerSpec act_layer(const ActivationSpec& act) {
  LayerSpec l;
  l.kind = LayerKind::kActivation;
  l.activation = act;
  return l;
}

LayerSpec plain(LayerKind kind) {
  LayerSpec l;
  l.kind = kind;
  return l;
}

void append_linear_head(ModelConfig& cfg, std::size_t in, std::size_t classes, const ActivationSpec& act,
                        const AnalogPlacement& analog, const std::vector<std::size_t>& hidden) {
  std::size_t width = in;
  for (std::size_t h : hidden) {
    cfg.layers.push_back(weighted(LayerKind::kLinear, width, h, analog));
    cfg.layers.push_back(act_layer(act));
    width = h;
  }
  cfg.layers.push_back(weighted(LayerKind::kLinear, width, classes, analog));
}

}  // namespace

ModelConfig conv_stack(const Shape& input_shape, std::size_t classes, const ActivationSpec& act,
                       const AnalogPlacement& analog, std::size_t conv_layers, std::size_t linear_layers,
                       std::vector<std::size_t> channels, std::size_t hidden) {
  if (linear_layers == 0) throw ConfigError("at least one linear layer is required", "model.linear_layers");
  if (conv_layers > 0 && input_shape.size() != 3)
    throw ConfigError("conv layers need [C,H,W] inputs", "model.input_shape");
  if (channels.empty()) channels = {8};
  ModelConfig cfg;
  cfg.input_shape = input_shape;
  cfg.classes = classes;
  if (analog.noise && analog.inputs) cfg.input_analog = analog.noise;

  std::size_t c = conv_layers > 0 ? input_shape[0] : 0;
  std::size_t h = conv_layers > 0 ? input_shape[1] : 0;
  std::size_t w = conv_layers > 0 ? input_shape[2] : 0;
  for (std::size_t k = 0; k < conv_layers; ++k) {
    const std::size_t out = channels[std::min(k / 2, channels.size() - 1)];
    cfg.layers.push_back(weighted(LayerKind::kConv2d, c, out, analog));
    cfg.layers.push_back(act_layer(act));
    c = out;
    if (k % 2 == 1 && h >= 4 && w >= 4) {
      cfg.layers.push_back(plain(LayerKind::kMaxPool));
      h /= 2;
      w /= 2;
    }
  }
  cfg.layers.push_back(plain(LayerKind::kFlatten));
  const std::size_t flat = conv_layers > 0 ? c * h * w : shape_size(input_shape);
  append_linear_head(cfg, flat, classes, act, analog, std::vector<std::size_t>(linear_layers - 1, hidden));
  return cfg;
}

ModelConfig convnet_mini(const Shape& input_shape, std::size_t classes, const ActivationSpec& act,
                         const AnalogPlacement& analog, std::vector<std::size_t> channels,
                         std::vector<std::size_t> hidden) {
  if (input_shape.size() != 3) throw ConfigError("convnet-mini needs [C,H,W] inputs", "model.input_shape");
  if (channels.empty()) throw ConfigError("need at least one channel count", "model.channels");
  ModelConfig cfg;
  cfg.preset = "convnet-mini";
  cfg.input_shape = input_shape;
  cfg.classes = classes;
  if (analog.noise && analog.inputs) cfg.input_analog = analog.noise;
  std::size_t c = input_shape[0], h = input_shape[1], w = input_shape[2];
  for (std::size_t k = 0; k < 6; ++k) {
    const std::size_t out = channels[std::min(k / 2, channels.size() - 1)];
    cfg.layers.push_back(weighted(LayerKind::kConv2d, c, out, analog));
    cfg.layers.push_back(act_layer(act));
    c = out;
    if (k % 2 == 1 && h >= 4 && w >= 4) {
      cfg.layers.push_back(plain(LayerKind::kMaxPool));
      h /= 2;
      w /= 2;
    }
  }
  cfg.layers.push_back(plain(LayerKind::kFlatten));
  if (hidden.size() != 2) throw ConfigError("convnet-mini has exactly two hidden linear layers", "model.hidden");
  append_linear_head(cfg, c * h * w, classes, act, analog, hidden);
  return cfg;
}

ModelConfig mlp(std::size_t linear_layers, const Shape& input_shape, std::size_t classes, const ActivationSpec& act,
                const AnalogPlacement& analog, std::size_t hidden) {
  if (linear_layers == 0) throw ConfigError("at least one linear layer is required", "model.linear_layers");
  ModelConfig cfg;
  cfg.preset = "mlp-" + std::to_string(linear_layers);
  cfg.input_shape = input_shape;
  cfg.classes = classes;
  if (analog.noise && analog.inputs) cfg.input_analog = analog.noise;
  if (input_shape.size() > 1) cfg.layers.push_back(plain(LayerKind::kFlatten));
  append_linear_head(cfg, shape_size(input_shape), classes, act, analog,
                     std::vector<std::size_t>(linear_layers - 1, hidden));
  return cfg;
}

std::vector<Shape> infer_shapes(const ModelConfig& config) {
  if (config.input_shape.empty()) throw ConfigError("input shape is empty", "model.input_shape");
  if (config.layers.empty()) throw ConfigError("model has no layers", "model.layers");
  std::vector<Shape> shapes;
  Shape cur = config.input_shape;
  for (std::size_t k = 0; k < config.layers.size(); ++k) {
    const LayerSpec& l = config.layers[k];
    const std::string field = "model.layers[" + std::to_string(k) + "]";
    auto fail = [&](const std::string& why) { throw ConfigError(why, field); };
    switch (l.kind) {
      case LayerKind::kLinear:
        if (cur.size() != 1) fail(std::string(to_string(l.kind)) + " needs a flat input, got " + shape_str(cur));
        if (cur[0] != l.in) fail("expects " + std::to_string(l.in) + " inputs, previous layer gives " + std::to_string(cur[0]));
        if (l.out == 0) fail("output width must be positive");
        cur = {l.out};
        break;
      case LayerKind::kConv2d:
        if (cur.size() != 3) fail("conv2d needs [C,H,W] input, got " + shape_str(cur));
        if (cur[0] != l.in) fail("expects " + std::to_string(l.in) + " channels, previous layer gives " + std::to_string(cur[0]));
        if (l.out == 0 || l.kernel == 0) fail("channels and kernel must be positive");
        if (cur[1] + 2 * l.padding < l.kernel || cur[2] + 2 * l.padding < l.kernel) fail("kernel larger than input");
        cur = {l.out, cur[1] + 2 * l.padding - l.kernel + 1, cur[2] + 2 * l.padding - l.kernel + 1};
        break;
      case LayerKind::kMaxPool:
        if (cur.size() != 3 || cur[1] < 2 || cur[2] < 2) fail("maxpool needs [C,H,W] with H,W >= 2, got " + shape_str(cur));
        cur = {cur[0], cur[1] / 2, cur[2] / 2};
        break;
      case LayerKind::kFlatten:
        cur = {shape_size(cur)};
        break;
      case LayerKind::kActivation:
        l.activation.validate();
        if (l.activation.is_glu()) fail("gated activations are not supported as model layers");
        break;
    }
    if (l.analog) l.analog->validate(field + ".analog");
    if (l.weight_analog) l.weight_analog->validate(field + ".weight_analog");
    if ((l.analog || l.weight_analog) && !l.has_weights() && l.weight_analog)
      fail("weight_analog on a layer without weights");
    shapes.push_back(cur);
  }
  if (cur.size() != 1 || cur[0] != config.classes)
    throw ConfigError("final layer gives " + shape_str(cur) + " but the model has " + std::to_string(config.classes) +
                          " classes",
                      "model.classes");
  if (config.input_analog) config.input_analog->validate("model.input_analog");
  return shapes;
}

Model build_model(const ModelConfig& config, std::uint64_t seed) {
  infer_shapes(config);
  Model model;
  model.config = config;
  Graph& g = model.graph;
  std::uint64_t next_stream = 0;

  NodeId h = g.input("x");
  const NodeId labels = g.input("y");
  if (config.input_analog) {
    h = g.quant_noise(h, *config.input_analog, next_stream++);
    ++model.signal_sites;
  }

  RngStream init(seed, 0x1417);
  auto uniform_tensor = [&](Shape shape, double bound) {
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = (2.0 * init.uniform() - 1.0) * bound;
    return t;
  };

  for (std::size_t k = 0; k < config.layers.size(); ++k) {
    const LayerSpec& l = config.layers[k];
    const std::string prefix = "layer" + std::to_string(k);
    switch (l.kind) {
      case LayerKind::kLinear:
      case LayerKind::kConv2d: {
        const bool conv = l.kind == LayerKind::kConv2d;
        const std::size_t fan_in = conv ? l.in * l.kernel * l.kernel : l.in;
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        const Shape wshape = conv ? Shape{l.out, l.in, l.kernel, l.kernel} : Shape{l.in, l.out};
        NodeId w = g.parameter(prefix + ".weight", uniform_tensor(wshape, bound));
        NodeId b = g.parameter(prefix + ".bias", uniform_tensor({l.out}, bound));
        model.parameter_names.push_back(prefix + ".weight");
        model.parameter_names.push_back(prefix + ".bias");
        if (l.weight_analog) {
          w = g.quant_noise(w, *l.weight_analog, next_stream++);
          b = g.quant_noise(b, *l.weight_analog, next_stream++);
          model.weight_sites += 2;
        }
        h = conv ? g.conv2d(h, w, b, l.padding) : g.add(g.matmul(h, w), b);
        if (l.analog) {
          h = g.quant_noise(h, *l.analog, next_stream++);
          ++model.signal_sites;
        }
        break;
      }
      case LayerKind::kMaxPool:
        h = g.maxpool2(h);
        break;
      case LayerKind::kFlatten:
        h = g.flatten(h);
        break;
      case LayerKind::kActivation:
        h = g.activation(h, l.activation);
        break;
    }
  }
  model.logits = h;
  model.loss = g.softmax_cross_entropy(h, labels);
  g.set_output("logits", model.logits);
  g.set_output("loss", model.loss);
  return model;
}

}  // namespace agrad
