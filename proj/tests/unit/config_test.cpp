// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#include "core/config.hpp"

#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "core/error.hpp"

namespace agrad {
namespace {

std::string field_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<accepted>";
}

TEST(Config, DefaultsAreValid) {
  const auto c = parse_config("{}");
  EXPECT_EQ(c.mode, Mode::kTrain);
  EXPECT_EQ(c.model.preset, "convnet-mini");
  EXPECT_FALSE(c.noise.has_value());
  EXPECT_EQ(c.init_seed, c.seed);
}

TEST(Config, RoundTripKeepsDigest) {
  const char* text = R"({
    "mode": "train", "seed": 42,
    "activation": {"kind": "interp-relu-gelu", "i": 0.3},
    "noise": {"bits": 4, "ep": 0.5},
    "model": {"preset": "convnet-mini", "channels": [4, 8, 8], "hidden": [16, 16]},
    "train": {"epochs": 2, "batch_size": 16, "learning_rate": 0.001, "optimizer": "adam"},
    "dataset": {"source": "synthetic", "classes": 4, "samples_per_class": 30, "image_size": 8}
  })";
  const auto c = parse_config(text);
  const auto again = parse_config_json(to_json(c));
  EXPECT_EQ(again, c);
  EXPECT_EQ(config_digest(again), config_digest(c));
  ASSERT_TRUE(c.noise && c.noise->sigma && c.noise->target_ep);
  EXPECT_NEAR(*c.noise->sigma, 0.0494201, 1e-6);
}

TEST(Config, DigestIgnoresOutDirOnly) {
  auto a = parse_config(R"({"out_dir": "x"})");
  auto b = parse_config(R"({"out_dir": "y"})");
  EXPECT_EQ(config_digest(a), config_digest(b));
  b.seed = 2;
  EXPECT_NE(config_digest(a), config_digest(b));
  EXPECT_EQ(config_digest(a).size(), 16u);
}

TEST(Config, Fnv1aKnownVectors) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}

TEST(Config, FieldPreciseErrors) {
  EXPECT_EQ(field_of(R"({"activation": {"kind": "interp-relu-gelu", "i": 1.5}})"), "activation.i");
  EXPECT_EQ(field_of(R"({"activation": {"kind": "relu", "sloppy": 1}})"), "activation.sloppy");
  EXPECT_EQ(field_of(R"({"trian": {}})"), "trian");
  EXPECT_EQ(field_of(R"({"train": {"epochs": 0}})"), "train.epochs");
  EXPECT_EQ(field_of(R"({"train": {"optimizer": "rmsprop"}})"), "train.optimizer");
  EXPECT_EQ(field_of(R"({"noise": {"bits": 0, "ep": 0.5}})"), "noise.bits");
  EXPECT_EQ(field_of(R"({"noise": {"bits": 4}})"), "noise.sigma");
  EXPECT_EQ(field_of(R"({"dataset": {"samples_per_class": 5}})"), "dataset.samples_per_class");
  EXPECT_EQ(field_of(R"({"mode": "sweep"})"), "sweep.axes");
  EXPECT_EQ(field_of(R"({"sweep": {"axes": [{"name": "lr", "values": [0.1]}]}})"), "sweep.axes");
  EXPECT_EQ(field_of(R"({"mode": "sweep", "sweep": {"axes": [{"name": "colour", "values": [1]}]}})"),
            "sweep.axes[0].name");
  EXPECT_EQ(field_of(R"({"mode": "sweep", "sweep": {"axes": [{"name": "i", "values": [0.5, 2]}]}})"),
            "sweep.axes[0].values[1]");
  EXPECT_EQ(field_of(R"({"seed": "seven"})"), "seed");
}

TEST(Config, MalformedJsonReportsLocation) {
  try {
    parse_config("{\n  \"mode\": \"train\",\n  oops\n}");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Config, NoiseSigmaAndEpMustAgree) {
  EXPECT_EQ(field_of(R"({"noise": {"bits": 4, "sigma": 0.01, "ep": 0.5}})"), "noise.ep");
  const auto c = parse_config(R"({"noise": {"bits": 4, "ep": 0.5}})");
  const auto j = to_json(c);
  EXPECT_NO_THROW(parse_config_json(j));
}

TEST(Config, LoadFileErrors) {
  EXPECT_THROW(load_config("/nonexistent/agrad.json"), IoError);
  const auto path = std::filesystem::temp_directory_path() / "agrad_bad_config.json";
  std::ofstream(path) << R"({"activation": {"kind": "interp-relu-gelu", "i": 1.5}})";
  try {
    load_config(path.string());
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "activation.i");
    EXPECT_NE(std::string(e.what()).find(path.string()), std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST(Config, ApplyAxis) {
  auto c = parse_config(R"({"noise": {"bits": 4, "ep": 0.5}})");
  apply_axis(c, "bits", 6);
  EXPECT_EQ(c.noise->bits, 6);
  EXPECT_NEAR(*c.noise->target_ep, 0.5, 1e-12);
  EXPECT_NEAR(error_probability(6, *c.noise->sigma), 0.5, 1e-9);
  apply_axis(c, "ep", 0.8);
  EXPECT_NEAR(error_probability(6, *c.noise->sigma), 0.8, 1e-9);
  apply_axis(c, "lr", 0.01);
  EXPECT_EQ(c.train.learning_rate, 0.01);
  apply_axis(c, "linear_layers", 2);
  EXPECT_EQ(c.model.preset, "conv-stack");
  apply_axis(c, "activation", nlohmann::json{{"kind", "leaky-relu"}, {"alpha", 0.3}});
  EXPECT_EQ(c.activation.kind, ActivationKind::kLeakyRelu);
  EXPECT_EQ(c.activation.alpha, 0.3);
  EXPECT_THROW(apply_axis(c, "nope", 1), ConfigError);
}

TEST(Config, ModelConfigFromPresets) {
  auto c = parse_config(R"({"noise": {"bits": 4, "ep": 0.5}, "model": {"analog": {"weights": false}}})");
  auto mc = model_config(c, {1, 16, 16}, 10);
  EXPECT_EQ(mc.input_shape, (Shape{1, 16, 16}));
  EXPECT_TRUE(mc.input_analog.has_value());
  for (const auto& l : mc.layers) EXPECT_FALSE(l.weight_analog.has_value());
  c = parse_config(R"({"model": {"preset": "mlp", "linear_layers": 2, "hidden": [12]}})");
  mc = model_config(c, {1, 8, 8}, 3);
  EXPECT_EQ(mc.classes, 3u);
}

TEST(Config, CustomLayers) {
  const auto c = parse_config(R"({
    "noise": {"bits": 6, "sigma": 0.01},
    "model": {"preset": "custom", "layers": [
      {"kind": "flatten"},
      {"kind": "linear", "in": 64, "out": 8, "analog": true},
      {"kind": "activation", "activation": {"kind": "gelu"}},
      {"kind": "linear", "in": 8, "out": 3}
    ]},
    "dataset": {"classes": 3, "samples_per_class": 12, "image_size": 8},
    "train": {"batch_size": 4}
  })");
  const auto mc = model_config(c, {1, 8, 8}, 3);
  ASSERT_EQ(mc.layers.size(), 4u);
  EXPECT_TRUE(mc.layers[1].analog.has_value());
  EXPECT_EQ(field_of(R"({"model": {"preset": "custom", "layers": [{"kind": "linear", "in": 3, "out": 3}]},
                         "dataset": {"classes": 3, "image_size": 8}})"),
            "model.layers[0]");
}

}  // namespace
}  // namespace agrad
