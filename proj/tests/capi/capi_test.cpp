// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

// Exercises the shared library through its public header only.

#include <agrad/agrad.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <gtest/gtest.h>

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  agrad_string_free(s);
  return out;
}

TEST(CApi, VersionAndNoiseHelpers) {
  EXPECT_STRNE(agrad_version(), "");
  double sigma = 0, ep = 0;
  ASSERT_EQ(agrad_sigma_from_ep(4, 0.5, &sigma), AGRAD_OK);
  EXPECT_NEAR(sigma, 0.0494201, 1e-6);
  ASSERT_EQ(agrad_error_probability(4, sigma, &ep), AGRAD_OK);
  EXPECT_NEAR(ep, 0.5, 1e-9);
  EXPECT_EQ(agrad_sigma_from_ep(4, 1.5, &sigma), AGRAD_ERR_CONFIG);
  EXPECT_NE(std::string(agrad_last_error()), "");
  EXPECT_EQ(agrad_sigma_from_ep(4, 0.5, nullptr), AGRAD_ERR_INVALID_ARGUMENT);

  std::vector<double> x = {0.3, -0.3, 0.0};
  ASSERT_EQ(agrad_reduce_precision(x.data(), x.size(), 2, x.data()), AGRAD_OK);
  EXPECT_EQ(x, (std::vector<double>{0.25, -0.25, 0.0}));
}

TEST(CApi, ActivationHandle) {
  agrad_activation* act = nullptr;
  ASSERT_EQ(agrad_activation_create("gelu", 1.0, 0.0, 0.0, &act), AGRAD_OK);
  const double x[2] = {0.0, 1.0};
  double y[2], d[2];
  ASSERT_EQ(agrad_activation_eval(act, x, 2, y), AGRAD_OK);
  ASSERT_EQ(agrad_activation_derivative(act, x, 2, d), AGRAD_OK);
  EXPECT_EQ(y[0], 0.0);
  EXPECT_NEAR(y[1], 0.8413, 1e-4);
  EXPECT_DOUBLE_EQ(d[0], 0.5);
  double g = -1;
  ASSERT_EQ(agrad_activation_gsd(act, 0.0, 1e-3, &g), AGRAD_OK);
  EXPECT_LT(g, 1e-3);
  agrad_activation_destroy(act);

  ASSERT_EQ(agrad_activation_create("relu", 1.0, 0.0, 0.0, &act), AGRAD_OK);
  ASSERT_EQ(agrad_activation_gsd(act, 0.0, 1e-3, &g), AGRAD_OK);
  EXPECT_DOUBLE_EQ(g, 1.0);
  agrad_activation_destroy(act);

  EXPECT_EQ(agrad_activation_create("swish-ish", 1.0, 0.0, 0.0, &act), AGRAD_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(agrad_activation_create("interp-relu-gelu", 1.0, 1.5, 0.0, &act), AGRAD_ERR_CONFIG);
  EXPECT_STREQ(agrad_last_error_field(), "activation.i");
  agrad_activation_destroy(nullptr);
}

TEST(CApi, ExperimentLifecycle) {
  const auto dir = std::filesystem::temp_directory_path() / "agrad_capi_test";
  std::filesystem::remove_all(dir);
  agrad_experiment* exp = nullptr;
  ASSERT_EQ(agrad_experiment_load_json(R"({"mode": "analyze-gsd", "activation": {"kind": "leaky-relu", "alpha": 0.25}})",
                                       &exp),
            AGRAD_OK);
  ASSERT_EQ(agrad_experiment_set_out_dir(exp, dir.c_str()), AGRAD_OK);
  EXPECT_EQ(agrad_experiment_set_format(exp, "xml"), AGRAD_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(agrad_experiment_set_workers(exp, 0), AGRAD_ERR_INVALID_ARGUMENT);

  char* s = nullptr;
  ASSERT_EQ(agrad_experiment_mode(exp, &s), AGRAD_OK);
  EXPECT_EQ(take(s), "analyze-gsd");
  ASSERT_EQ(agrad_experiment_digest(exp, &s), AGRAD_OK);
  const std::string digest = take(s);
  EXPECT_EQ(digest.size(), 16u);

  std::vector<std::string> log;
  agrad_experiment_set_log(
      exp, [](const char* line, void* user) { static_cast<std::vector<std::string>*>(user)->push_back(line); }, &log);
  ASSERT_EQ(agrad_experiment_sweep(exp, &s), AGRAD_ERR_CONFIG);
  ASSERT_EQ(agrad_experiment_run(exp, &s), AGRAD_OK);
  const std::string record = take(s);
  EXPECT_NE(record.find(digest), std::string::npos);
  EXPECT_NE(record.find("\"gsd\""), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / ("record-" + digest + ".json")));

  ASSERT_EQ(agrad_emit(dir.c_str(), "gsd-vs-i", "csv", exp, &s), AGRAD_OK);
  take(s);
  EXPECT_TRUE(std::filesystem::exists(dir / "plotdata-gsd-vs-i.csv"));
  EXPECT_EQ(agrad_emit((dir / "nope").c_str(), "gsd-vs-i", "csv", nullptr, &s), AGRAD_ERR_IO);
  agrad_experiment_destroy(exp);
  std::filesystem::remove_all(dir);
}

TEST(CApi, LoadErrors) {
  agrad_experiment* exp = nullptr;
  EXPECT_EQ(agrad_experiment_load_json(R"({"train": {"epochs": -1}})", &exp), AGRAD_ERR_CONFIG);
  EXPECT_STREQ(agrad_last_error_field(), "train.epochs");
  EXPECT_EQ(exp, nullptr);
  EXPECT_EQ(agrad_experiment_load_file("/nonexistent/agrad.json", &exp), AGRAD_ERR_IO);
  EXPECT_EQ(agrad_experiment_load_json(nullptr, &exp), AGRAD_ERR_INVALID_ARGUMENT);
}

TEST(CApi, ShippedConfigsLoad) {
  std::size_t seen = 0;
  for (const auto& e : std::filesystem::directory_iterator(AGRAD_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    agrad_experiment* exp = nullptr;
    EXPECT_EQ(agrad_experiment_load_file(e.path().c_str(), &exp), AGRAD_OK)
        << e.path() << ": " << agrad_last_error();
    agrad_experiment_destroy(exp);
    ++seen;
  }
  EXPECT_GT(seen, 0u);
}

}  // namespace
