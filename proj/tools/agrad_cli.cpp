// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end over the C API: run | sweep | gen-data | emit.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "agrad/agrad.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  std::size_t cap = 500;
  std::string format = "csv";
  std::string kind;
  bool quiet = false;
};

int exit_code(agrad_status s) {
  switch (s) {
    case AGRAD_OK: return kExitOk;
    case AGRAD_ERR_CONFIG: return kExitConfig;
    case AGRAD_ERR_IO: return kExitIo;
    default: return kExitFailure;
  }
}

int report(agrad_status s) {
  if (s != AGRAD_OK && agrad_last_error()[0]) std::fprintf(stderr, "agrad: error: %s\n", agrad_last_error());
  return exit_code(s);
}

struct ExperimentDeleter {
  void operator()(agrad_experiment* e) const { agrad_experiment_destroy(e); }
};
using ExperimentPtr = std::unique_ptr<agrad_experiment, ExperimentDeleter>;

struct StringDeleter {
  void operator()(char* s) const { agrad_string_free(s); }
};
using OwnedString = std::unique_ptr<char, StringDeleter>;

std::string effective_out(const Flags& f) {
  if (const char* env = std::getenv("ANALOG_GRAD_OUT"); env && *env) return env;
  return f.out;
}

void log_to_stderr(const char* line, void*) { std::fprintf(stderr, "%s\n", line); }

/// Loads the config (or an empty one) and applies the shared flags.
agrad_status load(const Flags& f, bool require_config, ExperimentPtr& out) {
  agrad_experiment* raw = nullptr;
  agrad_status s;
  if (!f.config.empty()) {
    s = agrad_experiment_load_file(f.config.c_str(), &raw);
  } else if (require_config) {
    std::fprintf(stderr, "agrad: error: --config is required\n");
    return AGRAD_ERR_CONFIG;
  } else {
    s = agrad_experiment_load_json("{}", &raw);
  }
  if (s != AGRAD_OK) return s;
  out.reset(raw);
  const std::string dir = effective_out(f);
  if (!dir.empty() && (s = agrad_experiment_set_out_dir(raw, dir.c_str())) != AGRAD_OK) return s;
  if (f.seed && (s = agrad_experiment_set_seed(raw, *f.seed)) != AGRAD_OK) return s;
  if ((s = agrad_experiment_set_workers(raw, f.workers)) != AGRAD_OK) return s;
  if ((s = agrad_experiment_set_cap(raw, f.cap)) != AGRAD_OK) return s;
  if ((s = agrad_experiment_set_format(raw, f.format.c_str())) != AGRAD_OK) return s;
  if (!f.quiet && (s = agrad_experiment_set_log(raw, log_to_stderr, nullptr)) != AGRAD_OK) return s;
  return AGRAD_OK;
}

void print_result(const Flags& f, const char* json_text) {
  if (f.format == "json") {
    std::printf("%s\n", json_text);
    return;
  }
  // csv format: a compact key=value line on stdout; files carry the data.
  const auto j = nlohmann::json::parse(json_text, nullptr, false);
  if (j.is_discarded()) {
    std::printf("%s\n", json_text);
    return;
  }
  std::string line;
  for (const char* key : {"mode", "status", "config_digest", "summary", "path", "rows", "spearman_rho",
                          "train_path", "test_path", "train_rows", "test_rows"}) {
    if (!j.contains(key)) continue;
    const auto& v = j[key];
    line += (line.empty() ? "" : " ") + std::string(key) + "=" + (v.is_string() ? v.get<std::string>() : v.dump());
  }
  if (j.contains("metrics") && j["metrics"].contains("final_top1"))
    line += " final_top1=" + j["metrics"]["final_top1"].dump();
  std::printf("%s\n", line.c_str());
}

int cmd_run(const Flags& f, bool sweep_only) {
  ExperimentPtr exp;
  if (agrad_status s = load(f, true, exp); s != AGRAD_OK) return report(s);
  char* raw = nullptr;
  const agrad_status s = sweep_only ? agrad_experiment_sweep(exp.get(), &raw) : agrad_experiment_run(exp.get(), &raw);
  OwnedString result(raw);
  if (s != AGRAD_OK) return report(s);
  print_result(f, result.get());
  return kExitOk;
}

int cmd_gen_data(const Flags& f) {
  ExperimentPtr exp;
  if (agrad_status s = load(f, false, exp); s != AGRAD_OK) return report(s);
  char* raw = nullptr;
  const agrad_status s = agrad_experiment_generate_dataset(exp.get(), &raw);
  OwnedString result(raw);
  if (s != AGRAD_OK) return report(s);
  print_result(f, result.get());
  return kExitOk;
}

int cmd_emit(const Flags& f) {
  ExperimentPtr exp;
  if (!f.config.empty())
    if (agrad_status s = load(f, true, exp); s != AGRAD_OK) return report(s);
  std::string dir = effective_out(f);
  if (dir.empty()) dir = "out";
  char* raw = nullptr;
  const agrad_status s = agrad_emit(dir.c_str(), f.kind.c_str(), f.format.c_str(), exp.get(), &raw);
  OwnedString result(raw);
  if (s != AGRAD_OK) return report(s);
  print_result(f, result.get());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"agrad: analog gradient-noise experiments"};
  app.require_subcommand(1);
  Flags f;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "Experiment config (JSON)");
    sub->add_option("--out", f.out, "Output directory (ANALOG_GRAD_OUT overrides)");
    sub->add_option("--seed", seed, "Master seed (overrides the config)");
    sub->add_option("--workers", f.workers, "Concurrent sweep cells")->check(CLI::PositiveNumber);
    sub->add_option("--cap", f.cap, "Maximum sweep cells")->check(CLI::NonNegativeNumber);
    sub->add_option("--format", f.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    sub->add_flag("--quiet", f.quiet, "No progress lines");
  };
  auto* run = app.add_subcommand("run", "Run the configured experiment");
  auto* sweep = app.add_subcommand("sweep", "Run a sweep config");
  auto* gen = app.add_subcommand("gen-data", "Write the synthetic dataset as CSV");
  auto* emit = app.add_subcommand("emit", "Write plot data from records");
  for (auto* sub : {run, sweep, gen, emit}) add_common(sub);
  emit->add_option("--kind", f.kind, "gsd-vs-i, accuracy-vs-i, accuracy, surface, accum, ebp, history")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  for (auto* sub : {run, sweep, gen, emit})
    if (sub->count("--seed")) f.seed = seed;

  if (run->parsed()) return cmd_run(f, false);
  if (sweep->parsed()) return cmd_run(f, true);
  if (gen->parsed()) return cmd_gen_data(f);
  return cmd_emit(f);
}
