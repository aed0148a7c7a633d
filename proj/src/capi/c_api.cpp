// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#include "agrad/agrad.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "core/activations.hpp"
#include "core/config.hpp"
#include "core/error.hpp"
#include "core/harness.hpp"
#include "core/quant_noise.hpp"

struct agrad_activation {
  agrad::ActivationSpec spec;
};

struct agrad_experiment {
  agrad::ExperimentConfig config;
  agrad::RunOptions options;
  agrad_log_fn log_fn = nullptr;
  void* log_user = nullptr;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_field;

agrad_status fail(agrad_status status, const std::string& message, const std::string& field = {}) {
  g_error = message;
  g_field = field;
  return status;
}

// Maps the exception hierarchy onto status codes. Nothing escapes the C boundary.
template <typename F>
agrad_status guarded(F&& f) noexcept {
  g_error.clear();
  g_field.clear();
  try {
    f();
    return AGRAD_OK;
  } catch (const agrad::ConfigError& e) {
    return fail(AGRAD_ERR_CONFIG, e.what(), e.field());
  } catch (const agrad::IoError& e) {
    return fail(AGRAD_ERR_IO, e.what());
  } catch (const agrad::ShapeError& e) {
    return fail(AGRAD_ERR_SHAPE, e.what());
  } catch (const agrad::NumericError& e) {
    return fail(AGRAD_ERR_NUMERIC, e.what());
  } catch (const agrad::StateError& e) {
    return fail(AGRAD_ERR_STATE, e.what());
  } catch (const std::bad_alloc&) {
    return fail(AGRAD_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(AGRAD_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(AGRAD_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

agrad_status null_arg(const char* name) {
  return fail(AGRAD_ERR_INVALID_ARGUMENT, std::string("null argument '") + name + "'");
}

}  // namespace

extern "C" {

const char* agrad_version(void) { return "0.1.0"; }
const char* agrad_last_error(void) { return g_error.c_str(); }
const char* agrad_last_error_field(void) { return g_field.c_str(); }
void agrad_string_free(char* s) { std::free(s); }

agrad_status agrad_error_probability(int bits, double sigma, double* out) {
  if (!out) return null_arg("out");
  return guarded([&] {
    if (bits < 1 || bits > 16) throw agrad::ConfigError("must lie in [1, 16]", "bits");
    *out = agrad::error_probability(bits, sigma);
  });
}

agrad_status agrad_sigma_from_ep(int bits, double ep, double* out) {
  if (!out) return null_arg("out");
  return guarded([&] {
    if (bits < 1 || bits > 16) throw agrad::ConfigError("must lie in [1, 16]", "bits");
    *out = agrad::sigma_from_ep(bits, ep);
  });
}

agrad_status agrad_reduce_precision(const double* x, size_t n, int bits, double* out) {
  if (n && !x) return null_arg("x");
  if (n && !out) return null_arg("out");
  return guarded([&] {
    if (bits < 1 || bits > 16) throw agrad::ConfigError("must lie in [1, 16]", "bits");
    for (size_t k = 0; k < n; ++k) out[k] = agrad::reduce_precision(x[k], bits);
  });
}

agrad_status agrad_activation_create(const char* kind, double s, double i, double alpha, agrad_activation** out) {
  if (!kind) return null_arg("kind");
  if (!out) return null_arg("out");
  *out = nullptr;
  auto parsed = agrad::parse_activation_kind(kind);
  if (!parsed) return fail(AGRAD_ERR_INVALID_ARGUMENT, std::string("unknown activation '") + kind + "'");
  return guarded([&] {
    agrad::ActivationSpec spec{*parsed, s, i, alpha};
    spec.validate();
    if (spec.is_glu()) throw agrad::ConfigError("gated activations need weights; not available here", "activation.kind");
    *out = new agrad_activation{spec};
  });
}

void agrad_activation_destroy(agrad_activation* act) { delete act; }

agrad_status agrad_activation_eval(const agrad_activation* act, const double* x, size_t n, double* out) {
  if (!act) return null_arg("act");
  if (n && (!x || !out)) return null_arg(x ? "out" : "x");
  return guarded([&] {
    for (size_t k = 0; k < n; ++k) out[k] = agrad::act_eval(act->spec, x[k]);
  });
}

agrad_status agrad_activation_derivative(const agrad_activation* act, const double* x, size_t n, double* out) {
  if (!act) return null_arg("act");
  if (n && (!x || !out)) return null_arg(x ? "out" : "x");
  return guarded([&] {
    for (size_t k = 0; k < n; ++k) out[k] = agrad::act_derivative(act->spec, x[k]);
  });
}

agrad_status agrad_activation_gsd(const agrad_activation* act, double x0, double eps, double* out) {
  if (!act) return null_arg("act");
  if (!out) return null_arg("out");
  return guarded([&] { *out = agrad::gsd(act->spec, x0, eps); });
}

agrad_status agrad_activation_ebp(const agrad_activation* act, int bits, double window, double* out) {
  if (!act) return null_arg("act");
  if (!out) return null_arg("out");
  return guarded([&] { *out = agrad::effective_bit_precision(act->spec, bits, window); });
}

agrad_status agrad_experiment_load_file(const char* path, agrad_experiment** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    auto* e = new agrad_experiment;
    try {
      e->config = agrad::load_config(path);
    } catch (...) {
      delete e;
      throw;
    }
    *out = e;
  });
}

agrad_status agrad_experiment_load_json(const char* json, agrad_experiment** out) {
  if (!json) return null_arg("json");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    auto* e = new agrad_experiment;
    try {
      e->config = agrad::parse_config(std::string_view(json));
    } catch (...) {
      delete e;
      throw;
    }
    *out = e;
  });
}

void agrad_experiment_destroy(agrad_experiment* exp) { delete exp; }

agrad_status agrad_experiment_set_out_dir(agrad_experiment* exp, const char* dir) {
  if (!exp) return null_arg("exp");
  if (!dir) return null_arg("dir");
  return guarded([&] { exp->options.out_dir = std::string(dir); });
}

agrad_status agrad_experiment_set_seed(agrad_experiment* exp, uint64_t seed) {
  if (!exp) return null_arg("exp");
  return guarded([&] { exp->options.seed = seed; });
}

agrad_status agrad_experiment_set_workers(agrad_experiment* exp, size_t workers) {
  if (!exp) return null_arg("exp");
  if (workers == 0) return fail(AGRAD_ERR_INVALID_ARGUMENT, "workers must be at least 1");
  return guarded([&] { exp->options.workers = workers; });
}

agrad_status agrad_experiment_set_cap(agrad_experiment* exp, size_t cap) {
  if (!exp) return null_arg("exp");
  return guarded([&] { exp->options.cap = cap; });
}

agrad_status agrad_experiment_set_format(agrad_experiment* exp, const char* format) {
  if (!exp) return null_arg("exp");
  if (!format) return null_arg("format");
  const std::string f = format;
  if (f != "csv" && f != "json") return fail(AGRAD_ERR_INVALID_ARGUMENT, "format must be 'csv' or 'json'");
  return guarded([&] { exp->options.format = f == "csv" ? agrad::OutputFormat::kCsv : agrad::OutputFormat::kJson; });
}

agrad_status agrad_experiment_set_log(agrad_experiment* exp, agrad_log_fn fn, void* user) {
  if (!exp) return null_arg("exp");
  return guarded([&] {
    exp->log_fn = fn;
    exp->log_user = user;
    if (fn) {
      exp->options.log = [exp](const std::string& line) { exp->log_fn(line.c_str(), exp->log_user); };
    } else {
      exp->options.log = nullptr;
    }
  });
}

agrad_status agrad_experiment_config_json(const agrad_experiment* exp, char** out) {
  if (!exp) return null_arg("exp");
  if (!out) return null_arg("out");
  return guarded([&] { *out = dup_string(agrad::to_json(agrad::with_overrides(exp->config, exp->options)).dump(2)); });
}

agrad_status agrad_experiment_digest(const agrad_experiment* exp, char** out) {
  if (!exp) return null_arg("exp");
  if (!out) return null_arg("out");
  return guarded([&] { *out = dup_string(agrad::config_digest(agrad::with_overrides(exp->config, exp->options))); });
}

agrad_status agrad_experiment_mode(const agrad_experiment* exp, char** out) {
  if (!exp) return null_arg("exp");
  if (!out) return null_arg("out");
  return guarded([&] { *out = dup_string(std::string(agrad::to_string(exp->config.mode))); });
}

agrad_status agrad_experiment_run(agrad_experiment* exp, char** record_json) {
  if (!exp) return null_arg("exp");
  if (!record_json) return null_arg("record_json");
  *record_json = nullptr;
  return guarded([&] { *record_json = dup_string(agrad::run_experiment(exp->config, exp->options).dump(2)); });
}

agrad_status agrad_experiment_sweep(agrad_experiment* exp, char** summary_json) {
  if (!exp) return null_arg("exp");
  if (!summary_json) return null_arg("summary_json");
  *summary_json = nullptr;
  return guarded([&] {
    if (exp->config.mode != agrad::Mode::kSweep)
      throw agrad::ConfigError("config mode is '" + std::string(agrad::to_string(exp->config.mode)) + "', not sweep",
                               "mode");
    *summary_json = dup_string(agrad::run_experiment(exp->config, exp->options).dump(2));
  });
}

agrad_status agrad_experiment_generate_dataset(agrad_experiment* exp, char** summary_json) {
  if (!exp) return null_arg("exp");
  if (!summary_json) return null_arg("summary_json");
  *summary_json = nullptr;
  return guarded([&] { *summary_json = dup_string(agrad::generate_dataset(exp->config, exp->options).dump(2)); });
}

agrad_status agrad_emit(const char* dir, const char* kind, const char* format, const agrad_experiment* expected,
                        char** summary_json) {
  if (!dir) return null_arg("dir");
  if (!kind) return null_arg("kind");
  if (!summary_json) return null_arg("summary_json");
  *summary_json = nullptr;
  const std::string f = format ? format : "csv";
  if (f != "csv" && f != "json") return fail(AGRAD_ERR_INVALID_ARGUMENT, "format must be 'csv' or 'json'");
  return guarded([&] {
    std::optional<agrad::ExperimentConfig> want;
    if (expected) want = agrad::with_overrides(expected->config, expected->options);
    const auto out = agrad::emit_plot_data(dir, kind, f == "csv" ? agrad::OutputFormat::kCsv : agrad::OutputFormat::kJson,
                                           want);
    *summary_json = dup_string(out.dump(2));
  });
}

}  // extern "C"
