// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#include "core/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "core/error.hpp"
#include "core/format.hpp"
#include "core/grad_error.hpp"
#include "core/rng.hpp"

namespace agrad {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kLuminanceNote = "grayscale via luminance 0.299 R + 0.587 G + 0.114 B";

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// CSV cell for a JSON scalar: reals with 17 significant digits, strings
/// quoted only when needed.
std::string csv_cell(const json& v) {
  if (v.is_number_float()) return format_real(v.get<double>());
  if (v.is_number()) return v.dump();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_null()) return "";
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

/// Rows of equal-keyed objects as CSV with `columns` in order.
std::string to_csv(const std::vector<std::string>& columns, const std::vector<json>& rows) {
  std::string out;
  for (std::size_t c = 0; c < columns.size(); ++c) out += (c ? "," : "") + columns[c];
  out += "\n";
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) out += ",";
      auto it = row.find(columns[c]);
      if (it != row.end()) out += csv_cell(*it);
    }
    out += "\n";
  }
  return out;
}

json activation_fields(const ActivationSpec& a) {
  return {{"activation", std::string(to_string(a.kind))}, {"s", a.s}, {"i", a.i}, {"alpha", a.alpha}};
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string artifact(const std::string& out_dir, const std::string& name, const std::string& content) {
  if (out_dir.empty()) return {};
  write_text(fs::path(out_dir) / name, content);
  return name;
}

json run_train(const ExperimentConfig& c, const std::string& out_dir, const std::string& digest, json& metadata) {
  const DatasetSplit data = load_dataset(c.dataset);
  const ModelConfig mc = model_config(c, data.train.sample_shape, data.train.classes);
  Model model = build_model(mc, c.init_seed);
  TrainConfig tc = c.train;
  tc.seed = c.seed;
  const TrainResult r = train(model, data, tc);

  json history = json::array();
  std::vector<json> rows;
  for (const auto& e : r.history) {
    json row = {{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"test_top1", e.test_top1}};
    history.push_back(row);
    rows.push_back(row);
  }
  metadata["signal_sites"] = model.signal_sites;
  metadata["weight_sites"] = model.weight_sites;
  metadata["eval_noise"] = tc.eval_noise;
  metadata["train_samples"] = data.train.size();
  metadata["test_samples"] = data.test.size();
  if (c.dataset.grayscale) metadata["grayscale"] = kLuminanceNote;

  json metrics = {{"history", history}, {"final_top1", r.final_top1}};
  if (r.status == TrainStatus::kDiverged) metrics["diverged_at_step"] = r.diverged_at_step;
  metrics["status"] = std::string(to_string(r.status));
  metrics["artifact"] = artifact(out_dir, "history-" + digest + ".csv",
                                 to_csv({"epoch", "train_loss", "test_top1"}, rows));
  return metrics;
}

std::vector<ActivationSpec> interp_variants(const ExperimentConfig& c) {
  std::vector<ActivationSpec> out;
  if (c.analysis.i_values.empty()) return {c.activation};
  for (double i : c.analysis.i_values) {
    ActivationSpec a = c.activation;
    a.i = i;
    out.push_back(a);
  }
  return out;
}

json run_gsd(const ExperimentConfig& c, const std::string& out_dir, const std::string& digest) {
  std::vector<json> rows;
  for (const auto& a : interp_variants(c)) {
    json row = activation_fields(a);
    row["x0"] = c.analysis.x0;
    row["gsd"] = gsd(a, c.analysis.x0, c.analysis.eps);
    rows.push_back(row);
  }
  json metrics = {{"rows", rows}};
  metrics["artifact"] =
      artifact(out_dir, "gsd-" + digest + ".csv", to_csv({"activation", "s", "i", "alpha", "x0", "gsd"}, rows));
  return metrics;
}

json run_surface(const ExperimentConfig& c, const std::string& out_dir, const std::string& digest, json& metadata) {
  const auto grid = linspace(-1.0, 1.0, c.analysis.grid_points);
  json surfaces = json::array();
  json artifacts = json::array();
  const auto variants = interp_variants(c);
  for (std::size_t k = 0; k < variants.size(); ++k) {
    // Same seed for every variant: i = 0 and i = 1 match the plain surfaces.
    ErrorSurface s = gradient_error_surface(variants[k], c.analysis.bits, c.analysis.ep, grid, c.analysis.trials,
                                            c.seed, c.analysis.product);
    double near_sum = 0.0;
    std::size_t near = 0;
    for (std::size_t r = 0; r < grid.size(); ++r)
      for (std::size_t q = 0; q < grid.size(); ++q)
        if (std::abs(grid[r] * grid[q]) < 0.05) {
          near_sum += s.at(r, q);
          ++near;
        }
    json entry = activation_fields(variants[k]);
    entry["mean"] = s.mean();
    entry["median"] = s.median();
    entry["max"] = s.max();
    entry["near_zero_mean"] = near ? near_sum / static_cast<double>(near) : 0.0;
    entry["values"] = s.values;
    surfaces.push_back(entry);
    if (!out_dir.empty()) {
      const std::string stem = "surface-" + digest + (variants.size() > 1 ? "-" + std::to_string(k) : "");
      write_surface_csv((fs::path(out_dir) / (stem + ".csv")).string(), s);
      write_surface_metadata((fs::path(out_dir) / (stem + ".json")).string(), s);
      artifacts.push_back(stem + ".csv");
      artifacts.push_back(stem + ".json");
    }
    metadata["sigma"] = s.sigma;
    metadata["statistic"] = s.statistic;
  }
  metadata["product"] = c.analysis.product == ProductMode::kClosedForm ? "closed-form" : "direct";
  return {{"grid", grid}, {"bits", c.analysis.bits}, {"ep", c.analysis.ep}, {"trials", c.analysis.trials},
          {"surfaces", surfaces}, {"artifacts", artifacts}};
}

json run_accum(const ExperimentConfig& c, const std::string& out_dir, const std::string& digest) {
  std::vector<json> rows;
  std::uint64_t stream = 0;
  for (double x : c.analysis.x_values)
    for (std::size_t n : c.analysis.n_values) {
      RngStream rng(c.seed, stream++);
      const AccumRecord a = accumulated_error(c.activation, x, n, c.analysis.sigma, rng);
      json row = activation_fields(c.activation);
      row.update({{"x", x},
                  {"n", n},
                  {"sigma", a.sigma},
                  {"mean", a.mean_error},
                  {"reference", a.reference},
                  {"deviation", a.deviation()}});
      rows.push_back(row);
    }
  json metrics = {{"rows", rows}};
  metrics["artifact"] = artifact(out_dir, "accum-" + digest + ".csv",
                                 to_csv({"activation", "x", "n", "sigma", "mean", "reference", "deviation"}, rows));
  return metrics;
}

json run_ebp(const ExperimentConfig& c, const std::string& out_dir, const std::string& digest) {
  std::vector<double> s_values = c.analysis.s_values;
  if (s_values.empty()) s_values = {c.activation.s};
  std::vector<int> bits_values = c.analysis.bits_values;
  if (bits_values.empty()) bits_values = {c.analysis.bits};
  std::vector<json> rows;
  for (double s : s_values)
    for (int bits : bits_values) {
      ActivationSpec a = c.activation;
      a.s = s;
      json row = activation_fields(a);
      row.update({{"bits", bits}, {"window", c.analysis.window},
                  {"ebp", effective_bit_precision(a, bits, c.analysis.window)}});
      rows.push_back(row);
    }
  json metrics = {{"rows", rows}};
  metrics["artifact"] =
      artifact(out_dir, "ebp-" + digest + ".csv", to_csv({"activation", "s", "bits", "window", "ebp"}, rows));
  return metrics;
}

std::string record_name(const std::string& digest) { return "record-" + digest + ".json"; }

void write_record(const std::string& out_dir, const json& record) {
  write_text(fs::path(out_dir) / record_name(record.at("config_digest").get<std::string>()), record.dump(2) + "\n");
}

std::optional<json> existing_record(const std::string& out_dir, const std::string& digest) {
  const fs::path p = fs::path(out_dir) / record_name(digest);
  if (!fs::exists(p)) return std::nullopt;
  try {
    json r = json::parse(read_text(p));
    if (r.value("config_digest", "") == digest && r.contains("metrics")) return r;
  } catch (const json::exception&) {
  }
  return std::nullopt;  // unreadable records are recomputed
}

void log_line(const RunOptions& o, const std::string& line) {
  if (o.log) o.log(line);
}

std::string axis_label(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) return format_real(v.get<double>());
  if (v.is_object() && v.contains("kind")) {
    std::string s = v["kind"].get<std::string>();
    for (const char* key : {"alpha", "i", "s"})
      if (v.contains(key)) s += " " + std::string(key) + "=" + csv_cell(v[key]);
    return s;
  }
  return v.dump();
}

std::string summary_csv(const ExperimentConfig& c, const std::vector<SweepCell>& cells,
                        const std::vector<json>& records) {
  const auto& axes = c.sweep.axes;
  std::string out;
  if (axes.size() == 2) {
    // Matrix layout: first axis down the rows, second across the columns.
    out = csv_cell(axes[0].name + "\\" + axes[1].name);
    for (const auto& v : axes[1].values) out += "," + csv_cell(axis_label(v));
    out += "\n";
    const std::size_t cols = axes[1].values.size();
    for (std::size_t r = 0; r < axes[0].values.size(); ++r) {
      out += csv_cell(axis_label(axes[0].values[r]));
      for (std::size_t q = 0; q < cols; ++q) out += "," + format_real(headline(records[r * cols + q]));
      out += "\n";
    }
    return out;
  }
  for (const auto& a : axes) out += csv_cell(a.name) + ",";
  out += "value\n";
  for (std::size_t k = 0; k < cells.size(); ++k) {
    for (const auto& v : cells[k].axis_values) out += csv_cell(axis_label(v)) + ",";
    out += format_real(headline(records[k])) + "\n";
  }
  return out;
}

json run_sweep(const ExperimentConfig& c, const RunOptions& o) {
  const std::vector<SweepCell> cells = expand_sweep(c, o.cap);
  ensure_dir(c.out_dir);
  std::vector<json> records(cells.size());
  std::vector<std::size_t> pending;
  std::size_t resumed = 0;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (auto r = existing_record(c.out_dir, cells[k].digest)) {
      records[k] = std::move(*r);
      ++resumed;
    } else {
      pending.push_back(k);
    }
  }
  log_line(o, "sweep: " + std::to_string(cells.size()) + " cells, " + std::to_string(resumed) + " already done");

  // Workers compute; this thread is the single collector that writes records.
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::pair<std::size_t, json>> done;
  std::exception_ptr failure;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  const std::size_t workers = std::max<std::size_t>(1, std::min(o.workers, pending.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers && !pending.empty(); ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t slot = next.fetch_add(1);
        if (slot >= pending.size() || stop) return;
        const std::size_t k = pending[slot];
        try {
          json r = run_cell(cells[k].config, c.out_dir);
          json axes = json::object();
          for (std::size_t a = 0; a < c.sweep.axes.size(); ++a) axes[c.sweep.axes[a].name] = cells[k].axis_values[a];
          r["sweep_axes"] = axes;
          std::lock_guard lock(mu);
          done.emplace_back(k, std::move(r));
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
          stop = true;
        }
        cv.notify_one();
      }
    });
  }
  std::size_t collected = 0;
  while (collected < pending.size()) {
    std::unique_lock lock(mu);
    cv.wait(lock, [&] { return !done.empty() || failure; });
    if (failure && done.empty()) break;
    auto [k, r] = std::move(done.front());
    done.pop_front();
    lock.unlock();
    write_record(c.out_dir, r);
    log_line(o, "cell " + std::to_string(k + 1) + "/" + std::to_string(cells.size()) + " " +
                    r["status"].get<std::string>() + " value " + format_real(headline(r)));
    records[k] = std::move(r);
    ++collected;
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  json summary = {{"mode", "sweep"},
                  {"base", std::string(to_string(c.sweep.base))},
                  {"cells", json::array()},
                  {"resumed", resumed},
                  {"config_digest", config_digest(c)}};
  for (std::size_t k = 0; k < cells.size(); ++k) {
    json cell = {{"config_digest", cells[k].digest}, {"value", headline(records[k])}, {"status", records[k]["status"]}};
    json axes = json::object();
    for (std::size_t a = 0; a < c.sweep.axes.size(); ++a) axes[c.sweep.axes[a].name] = cells[k].axis_values[a];
    cell["axes"] = axes;
    summary["cells"].push_back(cell);
  }
  if (o.format == OutputFormat::kCsv) {
    write_text(fs::path(c.out_dir) / "summary.csv", summary_csv(c, cells, records));
    summary["summary"] = (fs::path(c.out_dir) / "summary.csv").string();
  } else {
    write_text(fs::path(c.out_dir) / "summary.json", summary.dump(2) + "\n");
    summary["summary"] = (fs::path(c.out_dir) / "summary.json").string();
  }
  return summary;
}

}  // namespace

ExperimentConfig with_overrides(ExperimentConfig c, const RunOptions& o) {
  if (o.out_dir) c.out_dir = *o.out_dir;
  if (o.seed) {
    c.seed = *o.seed;
    c.init_seed = *o.seed;
  }
  c.train.seed = c.seed;
  return c;
}

DatasetSplit load_dataset(const DatasetSection& d) {
  DatasetSplit split;
  if (d.source == "synthetic") {
    split = generate_synthetic(d.synthetic);
  } else if (d.source == "csv") {
    split.train = read_csv_dataset(d.train_path);
    split.test = read_csv_dataset(d.test_path, split.train.sample_shape, split.train.classes);
  } else {
    split.train = read_idx_dataset(d.train_images, d.train_labels);
    split.test = read_idx_dataset(d.test_images, d.test_labels, split.train.classes);
  }
  if (d.grayscale) {
    split.train = to_grayscale(split.train);
    split.test = to_grayscale(split.test);
  }
  if (split.test.sample_shape != split.train.sample_shape)
    throw ShapeError("train samples are " + shape_str(split.train.sample_shape) + " but test samples are " +
                     shape_str(split.test.sample_shape));
  split.test.classes = split.train.classes = std::max(split.train.classes, split.test.classes);
  return split;
}

json run_cell(const ExperimentConfig& config, const std::string& out_dir) {
  if (config.mode == Mode::kSweep) throw ConfigError("run_cell takes a single experiment", "mode");
  if (!out_dir.empty()) ensure_dir(out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  const std::string digest = config_digest(config);
  json metadata = json::object();
  json metrics;
  std::string status = "completed";
  switch (config.mode) {
    case Mode::kTrain:
      metrics = run_train(config, out_dir, digest, metadata);
      status = metrics["status"].get<std::string>();
      break;
    case Mode::kAnalyzeGsd: metrics = run_gsd(config, out_dir, digest); break;
    case Mode::kAnalyzeSurface: metrics = run_surface(config, out_dir, digest, metadata); break;
    case Mode::kAnalyzeAccum: metrics = run_accum(config, out_dir, digest); break;
    case Mode::kAnalyzeEbp: metrics = run_ebp(config, out_dir, digest); break;
    case Mode::kSweep: break;
  }
  json artifacts = json::array();
  if (metrics.contains("artifact")) {
    if (!metrics["artifact"].get<std::string>().empty()) artifacts.push_back(metrics["artifact"]);
    metrics.erase("artifact");
  }
  if (metrics.contains("artifacts")) {
    for (const auto& a : metrics["artifacts"]) artifacts.push_back(a);
    metrics.erase("artifacts");
  }
  json cfg = to_json(config);
  cfg.erase("out_dir");
  return {{"config_digest", digest},
          {"config", cfg},
          {"seed", config.seed},
          {"mode", std::string(to_string(config.mode))},
          {"status", status},
          {"metrics", metrics},
          {"wall_time_seconds", elapsed(t0)},
          {"artifacts", artifacts},
          {"metadata", metadata}};
}

json run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  const ExperimentConfig c = with_overrides(config, options);
  validate(c);
  if (c.mode == Mode::kSweep) return run_sweep(c, options);
  ensure_dir(c.out_dir);
  json record = run_cell(c, c.out_dir);
  write_record(c.out_dir, record);
  return record;
}

std::uint64_t cell_seed(std::uint64_t master, const std::vector<SweepAxis>& axes, const std::vector<json>& values) {
  std::string key;
  for (std::size_t a = 0; a < axes.size(); ++a) key += axes[a].name + "=" + values.at(a).dump() + ";";
  std::uint64_t h = std::stoull(fnv1a_hex(key), nullptr, 16);
  return combine_seed(master, h);
}

std::vector<SweepCell> expand_sweep(const ExperimentConfig& c, std::size_t cap) {
  if (c.mode != Mode::kSweep) throw ConfigError("config mode is '" + std::string(to_string(c.mode)) + "', not sweep", "mode");
  std::size_t total = 1;
  for (const auto& a : c.sweep.axes) {
    if (a.values.empty()) throw ConfigError("axis has no values", "sweep.axes");
    if (total > std::numeric_limits<std::size_t>::max() / a.values.size()) total = std::numeric_limits<std::size_t>::max();
    else total *= a.values.size();
  }
  if (total > cap)
    throw ConfigError("sweep has " + std::to_string(total) + " cells, above the cap of " + std::to_string(cap) +
                          " (raise it with --cap)",
                      "sweep.axes");
  std::vector<SweepCell> cells;
  std::vector<std::size_t> idx(c.sweep.axes.size(), 0);
  for (std::size_t n = 0; n < total; ++n) {
    SweepCell cell;
    cell.config = c;
    cell.config.mode = c.sweep.base;
    cell.config.sweep = SweepSection{};
    cell.config.sweep.base = Mode::kTrain;
    for (std::size_t a = 0; a < idx.size(); ++a) {
      cell.axis_values.push_back(c.sweep.axes[a].values[idx[a]]);
      apply_axis(cell.config, c.sweep.axes[a].name, cell.axis_values.back());
    }
    cell.config.seed = cell_seed(c.seed, c.sweep.axes, cell.axis_values);
    cell.config.train.seed = cell.config.seed;
    validate(cell.config);
    cell.digest = config_digest(cell.config);
    cells.push_back(std::move(cell));
    for (std::size_t a = idx.size(); a-- > 0;) {
      if (++idx[a] < c.sweep.axes[a].values.size()) break;
      idx[a] = 0;
    }
  }
  return cells;
}

double headline(const json& record) {
  const json& m = record.at("metrics");
  const std::string mode = record.at("mode").get<std::string>();
  if (mode == "train") return m.at("final_top1").get<double>();
  if (mode == "analyze-gsd") return m.at("rows").at(0).at("gsd").get<double>();
  if (mode == "analyze-surface") return m.at("surfaces").at(0).at("mean").get<double>();
  if (mode == "analyze-accum") return m.at("rows").at(0).at("mean").get<double>();
  if (mode == "analyze-ebp") return m.at("rows").at(0).at("ebp").get<double>();
  throw StateError("record has unknown mode '" + mode + "'");
}

json generate_dataset(const ExperimentConfig& config, const RunOptions& options) {
  ExperimentConfig c = with_overrides(config, options);
  if (c.dataset.source != "synthetic")
    throw ConfigError("gen-data needs a synthetic dataset source", "dataset.source");
  if (options.seed) c.dataset.synthetic.seed = *options.seed;
  ensure_dir(c.out_dir);
  const DatasetSplit split = generate_synthetic(c.dataset.synthetic);
  const std::string train_path = (fs::path(c.out_dir) / "train.csv").string();
  const std::string test_path = (fs::path(c.out_dir) / "test.csv").string();
  write_csv_dataset(train_path, split.train);
  write_csv_dataset(test_path, split.test);
  return {{"train_path", train_path},
          {"test_path", test_path},
          {"train_rows", split.train.size()},
          {"test_rows", split.test.size()},
          {"classes", split.train.classes},
          {"image_size", c.dataset.synthetic.image_size},
          {"seed", c.dataset.synthetic.seed}};
}

const std::vector<std::string>& plot_kinds() {
  static const std::vector<std::string> kinds = {"gsd-vs-i", "accuracy-vs-i", "accuracy", "surface",
                                                 "accum",    "ebp",           "history"};
  return kinds;
}

std::vector<json> load_records(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("no such directory '" + dir + "'");
  std::vector<fs::path> paths;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("record-", 0) == 0 && e.path().extension() == ".json") paths.push_back(e.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<json> out;
  for (const auto& p : paths) {
    try {
      out.push_back(json::parse(read_text(p)));
    } catch (const json::exception& e) {
      throw IoError("record '" + p.string() + "' is not valid JSON: " + e.what());
    }
  }
  return out;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("spearman needs equal-length samples");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> r(v.size());
    for (std::size_t k = 0; k < order.size();) {
      std::size_t e = k;
      while (e + 1 < order.size() && v[order[e + 1]] == v[order[k]]) ++e;
      const double avg = (static_cast<double>(k) + static_cast<double>(e)) / 2.0 + 1.0;
      for (std::size_t t = k; t <= e; ++t) r[order[t]] = avg;
      k = e + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t k = 0; k < ra.size(); ++k) {
    sab += (ra[k] - ma) * (rb[k] - mb);
    saa += (ra[k] - ma) * (ra[k] - ma);
    sbb += (rb[k] - mb) * (rb[k] - mb);
  }
  if (saa == 0 || sbb == 0) return std::numeric_limits<double>::quiet_NaN();
  return sab / std::sqrt(saa * sbb);
}

json emit_plot_data(const std::string& dir, const std::string& kind, OutputFormat format,
                    const std::optional<ExperimentConfig>& expected) {
  const auto& kinds = plot_kinds();
  if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
    std::string list;
    for (const auto& k : kinds) list += (list.empty() ? "" : ", ") + k;
    throw ConfigError("unknown plot kind '" + kind + "' (" + list + ")", "kind");
  }
  std::vector<json> records = load_records(dir);

  if (expected) {
    std::vector<SweepCell> cells;
    if (expected->mode == Mode::kSweep) {
      cells = expand_sweep(*expected, std::numeric_limits<std::size_t>::max());
    } else {
      cells.push_back({*expected, {}, config_digest(*expected)});
    }
    std::map<std::string, bool> present;
    for (const auto& r : records) present[r.value("config_digest", "")] = true;
    std::string missing;
    for (const auto& cell : cells) {
      if (present.count(cell.digest)) continue;
      std::string label;
      for (std::size_t a = 0; a < cell.axis_values.size(); ++a)
        label += (a ? " " : "") + expected->sweep.axes[a].name + "=" + axis_label(cell.axis_values[a]);
      missing += "\n  " + (label.empty() ? cell.digest : label + " (" + cell.digest + ")");
    }
    if (!missing.empty()) throw IoError("missing records for cells:" + missing);
    std::map<std::string, bool> wanted;
    for (const auto& cell : cells) wanted[cell.digest] = true;
    std::erase_if(records, [&](const json& r) { return !wanted.count(r.value("config_digest", "")); });
  }

  auto act_of = [](const json& r) { return r["config"]["activation"]; };
  auto noise_field = [](const json& r, const char* key) -> json {
    const json& n = r["config"]["noise"];
    return n.is_null() ? json(nullptr) : n[key];
  };
  std::vector<std::string> columns;
  std::vector<json> rows;
  json extra = json::object();
  std::string wanted_mode;

  if (kind == "gsd-vs-i") {
    wanted_mode = "analyze-gsd";
    columns = {"activation", "s", "i", "alpha", "x0", "gsd"};
    for (const auto& r : records)
      if (r["mode"] == wanted_mode)
        for (const auto& row : r["metrics"]["rows"]) rows.push_back(row);
    std::stable_sort(rows.begin(), rows.end(), [](const json& a, const json& b) {
      return std::make_pair(a["activation"].get<std::string>(), a["i"].get<double>()) <
             std::make_pair(b["activation"].get<std::string>(), b["i"].get<double>());
    });
  } else if (kind == "accuracy-vs-i" || kind == "accuracy") {
    wanted_mode = "train";
    columns = {"activation", "s", "i", "alpha", "bits", "ep", "learning_rate", "preset", "conv_layers",
               "linear_layers", "seed", "status", "final_top1"};
    for (const auto& r : records) {
      if (r["mode"] != wanted_mode) continue;
      const json a = act_of(r);
      if (kind == "accuracy-vs-i" && a["kind"].get<std::string>().rfind("interp-", 0) != 0) continue;
      const json& m = r["config"]["model"];
      rows.push_back({{"activation", a["kind"]},
                      {"s", a["s"]},
                      {"i", a["i"]},
                      {"alpha", a["alpha"]},
                      {"bits", noise_field(r, "bits")},
                      {"ep", noise_field(r, "ep")},
                      {"learning_rate", r["config"]["train"]["learning_rate"]},
                      {"preset", m["preset"]},
                      {"conv_layers", m["conv_layers"]},
                      {"linear_layers", m["linear_layers"]},
                      {"seed", r["seed"]},
                      {"status", r["status"]},
                      {"final_top1", r["metrics"]["final_top1"]}});
    }
    if (kind == "accuracy-vs-i") {
      std::stable_sort(rows.begin(), rows.end(),
                       [](const json& a, const json& b) { return a["i"].get<double>() < b["i"].get<double>(); });
      std::vector<double> is, accs;
      for (const auto& row : rows) {
        is.push_back(row["i"].get<double>());
        accs.push_back(row["final_top1"].get<double>());
      }
      const double rho = rows.size() >= 2 ? spearman(is, accs) : std::numeric_limits<double>::quiet_NaN();
      extra["spearman_rho"] = std::isnan(rho) ? json(nullptr) : json(rho);
    }
  } else if (kind == "surface") {
    wanted_mode = "analyze-surface";
    columns = {"activation", "i", "bits", "ep", "x_i", "x_w", "value"};
    for (const auto& r : records) {
      if (r["mode"] != wanted_mode) continue;
      const auto grid = r["metrics"]["grid"].get<std::vector<double>>();
      for (const auto& s : r["metrics"]["surfaces"]) {
        const auto values = s["values"].get<std::vector<double>>();
        for (std::size_t a = 0; a < grid.size(); ++a)
          for (std::size_t b = 0; b < grid.size(); ++b)
            rows.push_back({{"activation", s["activation"]},
                            {"i", s["i"]},
                            {"bits", r["metrics"]["bits"]},
                            {"ep", r["metrics"]["ep"]},
                            {"x_i", grid[a]},
                            {"x_w", grid[b]},
                            {"value", values[a * grid.size() + b]}});
      }
    }
  } else if (kind == "accum") {
    wanted_mode = "analyze-accum";
    columns = {"activation", "x", "n", "sigma", "mean", "reference", "deviation"};
    for (const auto& r : records)
      if (r["mode"] == wanted_mode)
        for (const auto& row : r["metrics"]["rows"]) rows.push_back(row);
  } else if (kind == "ebp") {
    wanted_mode = "analyze-ebp";
    columns = {"activation", "s", "bits", "window", "ebp"};
    for (const auto& r : records)
      if (r["mode"] == wanted_mode)
        for (const auto& row : r["metrics"]["rows"]) rows.push_back(row);
  } else {  // history
    wanted_mode = "train";
    columns = {"config_digest", "activation", "i", "alpha", "epoch", "train_loss", "test_top1"};
    for (const auto& r : records) {
      if (r["mode"] != wanted_mode) continue;
      const json a = act_of(r);
      for (const auto& h : r["metrics"]["history"])
        rows.push_back({{"config_digest", r["config_digest"]},
                        {"activation", a["kind"]},
                        {"i", a["i"]},
                        {"alpha", a["alpha"]},
                        {"epoch", h["epoch"]},
                        {"train_loss", h["train_loss"]},
                        {"test_top1", h["test_top1"]}});
    }
  }
  if (rows.empty()) throw IoError("no " + wanted_mode + " records under '" + dir + "' for plot kind '" + kind + "'");

  const std::string file = "plotdata-" + kind + (format == OutputFormat::kCsv ? ".csv" : ".json");
  const fs::path path = fs::path(dir) / file;
  if (format == OutputFormat::kCsv) {
    write_text(path, to_csv(columns, rows));
  } else {
    json doc = {{"kind", kind}, {"columns", columns}, {"rows", rows}};
    doc.update(extra);
    write_text(path, doc.dump(2) + "\n");
  }
  json out = {{"path", path.string()}, {"rows", rows.size()}, {"kind", kind}};
  out.update(extra);
  return out;
}

}  // namespace agrad
