// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#include "core/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "core/error.hpp"

namespace agrad {

using nlohmann::json;

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::kTrain: return "train";
    case Mode::kSweep: return "sweep";
    case Mode::kAnalyzeGsd: return "analyze-gsd";
    case Mode::kAnalyzeSurface: return "analyze-surface";
    case Mode::kAnalyzeAccum: return "analyze-accum";
    case Mode::kAnalyzeEbp: return "analyze-ebp";
  }
  return "unknown";
}

std::optional<Mode> parse_mode(std::string_view name) {
  for (Mode m : {Mode::kTrain, Mode::kSweep, Mode::kAnalyzeGsd, Mode::kAnalyzeSurface, Mode::kAnalyzeAccum,
                 Mode::kAnalyzeEbp})
    if (to_string(m) == name) return m;
  return std::nullopt;
}

const std::vector<std::string>& sweep_axis_names() {
  static const std::vector<std::string> names = {"activation", "i",          "s",      "alpha",
                                                 "bits",       "ep",         "lr",     "batch_size",
                                                 "epochs",     "optimizer",  "conv_layers",
                                                 "linear_layers"};
  return names;
}

namespace {

std::string child(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string index(const std::string& path, std::size_t k) { return path + "[" + std::to_string(k) + "]"; }

const char* type_name(const json& j) { return j.type_name(); }

/// Reads one JSON object, remembering which keys were consumed so leftovers
/// can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      throw ConfigError(std::string("expected an object, got ") + type_name(j_), path_.empty() ? "<root>" : path_);
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  std::string path(const std::string& key) const { return child(path_, key); }

  template <typename T>
  void read(const std::string& key, T& out);

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown key", child(path_, it.key()));
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

double as_real(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(std::string("expected a number, got ") + type_name(j), path);
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError("must be finite", path);
  return v;
}

std::uint64_t as_u64(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer()) {
    if (j.get<std::int64_t>() < 0) throw ConfigError("must be non-negative", path);
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  }
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (v >= 0 && v == std::floor(v) && v < 9.007199254740992e15) return static_cast<std::uint64_t>(v);
  }
  throw ConfigError(std::string("expected a non-negative integer, got ") + type_name(j), path);
}

std::size_t as_size(const json& j, const std::string& path) { return static_cast<std::size_t>(as_u64(j, path)); }

int as_int(const json& j, const std::string& path) {
  if (j.is_number_integer()) {
    const auto v = j.get<std::int64_t>();
    if (v < -1000000 || v > 1000000) throw ConfigError("integer out of range", path);
    return static_cast<int>(v);
  }
  if (j.is_number_float() && j.get<double>() == std::floor(j.get<double>()) && std::abs(j.get<double>()) < 1e6)
    return static_cast<int>(j.get<double>());
  throw ConfigError(std::string("expected an integer, got ") + type_name(j), path);
}

bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(std::string("expected true or false, got ") + type_name(j), path);
  return j.get<bool>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(std::string("expected a string, got ") + type_name(j), path);
  return j.get<std::string>();
}

template <typename T, typename F>
std::vector<T> as_list(const json& j, const std::string& path, F&& element) {
  if (!j.is_array()) throw ConfigError(std::string("expected a list, got ") + type_name(j), path);
  std::vector<T> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(element(j[k], index(path, k)));
  return out;
}

template <>
void ObjectReader::read<double>(const std::string& key, double& out) {
  if (const json* v = find(key)) out = as_real(*v, path(key));
}
template <>
void ObjectReader::read<std::uint64_t>(const std::string& key, std::uint64_t& out) {
  if (const json* v = find(key)) out = as_u64(*v, path(key));
}
template <>
void ObjectReader::read<int>(const std::string& key, int& out) {
  if (const json* v = find(key)) out = as_int(*v, path(key));
}
template <>
void ObjectReader::read<bool>(const std::string& key, bool& out) {
  if (const json* v = find(key)) out = as_bool(*v, path(key));
}
template <>
void ObjectReader::read<std::string>(const std::string& key, std::string& out) {
  if (const json* v = find(key)) out = as_string(*v, path(key));
}
template <>
void ObjectReader::read<std::vector<double>>(const std::string& key, std::vector<double>& out) {
  if (const json* v = find(key)) out = as_list<double>(*v, path(key), as_real);
}
template <>
void ObjectReader::read<std::vector<std::size_t>>(const std::string& key, std::vector<std::size_t>& out) {
  if (const json* v = find(key)) out = as_list<std::size_t>(*v, path(key), as_size);
}
template <>
void ObjectReader::read<std::vector<int>>(const std::string& key, std::vector<int>& out) {
  if (const json* v = find(key)) out = as_list<int>(*v, path(key), as_int);
}

// std::size_t and std::uint64_t are distinct types on some platforms only.
void read_size(ObjectReader& r, const std::string& key, std::size_t& out) {
  if (const json* v = r.find(key)) out = as_size(*v, r.path(key));
}

/// Re-labels a ConfigError raised by a component validator with `path`.
template <typename F>
void relabel(const std::string& from, const std::string& to, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    std::string field = e.field();
    if (field.rfind(from, 0) == 0) field = to + field.substr(from.size());
    std::string msg = e.what();
    if (!e.field().empty() && msg.rfind(e.field() + ": ", 0) == 0) msg = msg.substr(e.field().size() + 2);
    throw ConfigError(msg, field);
  }
}

ActivationSpec parse_activation(const json& j, const std::string& path) {
  ActivationSpec a;
  if (j.is_string()) {
    auto kind = parse_activation_kind(j.get<std::string>());
    if (!kind) throw ConfigError("unknown activation '" + j.get<std::string>() + "'", path);
    a.kind = *kind;
  } else {
    ObjectReader r(j, path);
    std::string kind = "relu";
    r.read("kind", kind);
    auto k = parse_activation_kind(kind);
    if (!k) throw ConfigError("unknown activation '" + kind + "'", r.path("kind"));
    a.kind = *k;
    r.read("s", a.s);
    r.read("i", a.i);
    r.read("alpha", a.alpha);
    r.finish();
  }
  relabel("activation", path, [&] { a.validate(); });
  return a;
}

json activation_json(const ActivationSpec& a) {
  return {{"kind", std::string(to_string(a.kind))}, {"s", a.s}, {"i", a.i}, {"alpha", a.alpha}};
}

QuantNoiseSpec parse_noise(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  QuantNoiseSpec q;
  r.read("bits", q.bits);
  if (const json* v = r.find("sigma"); v && !v->is_null()) q.sigma = as_real(*v, r.path("sigma"));
  if (const json* v = r.find("ep"); v && !v->is_null()) q.target_ep = as_real(*v, r.path("ep"));
  r.read("clamp_lo", q.clamp_lo);
  r.read("clamp_hi", q.clamp_hi);
  if (const json* v = r.find("stages")) {
    q.stages = as_list<Stage>(*v, r.path("stages"), [](const json& s, const std::string& p) {
      auto st = parse_stage(as_string(s, p));
      if (!st) throw ConfigError("unknown stage '" + s.get<std::string>() + "' (clamp, reduce-precision, noise)", p);
      return *st;
    });
  }
  r.finish();
  q.validate(path);
  if (q.sigma && q.target_ep) {
    // Both given: accepted only when they agree (the resolved form).
    const double implied = *q.sigma > 0 ? error_probability(q.bits, *q.sigma) : 0.0;
    if (std::abs(implied - *q.target_ep) > 1e-9)
      throw ConfigError("sigma and ep disagree (sigma implies ep " + std::to_string(implied) + "); give only one",
                        r.path("ep"));
    return q;
  }
  if (q.target_ep && *q.target_ep > 0.0 && *q.target_ep >= 1.0)
    throw ConfigError("must lie in (0, 1)", r.path("ep"));
  return q.resolved();
}

json noise_json(const QuantNoiseSpec& q) {
  json stages = json::array();
  for (Stage s : q.stages) stages.push_back(std::string(to_string(s)));
  const QuantNoiseSpec r = q.resolved();
  return {{"bits", r.bits},          {"sigma", *r.sigma},       {"ep", *r.target_ep},
          {"clamp_lo", r.clamp_lo},  {"clamp_hi", r.clamp_hi},  {"stages", stages}};
}

LayerSpec parse_layer(const json& j, const std::string& path, const std::optional<QuantNoiseSpec>& noise) {
  ObjectReader r(j, path);
  LayerSpec l;
  std::string kind;
  r.read("kind", kind);
  auto k = parse_layer_kind(kind);
  if (!k) throw ConfigError("unknown layer kind '" + kind + "' (linear, conv2d, maxpool, flatten, activation)",
                            r.path("kind"));
  l.kind = *k;
  read_size(r, "in", l.in);
  read_size(r, "out", l.out);
  read_size(r, "kernel", l.kernel);
  read_size(r, "padding", l.padding);
  if (const json* v = r.find("activation")) l.activation = parse_activation(*v, r.path("activation"));
  auto analog = [&](const char* key, std::optional<QuantNoiseSpec>& out) {
    const json* v = r.find(key);
    if (!v || v->is_null()) return;
    if (v->is_boolean()) {
      if (!v->get<bool>()) return;
      if (!noise) throw ConfigError("true needs a top-level noise section", r.path(key));
      out = *noise;
      return;
    }
    out = parse_noise(*v, r.path(key));
  };
  analog("analog", l.analog);
  analog("weight_analog", l.weight_analog);
  r.finish();
  return l;
}

json layer_json(const LayerSpec& l) {
  json j = {{"kind", std::string(to_string(l.kind))}, {"in", l.in},         {"out", l.out},
            {"kernel", l.kernel},                     {"padding", l.padding}, {"activation", activation_json(l.activation)}};
  j["analog"] = l.analog ? noise_json(*l.analog) : json(nullptr);
  j["weight_analog"] = l.weight_analog ? noise_json(*l.weight_analog) : json(nullptr);
  return j;
}

ModelSection parse_model(const json& j, const std::string& path, const std::optional<QuantNoiseSpec>& noise) {
  ObjectReader r(j, path);
  ModelSection m;
  r.read("preset", m.preset);
  if (m.preset != "convnet-mini" && m.preset != "conv-stack" && m.preset != "mlp" && m.preset != "custom")
    throw ConfigError("unknown preset '" + m.preset + "' (convnet-mini, conv-stack, mlp, custom)", r.path("preset"));
  read_size(r, "conv_layers", m.conv_layers);
  read_size(r, "linear_layers", m.linear_layers);
  r.read("channels", m.channels);
  r.read("hidden", m.hidden);
  if (const json* v = r.find("analog")) {
    ObjectReader a(*v, r.path("analog"));
    a.read("inputs", m.analog.inputs);
    a.read("signals", m.analog.signals);
    a.read("weights", m.analog.weights);
    a.finish();
  }
  if (const json* v = r.find("layers")) {
    if (!v->is_array()) throw ConfigError("expected a list", r.path("layers"));
    for (std::size_t k = 0; k < v->size(); ++k) m.layers.push_back(parse_layer((*v)[k], index(r.path("layers"), k), noise));
  }
  std::vector<std::size_t> shape;
  r.read("input_shape", shape);
  m.input_shape = shape;
  read_size(r, "classes", m.classes);
  r.finish();
  if (m.preset == "custom" && m.layers.empty()) throw ConfigError("custom preset needs layers", r.path("layers"));
  if (m.preset != "custom" && !m.layers.empty()) throw ConfigError("layers are only used with preset 'custom'", r.path("layers"));
  if (m.linear_layers == 0) throw ConfigError("must be positive", r.path("linear_layers"));
  for (std::size_t k = 0; k < m.channels.size(); ++k)
    if (m.channels[k] == 0) throw ConfigError("must be positive", index(r.path("channels"), k));
  for (std::size_t k = 0; k < m.hidden.size(); ++k)
    if (m.hidden[k] == 0) throw ConfigError("must be positive", index(r.path("hidden"), k));
  for (std::size_t k = 0; k < m.input_shape.size(); ++k)
    if (m.input_shape[k] == 0) throw ConfigError("must be positive", index(r.path("input_shape"), k));
  return m;
}

json model_json(const ModelSection& m) {
  json layers = json::array();
  for (const auto& l : m.layers) layers.push_back(layer_json(l));
  return {{"preset", m.preset},
          {"conv_layers", m.conv_layers},
          {"linear_layers", m.linear_layers},
          {"channels", m.channels},
          {"hidden", m.hidden},
          {"analog", {{"inputs", m.analog.inputs}, {"signals", m.analog.signals}, {"weights", m.analog.weights}}},
          {"layers", layers},
          {"input_shape", m.input_shape},
          {"classes", m.classes}};
}

TrainConfig parse_train(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  TrainConfig t;
  read_size(r, "epochs", t.epochs);
  read_size(r, "batch_size", t.batch_size);
  r.read("learning_rate", t.learning_rate);
  std::string opt(to_string(t.optimizer));
  r.read("optimizer", opt);
  auto o = parse_optimizer(opt);
  if (!o) throw ConfigError("unknown optimizer '" + opt + "' (sgd, adam)", r.path("optimizer"));
  t.optimizer = *o;
  r.read("eval_noise", t.eval_noise);
  r.finish();
  t.validate(path);
  return t;
}

json train_json(const TrainConfig& t) {
  return {{"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"learning_rate", t.learning_rate},
          {"optimizer", std::string(to_string(t.optimizer))},
          {"eval_noise", t.eval_noise}};
}

DatasetSection parse_dataset(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  DatasetSection d;
  r.read("source", d.source);
  if (d.source != "synthetic" && d.source != "csv" && d.source != "idx")
    throw ConfigError("unknown source '" + d.source + "' (synthetic, csv, idx)", r.path("source"));
  read_size(r, "classes", d.synthetic.classes);
  read_size(r, "samples_per_class", d.synthetic.samples_per_class);
  read_size(r, "image_size", d.synthetic.image_size);
  r.read("seed", d.synthetic.seed);
  r.read("pixel_noise", d.synthetic.pixel_noise);
  r.read("train_path", d.train_path);
  r.read("test_path", d.test_path);
  r.read("train_images", d.train_images);
  r.read("train_labels", d.train_labels);
  r.read("test_images", d.test_images);
  r.read("test_labels", d.test_labels);
  r.read("grayscale", d.grayscale);
  r.finish();
  if (d.synthetic.classes < 2) throw ConfigError("at least two classes are required", r.path("classes"));
  if (d.synthetic.samples_per_class < 6)
    throw ConfigError("must be at least 6 for a 5:1 split", r.path("samples_per_class"));
  if (d.synthetic.image_size < 4) throw ConfigError("must be at least 4", r.path("image_size"));
  if (d.synthetic.pixel_noise < 0) throw ConfigError("must be >= 0", r.path("pixel_noise"));
  if (d.source == "csv" && (d.train_path.empty() || d.test_path.empty()))
    throw ConfigError("csv source needs train_path and test_path", r.path("train_path"));
  if (d.source == "idx" &&
      (d.train_images.empty() || d.train_labels.empty() || d.test_images.empty() || d.test_labels.empty()))
    throw ConfigError("idx source needs train/test images and labels", r.path("train_images"));
  return d;
}

json dataset_json(const DatasetSection& d) {
  return {{"source", d.source},
          {"classes", d.synthetic.classes},
          {"samples_per_class", d.synthetic.samples_per_class},
          {"image_size", d.synthetic.image_size},
          {"seed", d.synthetic.seed},
          {"pixel_noise", d.synthetic.pixel_noise},
          {"train_path", d.train_path},
          {"test_path", d.test_path},
          {"train_images", d.train_images},
          {"train_labels", d.train_labels},
          {"test_images", d.test_images},
          {"test_labels", d.test_labels},
          {"grayscale", d.grayscale}};
}

AnalysisSection parse_analysis(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  AnalysisSection a;
  r.read("x0", a.x0);
  r.read("eps", a.eps);
  r.read("i_values", a.i_values);
  r.read("bits", a.bits);
  r.read("ep", a.ep);
  read_size(r, "grid_points", a.grid_points);
  read_size(r, "trials", a.trials);
  std::string product = a.product == ProductMode::kClosedForm ? "closed-form" : "direct";
  r.read("product", product);
  if (product == "closed-form") a.product = ProductMode::kClosedForm;
  else if (product == "direct") a.product = ProductMode::kDirect;
  else throw ConfigError("unknown product mode '" + product + "' (closed-form, direct)", r.path("product"));
  r.read("x_values", a.x_values);
  r.read("n_values", a.n_values);
  r.read("sigma", a.sigma);
  r.read("s_values", a.s_values);
  r.read("bits_values", a.bits_values);
  r.read("window", a.window);
  r.finish();

  if (!(a.eps > 0)) throw ConfigError("must be positive", r.path("eps"));
  for (std::size_t k = 0; k < a.i_values.size(); ++k)
    if (!(a.i_values[k] >= 0 && a.i_values[k] <= 1)) throw ConfigError("must lie in [0, 1]", index(r.path("i_values"), k));
  if (a.bits < 1 || a.bits > 16) throw ConfigError("must lie in [1, 16]", r.path("bits"));
  if (!(a.ep > 0 && a.ep < 1)) throw ConfigError("must lie in (0, 1)", r.path("ep"));
  if (a.grid_points < 1) throw ConfigError("must be positive", r.path("grid_points"));
  if (a.trials < 1) throw ConfigError("must be positive", r.path("trials"));
  if (a.x_values.empty()) throw ConfigError("must not be empty", r.path("x_values"));
  if (a.n_values.empty()) throw ConfigError("must not be empty", r.path("n_values"));
  for (std::size_t k = 0; k < a.n_values.size(); ++k)
    if (a.n_values[k] < 1) throw ConfigError("must be positive", index(r.path("n_values"), k));
  if (!(a.sigma > 0)) throw ConfigError("must be positive", r.path("sigma"));
  for (std::size_t k = 0; k < a.s_values.size(); ++k)
    if (!(a.s_values[k] > 0)) throw ConfigError("must be positive", index(r.path("s_values"), k));
  for (std::size_t k = 0; k < a.bits_values.size(); ++k)
    if (a.bits_values[k] < 1 || a.bits_values[k] > 16)
      throw ConfigError("must lie in [1, 16]", index(r.path("bits_values"), k));
  if (!(a.window > 0)) throw ConfigError("must be positive", r.path("window"));
  return a;
}

json analysis_json(const AnalysisSection& a) {
  return {{"x0", a.x0},
          {"eps", a.eps},
          {"i_values", a.i_values},
          {"bits", a.bits},
          {"ep", a.ep},
          {"grid_points", a.grid_points},
          {"trials", a.trials},
          {"product", a.product == ProductMode::kClosedForm ? "closed-form" : "direct"},
          {"x_values", a.x_values},
          {"n_values", a.n_values},
          {"sigma", a.sigma},
          {"s_values", a.s_values},
          {"bits_values", a.bits_values},
          {"window", a.window}};
}

SweepSection parse_sweep(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  SweepSection s;
  std::string base(to_string(s.base));
  r.read("base", base);
  auto m = parse_mode(base);
  if (!m) throw ConfigError("unknown mode '" + base + "'", r.path("base"));
  if (*m == Mode::kSweep) throw ConfigError("a sweep cannot sweep sweeps", r.path("base"));
  s.base = *m;
  if (const json* v = r.find("axes")) {
    if (!v->is_array()) throw ConfigError("expected a list of {name, values}", r.path("axes"));
    std::set<std::string> names;
    for (std::size_t k = 0; k < v->size(); ++k) {
      const std::string p = index(r.path("axes"), k);
      ObjectReader a((*v)[k], p);
      SweepAxis axis;
      a.read("name", axis.name);
      const auto& known = sweep_axis_names();
      if (std::find(known.begin(), known.end(), axis.name) == known.end())
        throw ConfigError("unknown axis '" + axis.name + "'", p + ".name");
      if (!names.insert(axis.name).second) throw ConfigError("duplicate axis '" + axis.name + "'", p + ".name");
      const json* vals = a.find("values");
      if (!vals || !vals->is_array() || vals->empty()) throw ConfigError("needs a non-empty list", p + ".values");
      for (const auto& x : *vals) axis.values.push_back(x);
      a.finish();
      s.axes.push_back(std::move(axis));
    }
  }
  r.finish();
  return s;
}

json sweep_json(const SweepSection& s) {
  json axes = json::array();
  for (const auto& a : s.axes) axes.push_back({{"name", a.name}, {"values", a.values}});
  return {{"base", std::string(to_string(s.base))}, {"axes", axes}};
}

std::string json_error_location(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::string what = e.what();
    auto pos = what.find("error: ");
    throw ConfigError("malformed JSON at " + json_error_location(text, e.byte == 0 ? 0 : e.byte - 1) + ": " +
                      (pos == std::string::npos ? what : what.substr(pos + 7)));
  }
  return parse_config_json(doc);
}

ExperimentConfig parse_config_json(const json& doc) {
  ObjectReader r(doc, "");
  ExperimentConfig c;
  std::string mode(to_string(c.mode));
  r.read("mode", mode);
  auto m = parse_mode(mode);
  if (!m) throw ConfigError("unknown mode '" + mode + "'", "mode");
  c.mode = *m;
  r.read("seed", c.seed);
  c.init_seed = c.seed;
  r.read("init_seed", c.init_seed);
  r.read("out_dir", c.out_dir);
  if (const json* v = r.find("activation")) c.activation = parse_activation(*v, "activation");
  if (const json* v = r.find("noise"); v && !v->is_null()) c.noise = parse_noise(*v, "noise");
  if (const json* v = r.find("model")) c.model = parse_model(*v, "model", c.noise);
  if (const json* v = r.find("train")) c.train = parse_train(*v, "train");
  if (const json* v = r.find("dataset")) c.dataset = parse_dataset(*v, "dataset");
  if (const json* v = r.find("analysis")) c.analysis = parse_analysis(*v, "analysis");
  if (const json* v = r.find("sweep")) c.sweep = parse_sweep(*v, "sweep");
  r.finish();
  c.train.seed = c.seed;
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what(), e.field());
  }
}

json to_json(const ExperimentConfig& c) {
  return {{"mode", std::string(to_string(c.mode))},
          {"seed", c.seed},
          {"init_seed", c.init_seed},
          {"out_dir", c.out_dir},
          {"activation", activation_json(c.activation)},
          {"noise", c.noise ? noise_json(*c.noise) : json(nullptr)},
          {"model", model_json(c.model)},
          {"train", train_json(c.train)},
          {"dataset", dataset_json(c.dataset)},
          {"analysis", analysis_json(c.analysis)},
          {"sweep", sweep_json(c.sweep)}};
}

std::optional<std::pair<Shape, std::size_t>> declared_dataset_shape(const DatasetSection& d) {
  if (d.source != "synthetic") return std::nullopt;
  return std::make_pair(Shape{1, d.synthetic.image_size, d.synthetic.image_size}, d.synthetic.classes);
}

ModelConfig model_config(const ExperimentConfig& c, const Shape& sample_shape, std::size_t classes) {
  const ModelSection& m = c.model;
  const Shape shape = m.input_shape.empty() ? sample_shape : m.input_shape;
  const std::size_t k = m.classes ? m.classes : classes;
  AnalogPlacement placement;
  placement.noise = c.noise;
  placement.inputs = m.analog.inputs;
  placement.signals = m.analog.signals;
  placement.weights = m.analog.weights;
  ModelConfig out;
  if (m.preset == "convnet-mini") {
    out = convnet_mini(shape, k, c.activation, placement, m.channels, m.hidden);
  } else if (m.preset == "conv-stack") {
    out = conv_stack(shape, k, c.activation, placement, m.conv_layers, m.linear_layers, m.channels,
                     m.hidden.empty() ? 64 : m.hidden.front());
    out.preset = "conv-stack";
  } else if (m.preset == "mlp") {
    out = mlp(m.linear_layers, shape, k, c.activation, placement, m.hidden.empty() ? 64 : m.hidden.front());
  } else {
    out.preset = "custom";
    out.input_shape = shape;
    out.classes = k;
    out.layers = m.layers;
    if (c.noise && m.analog.inputs) out.input_analog = c.noise;
  }
  return out;
}

void validate(const ExperimentConfig& c) {
  c.activation.validate();
  if (c.noise) c.noise->validate("noise");
  c.train.validate("train");
  if (c.mode == Mode::kSweep && c.sweep.axes.empty())
    throw ConfigError("mode 'sweep' needs at least one axis", "sweep.axes");
  if (c.mode != Mode::kSweep && !c.sweep.axes.empty())
    throw ConfigError("axes are only allowed when mode is 'sweep'", "sweep.axes");

  const Mode effective = c.mode == Mode::kSweep ? c.sweep.base : c.mode;
  if (effective == Mode::kTrain) {
    if (c.activation.is_glu())
      throw ConfigError("gated activations cannot be used as model layers", "activation.kind");
    if (auto declared = declared_dataset_shape(c.dataset)) {
      const ModelConfig mc = model_config(c, declared->first, declared->second);
      infer_shapes(mc);
      if (mc.input_shape != declared->first)
        throw ConfigError("model expects " + shape_str(mc.input_shape) + " but the dataset yields " +
                              shape_str(declared->first),
                          "model.input_shape");
      const std::size_t train_size = c.dataset.synthetic.classes * (c.dataset.synthetic.samples_per_class * 5 / 6);
      if (c.train.batch_size > train_size)
        throw ConfigError("batch size " + std::to_string(c.train.batch_size) + " exceeds the training set (" +
                              std::to_string(train_size) + ")",
                          "train.batch_size");
    }
  }
  if (effective == Mode::kAnalyzeSurface && !c.analysis.i_values.empty() && !c.activation.is_interp())
    throw ConfigError("i_values need an interp-* activation", "analysis.i_values");
  if (effective == Mode::kAnalyzeGsd && !c.analysis.i_values.empty() && !c.activation.is_interp())
    throw ConfigError("i_values need an interp-* activation", "analysis.i_values");
  if (effective != Mode::kTrain && c.activation.is_glu())
    throw ConfigError("analysis modes take elementwise activations", "activation.kind");

  for (std::size_t k = 0; k < c.sweep.axes.size(); ++k) {
    const auto& axis = c.sweep.axes[k];
    for (std::size_t v = 0; v < axis.values.size(); ++v) {
      ExperimentConfig cell = c;
      cell.mode = c.sweep.base;
      cell.sweep.axes.clear();
      const std::string where = "sweep.axes[" + std::to_string(k) + "].values[" + std::to_string(v) + "]";
      try {
        apply_axis(cell, axis.name, axis.values[v]);
        validate(cell);
      } catch (const ConfigError& e) {
        throw ConfigError(e.what(), where);
      }
    }
  }
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_digest(const ExperimentConfig& c) {
  json j = to_json(c);
  j.erase("out_dir");
  return fnv1a_hex(j.dump());
}

void apply_axis(ExperimentConfig& c, const std::string& axis, const json& value) {
  auto real = [&] { return as_real(value, axis); };
  auto count = [&] {
    const std::size_t v = as_size(value, axis);
    if (v == 0) throw ConfigError("must be positive", axis);
    return v;
  };
  if (axis == "activation") {
    c.activation = parse_activation(value, "activation");
  } else if (axis == "i") {
    c.activation.i = real();
  } else if (axis == "s") {
    c.activation.s = real();
  } else if (axis == "alpha") {
    c.activation.alpha = real();
  } else if (axis == "bits") {
    const int bits = as_int(value, axis);
    if (bits < 1 || bits > 16) throw ConfigError("must lie in [1, 16]", "bits");
    c.analysis.bits = bits;
    if (c.noise) {
      // The error probability is the held quantity; sigma follows the new bits.
      QuantNoiseSpec q = *c.noise;
      q.bits = bits;
      q.sigma.reset();
      if (*q.target_ep == 0.0) q.sigma = 0.0;
      c.noise = q.resolved();
    }
  } else if (axis == "ep") {
    const double ep = real();
    if (!(ep > 0 && ep < 1)) throw ConfigError("must lie in (0, 1)", "ep");
    c.analysis.ep = ep;
    if (c.noise) {
      QuantNoiseSpec q = *c.noise;
      q.sigma.reset();
      q.target_ep = ep;
      c.noise = q.resolved();
    } else if (c.mode == Mode::kTrain) {
      throw ConfigError("an ep axis on a training sweep needs a noise section", "noise");
    }
  } else if (axis == "lr") {
    c.train.learning_rate = real();
  } else if (axis == "batch_size") {
    c.train.batch_size = count();
  } else if (axis == "epochs") {
    c.train.epochs = count();
  } else if (axis == "optimizer") {
    auto o = parse_optimizer(as_string(value, axis));
    if (!o) throw ConfigError("unknown optimizer", axis);
    c.train.optimizer = *o;
  } else if (axis == "conv_layers") {
    c.model.conv_layers = as_size(value, axis);
    if (c.model.preset == "convnet-mini") c.model.preset = "conv-stack";
  } else if (axis == "linear_layers") {
    c.model.linear_layers = count();
    if (c.model.preset == "convnet-mini") c.model.preset = "conv-stack";
  } else {
    throw ConfigError("unknown axis '" + axis + "'", "sweep.axes");
  }
}

}  // namespace agrad
