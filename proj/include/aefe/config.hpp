#pragma once

// Run configuration: a YAML document of nested sections, plus dotted-path
// overrides of the form `section.key=value`.
//
//   data:         {path, delimiter}
//   schema:       {fields, label, timestamp, continuous}
//   construction: {indicators, operators, paradigms, windows, window_open_lower}
//   sampling:     {rate, seed}
//   selection:    {t_filter, t_embedded, t_wrapper, rate_valid, variance: scaled|raw}
//   search:       {mode: guided|exhaustive, k_latent, eta, iter_es, factorize_epochs}
//   gbdt:         {trees, max_depth, learning_rate, min_leaf, l2, max_bins}
//   lr:           {learning_rate, epochs, batch_size, l2, seed}
//   fm:           {k_emb, learning_rate, epochs, l2, init_scale, seed}
//   evaluation:   {split: last_window|time_fraction|random, test_duration,
//                  test_fraction, valid_rate, seed, baseline_auc, include_raw}
//   run:          {parallelism}
//
// Windows are integers in timestamp units or the word `all`.

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "aefe/aggregate.hpp"
#include "aefe/dataset.hpp"
#include "aefe/error.hpp"
#include "aefe/feature_spec.hpp"
#include "aefe/fm.hpp"
#include "aefe/gbdt.hpp"
#include "aefe/logistic.hpp"
#include "aefe/search.hpp"
#include "aefe/selection.hpp"

namespace aefe {

enum class TestSplit { LastWindow, TimeFraction, Random };

struct EvaluationConfig {
  TestSplit split = TestSplit::LastWindow;
  /// Width of the trailing test window, in timestamp units.
  std::int64_t test_duration = 86400;
  double test_fraction = 0.1;
  double valid_rate = 0.2;
  std::uint64_t seed = 1;
  std::optional<double> baseline_auc;
  /// Append the one-hot raw fields to the feature file's columns.
  bool include_raw = true;
};

struct RunConfig {
  std::string data_path;
  CsvOptions csv;
  Schema schema;
  std::vector<Operator> operators{std::begin(kAllOperators), std::end(kAllOperators)};
  ConstructionConfig construction;
  bool window_open_lower = false;
  double sampling_rate = 0.1;
  std::uint64_t seed = 1;
  SelectionThresholds thresholds;
  SearchConfig search;
  GbdtConfig gbdt;
  LrConfig lr;
  FmConfig fm;
  EvaluationConfig evaluation;
  std::size_t parallelism = 1;

  const std::vector<std::string>& indicators() const { return schema.indicator_set; }

  void validate() const {
    schema.validate();
    if (schema.indicator_set.empty()) throw ConfigError("indicator set is empty");
    if (operators.empty()) throw ConfigError("operator set is empty");
    if (construction.paradigms.empty()) throw ConfigError("paradigm set is empty");
    if (construction.windows.empty()) throw ConfigError("window set is empty");
    for (const auto& w : construction.windows)
      if (w && *w <= 0) throw ConfigError("windows must be positive durations");
    const bool windowed = std::any_of(construction.windows.begin(), construction.windows.end(),
                                      [](const auto& w) { return w.has_value(); });
    if (windowed && !schema.timestamp) throw ConfigError("windows need a timestamp column");
    if (!(sampling_rate > 0 && sampling_rate <= 1)) throw ConfigError("sampling rate must lie in (0, 1]");
    thresholds.validate();
    if (search.k_latent == 0) throw ConfigError("k_latent must be >= 1");
    if (search.iter_es == 0) throw ConfigError("iter_es must be >= 1");
    if (!(search.eta > 0)) throw ConfigError("eta must be positive");
    if (parallelism == 0) throw ConfigError("parallelism must be >= 1");
    if (!(evaluation.valid_rate > 0 && evaluation.valid_rate < 1))
      throw ConfigError("evaluation.valid_rate must lie in (0, 1)");
  }
};

namespace detail {

template <class T>
T scalar(const YAML::Node& node, const std::string& path) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("config key '" + path + "' has an invalid value");
  }
}

template <class T>
void read_into(const YAML::Node& section, const std::string& prefix, const char* key, T& target) {
  if (const auto n = section[key]) target = scalar<T>(n, prefix + "." + key);
}

inline std::vector<std::string> string_list(const YAML::Node& node, const std::string& path) {
  if (!node.IsSequence()) throw ConfigError("config key '" + path + "' must be a list");
  std::vector<std::string> out;
  for (const auto& item : node) out.push_back(scalar<std::string>(item, path));
  return out;
}

inline void check_keys(const YAML::Node& section, const std::string& name,
                       std::initializer_list<std::string_view> allowed) {
  if (!section) return;
  if (!section.IsMap()) throw ConfigError("config section '" + name + "' must be a mapping");
  for (const auto& kv : section) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown config key '" + name + "." + key + "'");
  }
}

}  // namespace detail

/// Sets `path` (dot separated) in `root` to the YAML value `value`.
inline void apply_override(YAML::Node& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  const std::string path = assignment.substr(0, eq);
  YAML::Node value;
  try {
    value = YAML::Load(assignment.substr(eq + 1));
  } catch (const YAML::Exception&) {
    throw ConfigError("override '" + assignment + "' has an unparsable value");
  }
  std::vector<std::string> parts;
  std::stringstream ss(path);
  for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
  if (parts.size() != 2) throw ConfigError("override key '" + path + "' must be section.key");
  if (!root[parts[0]]) root[parts[0]] = YAML::Node(YAML::NodeType::Map);
  YAML::Node section = root[parts[0]];
  section[parts[1]] = value;
}

inline RunConfig parse_config(const YAML::Node& root) {
  using detail::read_into;
  if (!root.IsMap()) throw ConfigError("config must be a mapping of sections");
  for (const auto& kv : root) {
    static const std::vector<std::string> sections{"data", "schema", "construction", "sampling",
                                                   "selection", "search", "gbdt", "lr",
                                                   "fm", "evaluation", "run"};
    const auto key = kv.first.as<std::string>();
    if (std::find(sections.begin(), sections.end(), key) == sections.end())
      throw ConfigError("unknown config section '" + key + "'");
  }
  RunConfig c;

  const auto data = root["data"];
  detail::check_keys(data, "data", {"path", "delimiter"});
  if (data) {
    read_into(data, "data", "path", c.data_path);
    if (data["delimiter"]) {
      const auto d = detail::scalar<std::string>(data["delimiter"], "data.delimiter");
      if (d.size() != 1) throw ConfigError("data.delimiter must be one character");
      c.csv.delimiter = d[0];
    }
  }

  const auto schema = root["schema"];
  detail::check_keys(schema, "schema", {"fields", "label", "timestamp", "continuous"});
  if (!schema) throw ConfigError("config has no schema section");
  if (!schema["fields"]) throw ConfigError("schema.fields is required");
  c.schema.categorical_fields = detail::string_list(schema["fields"], "schema.fields");
  read_into(schema, "schema", "label", c.schema.label);
  if (schema["timestamp"] && !schema["timestamp"].IsNull())
    c.schema.timestamp = detail::scalar<std::string>(schema["timestamp"], "schema.timestamp");
  if (schema["continuous"])
    c.schema.continuous_indicators = detail::string_list(schema["continuous"], "schema.continuous");

  const auto cons = root["construction"];
  detail::check_keys(cons, "construction",
                     {"indicators", "operators", "paradigms", "windows", "window_open_lower"});
  c.schema.indicator_set = {c.schema.label, std::string(kUnitIndicator)};
  if (cons) {
    if (cons["indicators"])
      c.schema.indicator_set = detail::string_list(cons["indicators"], "construction.indicators");
    if (cons["operators"]) {
      c.operators.clear();
      for (const auto& s : detail::string_list(cons["operators"], "construction.operators")) {
        auto op = parse_operator(s);
        if (!op) throw ConfigError("unknown operator '" + s + "'");
        c.operators.push_back(*op);
      }
    }
    if (cons["paradigms"]) {
      c.construction.paradigms.clear();
      for (const auto& s : detail::string_list(cons["paradigms"], "construction.paradigms")) {
        auto p = parse_paradigm(s);
        if (!p) throw ConfigError("unknown paradigm '" + s + "'");
        c.construction.paradigms.push_back(*p);
      }
    }
    if (cons["windows"]) {
      c.construction.windows.clear();
      for (const auto& s : detail::string_list(cons["windows"], "construction.windows")) {
        if (s == "all") {
          c.construction.windows.emplace_back(std::nullopt);
          continue;
        }
        auto v = detail::parse_int(s);
        if (!v) throw ConfigError("window '" + s + "' is neither an integer nor 'all'");
        c.construction.windows.emplace_back(*v);
      }
    }
    read_into(cons, "construction", "window_open_lower", c.window_open_lower);
  }

  const auto sampling = root["sampling"];
  detail::check_keys(sampling, "sampling", {"rate", "seed"});
  if (sampling) {
    read_into(sampling, "sampling", "rate", c.sampling_rate);
    read_into(sampling, "sampling", "seed", c.seed);
  }

  const auto sel = root["selection"];
  detail::check_keys(sel, "selection", {"t_filter", "t_embedded", "t_wrapper", "rate_valid", "variance"});
  if (sel) {
    read_into(sel, "selection", "t_filter", c.thresholds.t_filter);
    read_into(sel, "selection", "t_embedded", c.thresholds.t_embedded);
    read_into(sel, "selection", "t_wrapper", c.thresholds.t_wrapper);
    read_into(sel, "selection", "rate_valid", c.thresholds.rate_valid);
    if (sel["variance"]) {
      const auto v = detail::scalar<std::string>(sel["variance"], "selection.variance");
      if (v != "scaled" && v != "raw") throw ConfigError("selection.variance must be scaled or raw");
      c.thresholds.scaled_variance = v == "scaled";
    }
  }

  const auto search = root["search"];
  detail::check_keys(search, "search", {"mode", "k_latent", "eta", "iter_es", "factorize_epochs"});
  if (search) {
    if (search["mode"]) {
      const auto v = detail::scalar<std::string>(search["mode"], "search.mode");
      if (v != "guided" && v != "exhaustive") throw ConfigError("search.mode must be guided or exhaustive");
      c.search.mode = v == "guided" ? SearchMode::Guided : SearchMode::Exhaustive;
    }
    read_into(search, "search", "k_latent", c.search.k_latent);
    read_into(search, "search", "eta", c.search.eta);
    read_into(search, "search", "iter_es", c.search.iter_es);
    read_into(search, "search", "factorize_epochs", c.search.factorize_epochs);
  }

  const auto gbdt = root["gbdt"];
  detail::check_keys(gbdt, "gbdt", {"trees", "max_depth", "learning_rate", "min_leaf", "l2", "max_bins"});
  if (gbdt) {
    read_into(gbdt, "gbdt", "trees", c.gbdt.trees);
    read_into(gbdt, "gbdt", "max_depth", c.gbdt.max_depth);
    read_into(gbdt, "gbdt", "learning_rate", c.gbdt.learning_rate);
    read_into(gbdt, "gbdt", "min_leaf", c.gbdt.min_leaf);
    read_into(gbdt, "gbdt", "l2", c.gbdt.l2);
    read_into(gbdt, "gbdt", "max_bins", c.gbdt.max_bins);
  }

  const auto lr = root["lr"];
  detail::check_keys(lr, "lr", {"learning_rate", "epochs", "batch_size", "l2", "seed"});
  if (lr) {
    read_into(lr, "lr", "learning_rate", c.lr.learning_rate);
    read_into(lr, "lr", "epochs", c.lr.epochs);
    read_into(lr, "lr", "batch_size", c.lr.batch_size);
    read_into(lr, "lr", "l2", c.lr.l2);
    read_into(lr, "lr", "seed", c.lr.seed);
  }

  const auto fm = root["fm"];
  detail::check_keys(fm, "fm", {"k_emb", "learning_rate", "epochs", "l2", "init_scale", "seed"});
  if (fm) {
    read_into(fm, "fm", "k_emb", c.fm.k_emb);
    read_into(fm, "fm", "learning_rate", c.fm.learning_rate);
    read_into(fm, "fm", "epochs", c.fm.epochs);
    read_into(fm, "fm", "l2", c.fm.l2);
    read_into(fm, "fm", "init_scale", c.fm.init_scale);
    read_into(fm, "fm", "seed", c.fm.seed);
  }

  const auto ev = root["evaluation"];
  detail::check_keys(ev, "evaluation",
                     {"split", "test_duration", "test_fraction", "valid_rate", "seed", "baseline_auc",
                      "include_raw"});
  if (ev) {
    if (ev["split"]) {
      const auto v = detail::scalar<std::string>(ev["split"], "evaluation.split");
      if (v == "last_window") c.evaluation.split = TestSplit::LastWindow;
      else if (v == "time_fraction") c.evaluation.split = TestSplit::TimeFraction;
      else if (v == "random") c.evaluation.split = TestSplit::Random;
      else throw ConfigError("evaluation.split must be last_window, time_fraction or random");
    }
    read_into(ev, "evaluation", "test_duration", c.evaluation.test_duration);
    read_into(ev, "evaluation", "test_fraction", c.evaluation.test_fraction);
    read_into(ev, "evaluation", "valid_rate", c.evaluation.valid_rate);
    read_into(ev, "evaluation", "seed", c.evaluation.seed);
    read_into(ev, "evaluation", "include_raw", c.evaluation.include_raw);
    if (ev["baseline_auc"] && !ev["baseline_auc"].IsNull())
      c.evaluation.baseline_auc = detail::scalar<double>(ev["baseline_auc"], "evaluation.baseline_auc");
  }

  const auto run = root["run"];
  detail::check_keys(run, "run", {"parallelism"});
  if (run) read_into(run, "run", "parallelism", c.parallelism);

  c.validate();
  return c;
}

inline YAML::Node load_config_node(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return YAML::Load(in);
  } catch (const YAML::Exception& e) {
    throw ConfigError("config file '" + path + "' is not valid: " + e.what());
  }
}

inline RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  auto root = load_config_node(path);
  for (const auto& o : overrides) apply_override(root, o);
  return parse_config(root);
}

inline RunConfig parse_config_text(const std::string& text, const std::vector<std::string>& overrides = {}) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid: ") + e.what());
  }
  for (const auto& o : overrides) apply_override(root, o);
  return parse_config(root);
}

}  // namespace aefe
