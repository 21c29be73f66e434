#pragma once

// JSON encodings of templates, models, run reports and evaluation results.

#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aefe/analysis.hpp"
#include "aefe/construct.hpp"
#include "aefe/error.hpp"
#include "aefe/feature_spec.hpp"
#include "aefe/gbdt.hpp"
#include "aefe/logistic.hpp"
#include "aefe/pipeline.hpp"

namespace aefe {

using Json = nlohmann::json;

namespace detail {

inline const Json& require(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw DataError(std::string("missing key '") + key + "'");
  return j.at(key);
}

template <class T>
T get(const Json& j, const char* key) {
  try {
    return require(j, key).get<T>();
  } catch (const Json::exception&) {
    throw DataError(std::string("key '") + key + "' has the wrong type");
  }
}

inline std::size_t field_of(const Schema& schema, const std::string& name) {
  auto f = schema.field_index(name);
  if (!f) throw TemplateError("unknown field '" + name + "'");
  return *f;
}

}  // namespace detail

inline Json to_json(const FeatureSpec& s, const Schema& schema) {
  Json j;
  j["paradigm"] = std::string(to_string(s.paradigm));
  j["p"] = schema.categorical_fields.at(s.p);
  j["q"] = s.q ? Json(schema.categorical_fields.at(*s.q)) : Json(nullptr);
  j["denominator"] = s.paradigm == Paradigm::Ratio ? Json(schema.categorical_fields.at(s.denominator)) : Json(nullptr);
  j["indicator"] = s.indicator;
  j["operator"] = std::string(to_string(s.op));
  j["window"] = s.window ? Json(*s.window) : Json("all");
  return j;
}

inline FeatureSpec spec_from_json(const Json& j, const Schema& schema) {
  FeatureSpec s;
  auto paradigm = parse_paradigm(detail::get<std::string>(j, "paradigm"));
  if (!paradigm) throw TemplateError("unknown paradigm in template");
  s.paradigm = *paradigm;
  s.p = detail::field_of(schema, detail::get<std::string>(j, "p"));
  if (j.contains("q") && !j.at("q").is_null()) s.q = detail::field_of(schema, detail::get<std::string>(j, "q"));
  if (j.contains("denominator") && !j.at("denominator").is_null())
    s.denominator = detail::field_of(schema, detail::get<std::string>(j, "denominator"));
  s.indicator = detail::get<std::string>(j, "indicator");
  auto op = parse_operator(detail::get<std::string>(j, "operator"));
  if (!op) throw TemplateError("unknown operator in template");
  s.op = *op;
  const auto& w = detail::require(j, "window");
  if (w.is_string()) {
    if (w.get<std::string>() != "all") throw TemplateError("window must be an integer or \"all\"");
  } else if (w.is_number_integer()) {
    s.window = w.get<std::int64_t>();
  } else {
    throw TemplateError("window must be an integer or \"all\"");
  }
  validate(s, schema);
  return s;
}

inline Json to_json(const Provenance& p) {
  return Json{{"task", p.task},
              {"iteration", p.iteration},
              {"pair", {p.pair_first, p.pair_second}},
              {"variance", p.variance},
              {"importance", p.importance},
              {"score_delta", p.score_delta}};
}

inline Provenance provenance_from_json(const Json& j) {
  Provenance p;
  p.task = detail::get<std::string>(j, "task");
  p.iteration = detail::get<std::size_t>(j, "iteration");
  const auto pair = detail::get<std::vector<std::size_t>>(j, "pair");
  if (pair.size() != 2) throw TemplateError("provenance pair must have two entries");
  p.pair_first = pair[0];
  p.pair_second = pair[1];
  p.variance = detail::get<double>(j, "variance");
  p.importance = detail::get<double>(j, "importance");
  p.score_delta = detail::get<double>(j, "score_delta");
  return p;
}

inline Json to_json(const FeatureTemplate& tpl, const Schema& schema) {
  Json features = Json::array();
  for (const auto& e : tpl.entries) {
    Json f;
    f["name"] = e.name;
    f["spec"] = to_json(e.spec, schema);
    f["imputation"] = e.imputation;
    f["provenance"] = to_json(e.provenance);
    features.push_back(std::move(f));
  }
  return Json{{"version", tpl.version},
              {"fingerprint", tpl.fingerprint},
              {"fields", schema.categorical_fields},
              {"window_open_lower", tpl.window_open_lower},
              {"features", std::move(features)}};
}

inline FeatureTemplate template_from_json(const Json& j, const Schema& schema) {
  FeatureTemplate tpl;
  try {
    tpl.version = detail::get<std::string>(j, "version");
    tpl.fingerprint = detail::get<std::string>(j, "fingerprint");
    tpl.window_open_lower = detail::get<bool>(j, "window_open_lower");
    if (detail::get<std::vector<std::string>>(j, "fields") != schema.categorical_fields)
      throw TemplateError("template fields differ from the configured schema");
    for (const auto& f : detail::require(j, "features")) {
      TemplateEntry e;
      e.name = detail::get<std::string>(f, "name");
      e.spec = spec_from_json(detail::require(f, "spec"), schema);
      e.imputation = detail::get<double>(f, "imputation");
      e.provenance = provenance_from_json(detail::require(f, "provenance"));
      tpl.entries.push_back(std::move(e));
    }
  } catch (const TemplateError&) {
    throw;
  } catch (const Error& e) {
    throw TemplateError(std::string("malformed template: ") + e.what());
  }
  tpl.validate(schema);
  return tpl;
}

inline void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

inline Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw DataError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline FeatureTemplate load_template(const std::string& path, const Schema& schema) {
  return template_from_json(read_json(path), schema);
}

namespace detail {

inline Json tree_node_json(const RegressionTree& t, std::size_t i) {
  const auto& n = t.nodes.at(i);
  if (n.feature < 0) return Json{{"leaf", n.value}};
  return Json{{"feature", n.feature},
              {"threshold", n.threshold},
              {"left", tree_node_json(t, static_cast<std::size_t>(n.left))},
              {"right", tree_node_json(t, static_cast<std::size_t>(n.right))}};
}

inline int tree_node_from_json(const Json& j, RegressionTree& t, std::size_t n_features) {
  const auto index = static_cast<int>(t.nodes.size());
  t.nodes.emplace_back();
  if (j.contains("leaf")) {
    t.nodes[static_cast<std::size_t>(index)].value = get<double>(j, "leaf");
    return index;
  }
  const int feature = get<int>(j, "feature");
  if (feature < 0 || static_cast<std::size_t>(feature) >= n_features)
    throw DataError("tree references feature " + std::to_string(feature) + " out of range");
  const double threshold = get<double>(j, "threshold");
  const int left = tree_node_from_json(require(j, "left"), t, n_features);
  const int right = tree_node_from_json(require(j, "right"), t, n_features);
  auto& node = t.nodes[static_cast<std::size_t>(index)];
  node.feature = feature;
  node.threshold = threshold;
  node.left = left;
  node.right = right;
  return index;
}

}  // namespace detail

inline Json to_json(const GbdtConfig& c) {
  return Json{{"trees", c.trees},       {"max_depth", c.max_depth}, {"learning_rate", c.learning_rate},
              {"min_leaf", c.min_leaf}, {"l2", c.l2},               {"max_bins", c.max_bins}};
}

inline Json to_json(const GbdtModel& m, const std::vector<std::string>& columns = {}) {
  Json trees = Json::array();
  for (const auto& t : m.trees) trees.push_back(detail::tree_node_json(t, 0));
  return Json{{"kind", "gbdt"},          {"base_score", m.base_score}, {"n_features", m.n_features},
              {"columns", columns},      {"config", to_json(m.config)}, {"importances", m.importances},
              {"trees", std::move(trees)}};
}

inline GbdtModel gbdt_from_json(const Json& j) {
  if (detail::get<std::string>(j, "kind") != "gbdt") throw DataError("model is not a GBDT");
  GbdtModel m;
  m.base_score = detail::get<double>(j, "base_score");
  m.n_features = detail::get<std::size_t>(j, "n_features");
  m.importances = detail::get<std::vector<double>>(j, "importances");
  const auto& c = detail::require(j, "config");
  m.config.trees = detail::get<std::size_t>(c, "trees");
  m.config.max_depth = detail::get<std::size_t>(c, "max_depth");
  m.config.learning_rate = detail::get<double>(c, "learning_rate");
  m.config.min_leaf = detail::get<std::size_t>(c, "min_leaf");
  m.config.l2 = detail::get<double>(c, "l2");
  m.config.max_bins = detail::get<std::size_t>(c, "max_bins");
  for (const auto& t : detail::require(j, "trees")) {
    RegressionTree tree;
    detail::tree_node_from_json(t, tree, m.n_features);
    m.trees.push_back(std::move(tree));
  }
  return m;
}

inline Json to_json(const LrModel& m, const std::vector<std::string>& columns = {}) {
  return Json{{"kind", "lr"},
              {"columns", columns},
              {"weights", m.weights},
              {"bias", m.bias},
              {"means", m.means},
              {"scales", m.scales},
              {"config",
               {{"learning_rate", m.config.learning_rate},
                {"epochs", m.config.epochs},
                {"batch_size", m.config.batch_size},
                {"l2", m.config.l2},
                {"seed", m.config.seed}}}};
}

inline LrModel lr_from_json(const Json& j) {
  if (detail::get<std::string>(j, "kind") != "lr") throw DataError("model is not a logistic regression");
  LrModel m;
  m.weights = detail::get<std::vector<double>>(j, "weights");
  m.bias = detail::get<double>(j, "bias");
  m.means = detail::get<std::vector<double>>(j, "means");
  m.scales = detail::get<std::vector<double>>(j, "scales");
  if (m.means.size() != m.weights.size() || m.scales.size() != m.weights.size())
    throw DataError("LR model vectors differ in length");
  const auto& c = detail::require(j, "config");
  m.config.learning_rate = detail::get<double>(c, "learning_rate");
  m.config.epochs = detail::get<std::size_t>(c, "epochs");
  m.config.batch_size = detail::get<std::size_t>(c, "batch_size");
  m.config.l2 = detail::get<double>(c, "l2");
  m.config.seed = detail::get<std::uint64_t>(c, "seed");
  return m;
}

inline Json to_json(const IterationRecord& r) {
  return Json{{"iteration", r.iteration}, {"pair", {r.first, r.second}}, {"n_generated", r.n_generated},
              {"n_valid", r.n_valid},     {"predicted", r.predicted},    {"realized", r.realized},
              {"score", r.score},         {"score_max", r.score_max}};
}

inline IterationRecord iteration_from_json(const Json& j) {
  IterationRecord r;
  r.iteration = detail::get<std::size_t>(j, "iteration");
  const auto pair = detail::get<std::vector<std::size_t>>(j, "pair");
  if (pair.size() != 2) throw DataError("history pair must have two entries");
  r.first = pair[0];
  r.second = pair[1];
  r.n_generated = detail::get<std::size_t>(j, "n_generated");
  r.n_valid = detail::get<std::size_t>(j, "n_valid");
  r.predicted = detail::get<double>(j, "predicted");
  r.realized = detail::get<double>(j, "realized");
  r.score = detail::get<double>(j, "score");
  r.score_max = detail::get<double>(j, "score_max");
  return r;
}

inline Json to_json(const SelectionReport& r, const std::vector<std::string>& names) {
  auto stage = [&](const std::vector<StageDecision>& ds, const char* value_key) {
    Json a = Json::array();
    for (const auto& d : ds) a.push_back(Json{{"name", names.at(d.index)}, {value_key, d.value}, {"kept", d.kept}});
    return a;
  };
  Json order = Json::array();
  for (auto i : r.order) order.push_back(names.at(i));
  return Json{{"filter", stage(r.filter, "variance")},
              {"embedded", stage(r.embedded, "importance")},
              {"wrapper", stage(r.wrapper, "score_delta")},
              {"order", std::move(order)},
              {"trajectory", r.trajectory}};
}

/// Run report without timings, so identical runs give identical files.
inline Json to_json(const RunReport& r, const Schema& schema) {
  Json tasks = Json::array();
  for (const auto& t : r.tasks) {
    Json history = Json::array();
    for (const auto& h : t.history) history.push_back(to_json(h));
    Json accepted = Json::array();
    for (const auto& f : t.accepted) accepted.push_back(Json{{"name", f.name}, {"provenance", to_json(f.provenance)}});
    Json matrix = Json::array();
    for (std::size_t i = 0; i < t.initial_matrix.m; ++i) {
      Json row = Json::array();
      for (std::size_t k = 0; k < t.initial_matrix.m; ++k) row.push_back(t.initial_matrix(i, k));
      matrix.push_back(std::move(row));
    }
    tasks.push_back(Json{{"id", t.task.id},
                         {"name", t.task.name()},
                         {"indicator", t.task.indicator},
                         {"operator", std::string(to_string(t.task.op))},
                         {"seed", t.task.seed},
                         {"stop_reason", t.stop_reason},
                         {"candidates", t.candidates},
                         {"guarded_divisions", t.guarded_divisions},
                         {"initial_pair_matrix", std::move(matrix)},
                         {"history", std::move(history)},
                         {"accepted", std::move(accepted)}});
  }
  Json selected = Json::array();
  for (auto i : r.global.selected) selected.push_back(r.merged.at(i));
  return Json{{"fields", schema.categorical_fields},
              {"search_space", {{"nominal", r.space.nominal}, {"enumerated", r.space.enumerated}}},
              {"rows_full", r.rows_full},
              {"rows_sampled", r.rows_sampled},
              {"fingerprint", r.fingerprint},
              {"guarded_divisions", r.guarded_divisions},
              {"tasks", std::move(tasks)},
              {"global_selection",
               {{"merged", r.merged},
                {"selected", std::move(selected)},
                {"report", to_json(r.global.report, r.merged)}}},
              {"final_features", r.final_features}};
}

/// Search curves stored in a run report.
inline std::vector<SearchCurve> curves_from_report(const Json& report) {
  std::vector<SearchCurve> out;
  for (const auto& t : detail::require(report, "tasks")) {
    SearchCurve c;
    c.task = detail::get<std::string>(t, "name");
    c.early_stop = detail::get<std::string>(t, "stop_reason") == "early_stop";
    for (const auto& h : detail::require(t, "history")) c.history.push_back(iteration_from_json(h));
    out.push_back(std::move(c));
  }
  return out;
}

inline Json to_json(const EvaluationResult& r) {
  Json j{{"model", r.kind == ModelKind::Lr ? "lr" : "gbdt"},
         {"auc_train", r.auc_train},
         {"auc_valid", r.auc_valid},
         {"auc_test", r.auc_test},
         {"rows", {{"train", r.n_train}, {"valid", r.n_valid}, {"test", r.n_test}}},
         {"baseline_auc", r.baseline_auc ? Json(*r.baseline_auc) : Json(nullptr)},
         {"rela_impr_percent", r.rela_impr ? Json(*r.rela_impr) : Json(nullptr)}};
  Json imp = Json::array();
  for (std::size_t c = 0; c < r.columns.size(); ++c)
    imp.push_back(Json{{"column", r.columns[c]}, {"importance", r.importances.at(c)}});
  j["importances"] = std::move(imp);
  return j;
}

inline Json model_json(const EvaluationResult& r) {
  return std::visit([&](const auto& m) { return to_json(m, r.columns); }, r.model);
}

}  // namespace aefe
