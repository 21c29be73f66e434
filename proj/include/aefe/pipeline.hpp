#pragma once

// End-to-end orchestration: plan (indicator, operator) tasks, run them in
// parallel over a sample, merge, select globally and emit a template.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include "aefe/config.hpp"
#include "aefe/construct.hpp"
#include "aefe/dataset.hpp"
#include "aefe/detail/parallel.hpp"
#include "aefe/error.hpp"
#include "aefe/gbdt.hpp"
#include "aefe/logistic.hpp"
#include "aefe/metrics.hpp"
#include "aefe/search.hpp"
#include "aefe/selection.hpp"

namespace aefe {

struct TaskPlan {
  std::vector<Task> tasks;
};

/// splitmix64 finalizer; decorrelates per-task seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline TaskPlan plan_tasks(const RunConfig& cfg) {
  TaskPlan plan;
  std::unordered_set<std::string> seen;
  for (const auto& ind : cfg.indicators()) {
    auto kind = cfg.schema.indicator_kind(ind);
    if (!kind) throw ConfigError("unknown indicator '" + ind + "'");
    for (auto op : cfg.operators) {
      if (!compatible(op, *kind)) continue;
      Task t;
      t.id = plan.tasks.size();
      t.indicator = ind;
      t.op = op;
      if (!seen.insert(t.name()).second) continue;
      t.seed = mix_seed(cfg.seed, t.id);
      plan.tasks.push_back(std::move(t));
    }
  }
  if (plan.tasks.empty())
    throw ConfigError("no (indicator, operator) combination is applicable; the task plan is empty");
  return plan;
}

inline TaskSettings task_settings(const RunConfig& cfg) {
  TaskSettings s;
  s.construction = cfg.construction;
  s.thresholds = cfg.thresholds;
  s.gbdt = cfg.gbdt;
  s.search = cfg.search;
  s.window_open_lower = cfg.window_open_lower;
  return s;
}

struct RunReport {
  SearchSpaceSize space;
  std::size_t rows_full = 0;
  std::size_t rows_sampled = 0;
  std::string fingerprint;
  std::vector<TaskResult> tasks;
  /// Deduplicated merged candidates in merge order.
  std::vector<std::string> merged;
  FsaResult global;
  std::vector<std::string> final_features;
  std::size_t guarded_divisions = 0;
};

struct RunResult {
  FeatureTemplate feature_template;
  RunReport report;
};

/// Receives (stage, elapsed seconds, detail) once per finished stage.
using StageLog = std::function<void(const std::string&, double, const std::string&)>;

namespace detail {

class StageTimer {
 public:
  explicit StageTimer(const StageLog& log) : log_(log), start_(std::chrono::steady_clock::now()) {}
  void done(const std::string& stage, const std::string& info = {}) {
    const auto now = std::chrono::steady_clock::now();
    if (log_) log_(stage, std::chrono::duration<double>(now - start_).count(), info);
    start_ = now;
  }

 private:
  const StageLog& log_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

inline RunResult run(const RunConfig& cfg, const Dataset& full, const StageLog& log = {}) {
  cfg.validate();
  detail::StageTimer timer(log);
  const auto plan = plan_tasks(cfg);
  RunResult out;
  auto& report = out.report;
  report.space = count_search_space(cfg.schema, cfg.indicators(), cfg.operators, cfg.construction);
  report.rows_full = full.n_rows();
  report.fingerprint = full.fingerprint();

  const Dataset sampled = sample(full, cfg.sampling_rate, cfg.seed);
  report.rows_sampled = sampled.n_rows();
  timer.done("sample", std::to_string(sampled.n_rows()) + " rows");

  const auto settings = task_settings(cfg);
  report.tasks.resize(plan.tasks.size());
  detail::parallel_for(plan.tasks.size(), cfg.parallelism, [&](std::size_t i) {
    try {
      report.tasks[i] = run_task(sampled, plan.tasks[i], settings);
    } catch (const ConfigError& e) {
      throw ConfigError("task " + plan.tasks[i].name() + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("task " + plan.tasks[i].name() + ": " + e.what());
    } catch (const std::exception& e) {
      throw Error("task " + plan.tasks[i].name() + ": " + e.what());
    }
  });
  std::size_t accepted = 0;
  for (const auto& t : report.tasks) {
    accepted += t.accepted.size();
    report.guarded_divisions += t.guarded_divisions;
  }
  timer.done("search", std::to_string(plan.tasks.size()) + " tasks, " + std::to_string(accepted) +
                           " accepted features");

  // Merge in (task id, acceptance order); the global pass re-imputes with
  // its own training rows.
  const Split global_split = random_split(sampled.n_rows(), cfg.thresholds.rate_valid, cfg.seed);
  std::vector<NamedColumn> merged;
  std::vector<const AcceptedFeature*> origin;
  std::vector<double> imputations;
  std::unordered_set<std::string> seen;
  for (const auto& t : report.tasks)
    for (const auto& f : t.accepted) {
      if (!seen.insert(f.name).second) continue;
      const double mean = imputation_mean(f.raw, global_split.train);
      std::vector<double> values = f.raw;
      impute(values, mean);
      merged.push_back({f.name, std::move(values)});
      origin.push_back(&f);
      imputations.push_back(mean);
    }
  auto global = global_select(merged, sampled.labels(), cfg.thresholds, cfg.gbdt, cfg.seed);
  report.merged = global.merged;
  report.global = global.result;
  timer.done("global_select", std::to_string(global.result.selected.size()) + " of " +
                                  std::to_string(merged.size()) + " kept");

  auto& tpl = out.feature_template;
  tpl.fingerprint = full.fingerprint();
  tpl.window_open_lower = cfg.window_open_lower;
  for (auto c : global.result.selected) {
    TemplateEntry e;
    e.spec = origin[c]->spec;
    e.name = origin[c]->name;
    e.imputation = imputations[c];
    e.provenance = origin[c]->provenance;
    tpl.entries.push_back(std::move(e));
    report.final_features.push_back(origin[c]->name);
  }
  tpl.validate(full.schema());
  timer.done("template", std::to_string(tpl.entries.size()) + " features");
  return out;
}

inline RunResult run(const RunConfig& cfg, const StageLog& log = {}) {
  if (cfg.data_path.empty()) throw ConfigError("no data path configured");
  const auto full = load_csv(cfg.data_path, cfg.schema, cfg.csv);
  return run(cfg, full, log);
}

inline FeatureMatrix transform(const Dataset& full, const FeatureTemplate& tpl, std::size_t threads = 1) {
  return apply_template(full, tpl, threads);
}

/// Dense 0/1 encoding of every categorical field, columns named
/// `field=value` in field then dictionary-code order.
inline FeatureMatrix one_hot_matrix(const Dataset& d) {
  FeatureMatrix out;
  out.n_rows = d.n_rows();
  for (std::size_t f = 0; f < d.n_fields(); ++f) {
    const auto codes = d.codes(f);
    const auto& dict = *d.field(f).dictionary;
    for (std::size_t c = 0; c < dict.size(); ++c) {
      std::vector<double> col(d.n_rows(), 0.0);
      for (std::size_t r = 0; r < codes.size(); ++r)
        if (codes[r] == c) col[r] = 1.0;
      out.add(d.schema().categorical_fields[f] + "=" + dict.decode(static_cast<std::uint32_t>(c)),
              std::move(col));
    }
  }
  return out;
}

enum class ModelKind { Lr, Gbdt };

struct EvaluationSplit {
  std::vector<std::size_t> train, valid, test;
};

inline EvaluationSplit evaluation_split(const Dataset& d, const EvaluationConfig& ev) {
  Split outer;
  switch (ev.split) {
    case TestSplit::LastWindow:
      outer = split_last_window(d, ev.test_duration);
      break;
    case TestSplit::TimeFraction:
      outer = split_indices(d, ev.test_fraction, ev.seed, true);
      break;
    case TestSplit::Random:
      outer = random_split(d.n_rows(), ev.test_fraction, ev.seed);
      break;
  }
  const auto inner = random_split(outer.train.size(), ev.valid_rate, mix_seed(ev.seed, 1));
  EvaluationSplit s;
  for (auto i : inner.train) s.train.push_back(outer.train[i]);
  for (auto i : inner.valid) s.valid.push_back(outer.train[i]);
  s.test = std::move(outer.valid);
  return s;
}

struct EvaluationResult {
  ModelKind kind = ModelKind::Lr;
  std::vector<std::string> columns;
  double auc_train = 0.5, auc_valid = 0.5, auc_test = 0.5;
  std::optional<double> baseline_auc;
  std::optional<double> rela_impr;
  std::size_t n_train = 0, n_valid = 0, n_test = 0;
  /// Normalized gain for GBDT, normalized |standardized weight| for LR.
  std::vector<double> importances;
  std::variant<LrModel, GbdtModel> model;
};

/// Trains one learner on `features` (plus the one-hot raw fields when
/// configured) and scores it on train, validation and test rows.
inline EvaluationResult train_and_evaluate(const FeatureMatrix& features, const Dataset& d, ModelKind kind,
                                           const RunConfig& cfg) {
  if (features.n_cols() > 0 && features.n_rows != d.n_rows())
    throw DataError("feature file has " + std::to_string(features.n_rows) + " rows but the data has " +
                    std::to_string(d.n_rows()));
  FeatureMatrix x = features;
  x.n_rows = d.n_rows();
  if (cfg.evaluation.include_raw) {
    auto raw = one_hot_matrix(d);
    for (std::size_t c = 0; c < raw.n_cols(); ++c) x.add(raw.names[c], std::move(raw.columns[c]));
  }
  if (x.n_cols() == 0) throw DataError("there are no feature columns to train on");
  for (const auto& col : x.columns)
    for (double v : col)
      if (!std::isfinite(v)) throw DataError("feature matrix contains non-finite values");

  const auto split = evaluation_split(d, cfg.evaluation);
  const auto y = d.labels();
  auto part = [&](const std::vector<std::size_t>& rows) { return x.rows(rows); };
  const auto xtr = part(split.train), xva = part(split.valid), xte = part(split.test);
  const auto ytr = detail::gather(y, split.train), yva = detail::gather(y, split.valid),
             yte = detail::gather(y, split.test);

  EvaluationResult out;
  out.kind = kind;
  out.columns = x.names;
  out.n_train = split.train.size();
  out.n_valid = split.valid.size();
  out.n_test = split.test.size();
  auto score = [&](const auto& model) {
    out.auc_train = auc(ytr, model.predict_margin(xtr.view()));
    out.auc_valid = auc(yva, model.predict_margin(xva.view()));
    out.auc_test = auc(yte, model.predict_margin(xte.view()));
  };
  if (kind == ModelKind::Lr) {
    auto model = train_lr(xtr.view(), ytr, cfg.lr);
    score(model);
    double total = 0.0;
    for (double w : model.weights) total += std::abs(w);
    out.importances.assign(model.weights.size(), 0.0);
    if (total > 0)
      for (std::size_t c = 0; c < model.weights.size(); ++c) out.importances[c] = std::abs(model.weights[c]) / total;
    out.model = std::move(model);
  } else {
    auto model = train_gbdt(xtr.view(), ytr, cfg.gbdt);
    score(model);
    out.importances = model.importances;
    out.model = std::move(model);
  }
  out.baseline_auc = cfg.evaluation.baseline_auc;
  if (out.baseline_auc) out.rela_impr = rela_impr(out.auc_test, *out.baseline_auc);
  return out;
}

}  // namespace aefe
