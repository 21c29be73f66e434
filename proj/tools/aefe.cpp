// aefe: command-line front end.
//
//   aefe inspect   --config c.yaml [--out DIR]
//   aefe search    --config c.yaml [--out DIR] [--seed N] [--set k=v]... [--parallelism N]
//   aefe transform --config c.yaml [--template FILE] [--out DIR]
//   aefe train     --config c.yaml [--features FILE] [--model lr|gbdt] [--baseline-auc X]
//   aefe analyze   --config c.yaml [--template FILE] [--report FILE] [--out DIR]
//
// Exit codes: 0 success, 1 configuration or usage error, 2 data error,
// 3 runtime failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "aefe/aefe.hpp"

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string out = "aefe_out";
  std::string data;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::optional<std::size_t> parallelism;
  bool window_open_lower = false;
  std::string template_path;
  std::string report_path;
  std::string features_path;
  std::string model = "lr";
  std::optional<double> baseline_auc;
};

void add_common(CLI::App* cmd, Options& o, bool config_required = true) {
  auto* c = cmd->add_option("--config", o.config, "YAML run configuration");
  if (config_required) c->required();
  cmd->add_option("--out", o.out, "output directory")->capture_default_str();
  cmd->add_option("--data", o.data, "data file (overrides data.path)");
  cmd->add_option("--seed", o.seed, "sampling seed (overrides sampling.seed)");
  cmd->add_option("--set", o.overrides, "override a config key, section.key=value")->allow_extra_args(false);
  cmd->add_option("--parallelism", o.parallelism, "worker threads (overrides run.parallelism)");
  cmd->add_flag("--window-open-lower", o.window_open_lower, "exclude the lower window boundary");
}

aefe::RunConfig load(const Options& o) {
  auto overrides = o.overrides;
  if (!o.data.empty()) overrides.push_back("data.path=\"" + o.data + "\"");
  if (o.seed) overrides.push_back("sampling.seed=" + std::to_string(*o.seed));
  if (o.parallelism) overrides.push_back("run.parallelism=" + std::to_string(*o.parallelism));
  if (o.window_open_lower) overrides.push_back("construction.window_open_lower=true");
  auto cfg = aefe::load_config(o.config, overrides);
  if (cfg.data_path.empty()) throw aefe::ConfigError("no data file given (data.path or --data)");
  return cfg;
}

aefe::Dataset load_data(const aefe::RunConfig& cfg) {
  auto d = aefe::load_csv(cfg.data_path, cfg.schema, cfg.csv);
  spdlog::info("loaded {} rows from {}", d.n_rows(), cfg.data_path);
  return d;
}

std::string in_out(const Options& o, const std::string& given, const std::string& fallback) {
  return given.empty() ? (fs::path(o.out) / fallback).string() : given;
}

int inspect(const Options& o) {
  const auto cfg = load(o);
  const auto d = load_data(cfg);
  aefe::Json fields = aefe::Json::array();
  for (std::size_t f = 0; f < d.n_fields(); ++f)
    fields.push_back({{"name", cfg.schema.categorical_fields[f]}, {"cardinality", d.cardinality(f)}});
  aefe::Json profile{{"rows", d.n_rows()},
                     {"positive_rate", d.positive_rate()},
                     {"fingerprint", d.fingerprint()},
                     {"fields", fields},
                     {"label", cfg.schema.label},
                     {"timestamp", cfg.schema.timestamp ? aefe::Json(*cfg.schema.timestamp) : aefe::Json(nullptr)}};
  if (d.has_timestamps() && d.n_rows()) {
    auto ts = d.timestamps();
    profile["timestamp_range"] = {*std::min_element(ts.begin(), ts.end()), *std::max_element(ts.begin(), ts.end())};
  }
  const auto space = aefe::count_search_space(cfg.schema, cfg.indicators(), cfg.operators, cfg.construction);
  profile["search_space"] = {{"nominal", space.nominal}, {"enumerated", space.enumerated}};
  profile["tasks"] = aefe::plan_tasks(cfg).tasks.size();
  fs::create_directories(o.out);
  aefe::write_json((fs::path(o.out) / "inspect.json").string(), profile);
  spdlog::info("rows={} positive_rate={:.4f} fields={} search_space={} (enumerated {})", d.n_rows(),
               d.positive_rate(), d.n_fields(), space.nominal, space.enumerated);
  return 0;
}

int search(const Options& o) {
  const auto cfg = load(o);
  const auto d = load_data(cfg);
  auto result = aefe::run(cfg, d, [](const std::string& stage, double seconds, const std::string& info) {
    spdlog::info("stage={} seconds={:.3f} {}", stage, seconds, info);
  });
  fs::create_directories(o.out);
  aefe::write_json((fs::path(o.out) / "template.json").string(), aefe::to_json(result.feature_template, cfg.schema));
  aefe::write_json((fs::path(o.out) / "report.json").string(), aefe::to_json(result.report, cfg.schema));
  spdlog::info("wrote {} features to {}", result.feature_template.entries.size(),
               (fs::path(o.out) / "template.json").string());
  return 0;
}

int transform(const Options& o) {
  const auto cfg = load(o);
  const auto d = load_data(cfg);
  const auto tpl = aefe::load_template(in_out(o, o.template_path, "template.json"), cfg.schema);
  const auto m = aefe::transform(d, tpl, cfg.parallelism);
  fs::create_directories(o.out);
  const auto path = fs::path(o.out) / "features.csv";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw aefe::Error("cannot write '" + path.string() + "'");
  aefe::write_feature_matrix(out, m);
  spdlog::info("wrote {} rows x {} features to {}", m.n_rows, m.n_cols(), path.string());
  return 0;
}

aefe::FeatureMatrix read_features(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw aefe::DataError("cannot open features file '" + path + "'");
  return aefe::read_feature_matrix(in);
}

int train(const Options& o) {
  auto cfg = load(o);
  if (o.baseline_auc) cfg.evaluation.baseline_auc = *o.baseline_auc;
  const auto d = load_data(cfg);
  aefe::FeatureMatrix features;
  if (!o.features_path.empty()) features = read_features(o.features_path);
  const auto kind = o.model == "gbdt" ? aefe::ModelKind::Gbdt : aefe::ModelKind::Lr;
  const auto r = aefe::train_and_evaluate(features, d, kind, cfg);
  fs::create_directories(o.out);
  aefe::write_json((fs::path(o.out) / ("eval_" + o.model + ".json")).string(), aefe::to_json(r));
  aefe::write_json((fs::path(o.out) / ("model_" + o.model + ".json")).string(), aefe::model_json(r));
  spdlog::info("model={} auc_train={:.5f} auc_valid={:.5f} auc_test={:.5f}", o.model, r.auc_train, r.auc_valid,
               r.auc_test);
  if (r.rela_impr) spdlog::info("rela_impr={:.2f}% vs baseline {:.5f}", *r.rela_impr, *r.baseline_auc);
  return 0;
}

int analyze(const Options& o) {
  const auto cfg = load(o);
  const auto d = load_data(cfg);
  const auto tpl = aefe::load_template(in_out(o, o.template_path, "template.json"), cfg.schema);
  aefe::AnalysisArtifacts a;

  const auto report_path = in_out(o, o.report_path, "report.json");
  if (fs::exists(report_path)) a.curves = aefe::curves_from_report(aefe::read_json(report_path));
  else spdlog::warn("no report at {}; search curves will be empty", report_path);

  const auto features = aefe::transform(d, tpl, cfg.parallelism);
  const auto split = aefe::evaluation_split(d, cfg.evaluation);
  const auto y = d.labels();
  const auto ytr = aefe::detail::gather(y, split.train);

  if (features.n_cols() > 0) {
    const auto xtr = features.rows(split.train);
    const auto gbdt = aefe::train_gbdt(xtr.view(), ytr, cfg.gbdt);
    a.cs_aefe = aefe::cs_aefe(gbdt, features.names, tpl, cfg.schema);
    if (features.n_cols() >= 4) {
      aefe::DowgStudyConfig study;
      study.seed = cfg.seed;
      study.gbdt = cfg.gbdt;
      a.dowg = aefe::dowg_study(xtr.view(), ytr, study);
    } else {
      spdlog::warn("template has {} features; the sampling study needs 4", features.n_cols());
    }
  }
  const auto train_rows = d.take(split.train);
  a.cs_fm = aefe::cs_fm(aefe::train_fm(train_rows, cfg.fm), cfg.schema);

  auto eval_cfg = cfg;
  for (auto kind : {aefe::ModelKind::Lr, aefe::ModelKind::Gbdt}) {
    eval_cfg.evaluation.include_raw = true;
    const auto base = aefe::train_and_evaluate(aefe::FeatureMatrix{}, d, kind, eval_cfg);
    const auto with = aefe::train_and_evaluate(features, d, kind, eval_cfg);
    const std::string name = kind == aefe::ModelKind::Lr ? "LR" : "GBDT";
    a.rela_impr.push_back({name, base.auc_test, base.auc_test});
    a.rela_impr.push_back({"AEFE+" + name, with.auc_test, base.auc_test});
  }
  const auto dir = fs::path(o.out) / "analysis";
  for (const auto& f : aefe::emit_reports(a, dir)) spdlog::info("wrote {}", (dir / f).string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_st("aefe");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("%Y-%m-%dT%H:%M:%S.%e %l %v");

  CLI::App app{"Automatic feature engineering for categorical click logs"};
  app.require_subcommand(1);
  Options o;
  auto* c_inspect = app.add_subcommand("inspect", "profile the schema, cardinalities and positive rate");
  add_common(c_inspect, o);
  auto* c_search = app.add_subcommand("search", "search for effective combinatorial features");
  add_common(c_search, o);
  auto* c_transform = app.add_subcommand("transform", "apply a template to the full data");
  add_common(c_transform, o);
  c_transform->add_option("--template", o.template_path, "template file (default OUT/template.json)");
  auto* c_train = app.add_subcommand("train", "train and evaluate LR or GBDT");
  add_common(c_train, o);
  c_train->add_option("--features", o.features_path, "features file; omitted trains on raw fields only");
  c_train->add_option("--model", o.model, "lr or gbdt")->check(CLI::IsMember({"lr", "gbdt"}));
  c_train->add_option("--baseline-auc", o.baseline_auc, "baseline AUC for RelaImpr");
  auto* c_analyze = app.add_subcommand("analyze", "combination strength, sampling study and curves");
  add_common(c_analyze, o);
  c_analyze->add_option("--template", o.template_path, "template file (default OUT/template.json)");
  c_analyze->add_option("--report", o.report_path, "report file (default OUT/report.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (c_inspect->parsed()) return inspect(o);
    if (c_search->parsed()) return search(o);
    if (c_transform->parsed()) return transform(o);
    if (c_train->parsed()) return train(o);
    if (c_analyze->parsed()) return analyze(o);
  } catch (const aefe::Error& e) {
    spdlog::error("{}", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 3;
  }
  return 1;
}
