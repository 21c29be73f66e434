#pragma once

// Interpretability and sampling-study outputs: combination-strength
// matrices, deviation of weight gaps, search curves and AUC tables.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "aefe/construct.hpp"
#include "aefe/dataset.hpp"
#include "aefe/error.hpp"
#include "aefe/fm.hpp"
#include "aefe/gbdt.hpp"
#include "aefe/metrics.hpp"
#include "aefe/search.hpp"

namespace aefe {

enum class CsMethod { Aefe, Fm };

inline std::string_view to_string(CsMethod m) { return m == CsMethod::Aefe ? "AEFE" : "FM"; }

struct CsMatrix {
  CsMethod method = CsMethod::Aefe;
  std::vector<std::string> fields;
  PairMatrix values;
  /// Weight of single-field features, per field (AEFE only).
  std::vector<double> single;

  double total() const {
    double s = 0.0;
    for (std::size_t i = 0; i < values.m; ++i)
      for (std::size_t j = i + 1; j < values.m; ++j) s += values(i, j);
    return s;
  }
};

/// Accumulates each template feature's importance into the cell of its
/// field pair. `model_columns` names the columns the model was trained on;
/// columns outside the template are ignored.
inline CsMatrix cs_aefe(const GbdtModel& model, const std::vector<std::string>& model_columns,
                        const FeatureTemplate& tpl, const Schema& schema) {
  if (model_columns.size() != model.importances.size())
    throw DataError("model column names do not match the model's feature count");
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < model_columns.size(); ++c) index.emplace(model_columns[c], c);
  CsMatrix out;
  out.method = CsMethod::Aefe;
  out.fields = schema.categorical_fields;
  out.values = PairMatrix(schema.n_fields());
  out.single.assign(schema.n_fields(), 0.0);
  for (const auto& e : tpl.entries) {
    auto it = index.find(e.name);
    if (it == index.end()) throw DataError("template feature '" + e.name + "' is not a model column");
    const double w = model.importances[it->second];
    if (e.spec.q) {
      const auto p = e.spec.p, q = *e.spec.q;
      out.values.set(p, q, out.values(p, q) + w);
    } else {
      out.single[e.spec.p] += w;
    }
  }
  return out;
}

/// |mean embedding of field i . mean embedding of field j|, diagonal 0.
inline CsMatrix cs_fm(const FmModel& fm, const Schema& schema) {
  const std::size_t m = fm.offsets.size();
  if (m != schema.n_fields()) throw DataError("FM model and schema disagree on the field count");
  std::vector<std::vector<double>> mean(m, std::vector<double>(fm.k, 0.0));
  for (std::size_t f = 0; f < m; ++f) {
    const auto card = fm.cardinalities[f];
    for (std::size_t c = 0; c < card; ++c) {
      const auto e = fm.embedding(fm.offsets[f] + c);
      for (std::size_t t = 0; t < fm.k; ++t) mean[f][t] += e[t];
    }
    if (card)
      for (auto& v : mean[f]) v /= static_cast<double>(card);
  }
  CsMatrix out;
  out.method = CsMethod::Fm;
  out.fields = schema.categorical_fields;
  out.values = PairMatrix(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) out.values.set(i, j, std::abs(dot(mean[i], mean[j])));
  return out;
}

/// Share of off-diagonal cells below 10% of the largest cell.
inline double sparsity(const CsMatrix& cs) {
  double hi = 0.0;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < cs.values.m; ++i)
    for (std::size_t j = i + 1; j < cs.values.m; ++j) {
      hi = std::max(hi, cs.values(i, j));
      ++cells;
    }
  if (cells == 0) return 0.0;
  std::size_t low = 0;
  for (std::size_t i = 0; i < cs.values.m; ++i)
    for (std::size_t j = i + 1; j < cs.values.m; ++j) low += cs.values(i, j) < 0.1 * hi;
  return static_cast<double>(low) / static_cast<double>(cells);
}

inline constexpr double kDowgEpsilon = 1e-30;

/// |(|w_i^s - w_j^s| - |w_i^1 - w_j^1|) / (w_i^1 - w_j^1 + eps)|. The
/// denominator keeps its sign.
inline double dowg(double wi_s, double wj_s, double wi_full, double wj_full) {
  return std::abs((std::abs(wi_s - wj_s) - std::abs(wi_full - wj_full)) / (wi_full - wj_full + kDowgEpsilon));
}

inline std::vector<double> dowg(std::span<const double> weights_s, std::span<const double> weights_full,
                                std::span<const std::pair<std::size_t, std::size_t>> pairs) {
  if (weights_s.size() != weights_full.size()) throw DataError("importance vectors differ in length");
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& [i, j] : pairs) out.push_back(dowg(weights_s[i], weights_s[j], weights_full[i], weights_full[j]));
  return out;
}

/// The first, the two trisection and the last feature by descending
/// importance (ties by index).
inline std::array<std::size_t, 4> quartile_features(std::span<const double> importances) {
  if (importances.size() < 4) throw DataError("the sampling study needs at least four features");
  std::vector<std::size_t> order(importances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return importances[a] > importances[b]; });
  const std::size_t last = order.size() - 1;
  return {order[0], order[(last + 1) / 3], order[(2 * last + 1) / 3], order[last]};
}

struct DowgRow {
  double rate = 1.0;
  std::size_t repeat = 0;
  /// Positions among the four study features (0 = most important).
  std::size_t first = 0;
  std::size_t second = 0;
  double value = 0.0;
};

struct DowgStudyConfig {
  std::vector<double> rates{0.05, 0.1, 0.2, 0.5, 1.0};
  std::size_t repeats = 10;
  std::uint64_t seed = 1;
  GbdtConfig gbdt;
};

/// Trains on row samples at each rate and compares the importance gaps of
/// the four study features with the full-data run.
inline std::vector<DowgRow> dowg_study(const ColumnSet& x, std::span<const std::uint8_t> y,
                                       const DowgStudyConfig& cfg) {
  const auto full = train_gbdt(x, y, cfg.gbdt).importances;
  const auto f = quartile_features(full);
  std::vector<DowgRow> out;
  for (std::size_t ri = 0; ri < cfg.rates.size(); ++ri) {
    const double rate = cfg.rates[ri];
    if (!(rate > 0 && rate <= 1)) throw ConfigError("study rates must lie in (0, 1]");
    for (std::size_t rep = 0; rep < cfg.repeats; ++rep) {
      std::vector<double> w = full;
      if (rate < 1.0) {
        const auto n = y.size();
        const auto k = static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::mt19937_64 rng(cfg.seed + 1000003ULL * ri + rep);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(k);
        std::sort(idx.begin(), idx.end());
        std::vector<std::size_t> all(x.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        const auto xs = detail::gather(x, all, idx);
        w = train_gbdt(ColumnSet(xs.begin(), xs.end()), detail::gather(y, idx), cfg.gbdt).importances;
      }
      for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = a + 1; b < 4; ++b)
          out.push_back({rate, rep, a, b, dowg(w[f[a]], w[f[b]], full[f[a]], full[f[b]])});
    }
  }
  return out;
}

struct SearchCurve {
  std::string task;
  std::vector<IterationRecord> history;
  bool early_stop = false;
};

struct RelaImprRow {
  std::string model;
  double auc = 0.5;
  double baseline = 0.5;
};

struct AnalysisArtifacts {
  std::optional<CsMatrix> cs_aefe;
  std::optional<CsMatrix> cs_fm;
  std::vector<DowgRow> dowg;
  std::vector<SearchCurve> curves;
  std::vector<RelaImprRow> rela_impr;
};

namespace detail {

inline std::ofstream open_report(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

inline void write_cs(const std::filesystem::path& path, const CsMatrix& cs) {
  auto out = open_report(path);
  out << "field";
  for (const auto& f : cs.fields) out << ',' << quote_cell(f, ',');
  out << '\n';
  for (std::size_t i = 0; i < cs.values.m; ++i) {
    out << quote_cell(cs.fields[i], ',');
    for (std::size_t j = 0; j < cs.values.m; ++j) out << ',' << format_double(cs.values(i, j));
    out << '\n';
  }
}

}  // namespace detail

/// Writes every present artifact as a delimited file under `dir` and
/// returns the written file names.
inline std::vector<std::string> emit_reports(const AnalysisArtifacts& a, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;
  for (const auto* cs : {a.cs_aefe ? &*a.cs_aefe : nullptr, a.cs_fm ? &*a.cs_fm : nullptr}) {
    if (!cs) continue;
    const std::string stem = cs->method == CsMethod::Aefe ? "cs_aefe" : "cs_fm";
    detail::write_cs(dir / (stem + ".csv"), *cs);
    written.push_back(stem + ".csv");
    if (cs->method == CsMethod::Aefe) {
      auto out = detail::open_report(dir / "cs_aefe_single.csv");
      out << "field,weight\n";
      for (std::size_t i = 0; i < cs->fields.size(); ++i)
        out << detail::quote_cell(cs->fields[i], ',') << ',' << detail::format_double(cs->single[i]) << '\n';
      written.push_back("cs_aefe_single.csv");
    }
  }
  {
    auto out = detail::open_report(dir / "sparsity.csv");
    out << "method,fraction_below_10pct_of_max\n";
    for (const auto* cs : {a.cs_aefe ? &*a.cs_aefe : nullptr, a.cs_fm ? &*a.cs_fm : nullptr})
      if (cs) out << to_string(cs->method) << ',' << detail::format_double(sparsity(*cs)) << '\n';
    written.push_back("sparsity.csv");
  }
  {
    auto out = detail::open_report(dir / "dowg.csv");
    out << "rate,repeat,feature_i,feature_j,dowg\n";
    for (const auto& r : a.dowg)
      out << detail::format_double(r.rate) << ',' << r.repeat << ",F" << (r.first + 1) << ",F" << (r.second + 1)
          << ',' << detail::format_double(r.value) << '\n';
    written.push_back("dowg.csv");
  }
  {
    auto out = detail::open_report(dir / "search_curves.csv");
    out << "task,iteration,field_i,field_j,n_generated,n_valid,predicted,realized,score,score_max,stop\n";
    for (const auto& c : a.curves)
      for (std::size_t k = 0; k < c.history.size(); ++k) {
        const auto& h = c.history[k];
        const bool last = k + 1 == c.history.size();
        out << detail::quote_cell(c.task, ',') << ',' << h.iteration << ',' << h.first << ',' << h.second << ','
            << h.n_generated << ',' << h.n_valid << ',' << detail::format_double(h.predicted) << ','
            << detail::format_double(h.realized) << ',' << detail::format_double(h.score) << ','
            << detail::format_double(h.score_max) << ','
            << (last ? (c.early_stop ? "early_stop" : "exhausted") : "") << '\n';
      }
    written.push_back("search_curves.csv");
  }
  {
    auto out = detail::open_report(dir / "rela_impr.csv");
    out << "model,auc,baseline_auc,rela_impr_percent\n";
    for (const auto& r : a.rela_impr) {
      out << detail::quote_cell(r.model, ',') << ',' << detail::format_double(r.auc) << ','
          << detail::format_double(r.baseline) << ',';
      if (r.baseline != 0.5) out << detail::format_double(rela_impr(r.auc, r.baseline));
      out << '\n';
    }
    written.push_back("rela_impr.csv");
  }
  return written;
}

}  // namespace aefe
