#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ontomap/prediction.hpp"

namespace ontomap {

enum class BacktestMethod { me_avg, me_w2, ie_w2 };

inline std::string_view backtest_method_label(BacktestMethod m) {
  switch (m) {
    case BacktestMethod::me_avg: return "ME-avg";
    case BacktestMethod::me_w2: return "ME-w2";
    default: return "IE-w2";
  }
}

inline BacktestMethod backtest_method_from_label(std::string_view label) {
  if (label == "ME-avg" || label == "me_avg" || label == "me-avg")
    return BacktestMethod::me_avg;
  if (label == "ME-w2" || label == "me_w2" || label == "me-w2")
    return BacktestMethod::me_w2;
  if (label == "IE-w2" || label == "ie_w2" || label == "ie-w2")
    return BacktestMethod::ie_w2;
  throw ConfigError("unknown prediction method '" + std::string(label) + "'");
}

// Precomputed change statistics for one scenario/matcher version series:
// one TransitionRecord per version transition plus the mapping size of each
// transition's target version (the err denominator).
struct BacktestSeries {
  std::string scenario;
  std::string matcher;
  std::vector<TransitionRecord> transitions;
  std::vector<std::size_t> target_mapping_sizes;
};

// Raw inputs for one series: aligned version snapshots of both ontologies
// and the mapping computed per version.
struct RawBacktestSeries {
  std::string scenario;
  std::vector<OntologyVersion> o1_versions;
  std::vector<OntologyVersion> o2_versions;
  std::vector<Mapping> mappings;
};

inline TransitionRecord make_transition_record(const DiffResult& d1,
                                               const DiffResult& d2,
                                               const MappingDiff& md) {
  TransitionRecord t;
  t.add_count = static_cast<double>(md.add_set.size());
  t.del_count = static_cast<double>(md.del_set.size());
  ImpactMatrix im = impact_matrix(d1, d2, md);
  t.ext_count = static_cast<double>(im.cell(OntologyChangeClass::ext,
                                            MappingChangeClass::add).total);
  t.red_count = static_cast<double>(im.cell(OntologyChangeClass::red,
                                            MappingChangeClass::add).total);
  t.rev_count = static_cast<double>(im.cell(OntologyChangeClass::rev,
                                            MappingChangeClass::add).total);
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t k = 0; k < 2; ++k)
      t.ir[o][k] = im.cells[o][k].ratio;
  return t;
}

inline BacktestSeries build_series_stats(std::string scenario,
                                         std::string matcher,
                                         const std::vector<DiffResult>& o1_diffs,
                                         const std::vector<DiffResult>& o2_diffs,
                                         const std::vector<Mapping>& mappings) {
  if (mappings.size() < 2)
    throw DataError("a series needs at least two mapping versions");
  if (o1_diffs.size() != mappings.size() - 1 ||
      o2_diffs.size() != mappings.size() - 1)
    throw DataError("diff series lengths do not match the mapping series");
  BacktestSeries s;
  s.scenario = std::move(scenario);
  s.matcher = std::move(matcher);
  for (std::size_t i = 0; i + 1 < mappings.size(); ++i) {
    MappingDiff md = mapping_diff(mappings[i], mappings[i + 1]);
    s.transitions.push_back(
        make_transition_record(o1_diffs[i], o2_diffs[i], md));
    s.target_mapping_sizes.push_back(mappings[i + 1].size());
  }
  return s;
}

inline BacktestSeries build_series_stats(const RawBacktestSeries& raw,
                                         const std::string& matcher) {
  if (raw.o1_versions.size() != raw.mappings.size() ||
      raw.o2_versions.size() != raw.mappings.size())
    throw DataError("ontology and mapping series lengths differ");
  std::vector<DiffResult> d1, d2;
  for (std::size_t i = 0; i + 1 < raw.o1_versions.size(); ++i) {
    d1.push_back(compute_diff(raw.o1_versions[i], raw.o1_versions[i + 1]));
    d2.push_back(compute_diff(raw.o2_versions[i], raw.o2_versions[i + 1]));
  }
  return build_series_stats(raw.scenario, matcher, d1, d2, raw.mappings);
}

struct BacktestOptions {
  std::vector<std::size_t> h_range = {2, 3, 4, 5};
  std::size_t targets = 5;
  std::vector<BacktestMethod> methods = {BacktestMethod::me_avg,
                                         BacktestMethod::me_w2,
                                         BacktestMethod::ie_w2};
};

struct PredictionRow {
  std::string scenario;
  std::string matcher;
  BacktestMethod method = BacktestMethod::me_avg;
  std::size_t h = 0;
  int target_version = 0;  // the predicted version number
  long long cr_add = 0;
  long long cr_del = 0;
  long long pr_add = 0;
  long long pr_del = 0;
  double err_add = 0;
  double err_del = 0;
  std::size_t target_mapping_size = 0;

  long long abs_error() const {
    return std::llabs(cr_add - pr_add) + std::llabs(cr_del - pr_del);
  }
};

struct MethodSummary {
  BacktestMethod method = BacktestMethod::me_avg;
  std::size_t h = 0;
  double err_sum = 0;
  double avg_err_sum = 0;
  std::size_t predictions = 0;
};

struct EvaluationReport {
  std::vector<PredictionRow> rows;
  std::vector<MethodSummary> summaries;
  std::vector<std::size_t> h_range;
  std::size_t targets = 0;
};

namespace detail {

inline double error_rate(long long pr, long long cr, std::size_t mapping_size) {
  long long diff = std::llabs(pr - cr);
  if (diff == 0) return 0.0;
  if (mapping_size == 0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(diff) / static_cast<double>(mapping_size);
}

}  // namespace detail

// Sliding-window back-test: for each of the last `targets` transitions and
// each window size h, predict the transition from the h preceding versions
// and compare against the observed mapping diff. err_sum aggregates the
// absolute CR/PR differences of every prediction for a (method, h) pair
// across all series; avg_err_sum averages it over the prediction targets.
inline EvaluationReport run_backtest(std::span<const BacktestSeries> series,
                                     const BacktestOptions& options) {
  if (series.empty()) throw DataError("no series supplied");
  if (options.h_range.empty()) throw DataError("empty h range");
  if (options.targets == 0) throw DataError("no prediction targets requested");

  std::vector<std::size_t> h_range = options.h_range;
  std::sort(h_range.begin(), h_range.end());
  h_range.erase(std::unique(h_range.begin(), h_range.end()), h_range.end());
  if (h_range.front() < 2) throw ConfigError("window size h must be >= 2");
  std::size_t max_h = h_range.back();

  EvaluationReport report;
  report.h_range = h_range;
  report.targets = options.targets;

  for (const auto& s : series) {
    std::size_t versions = s.transitions.size() + 1;
    if (versions < max_h + options.targets)
      throw DataError(
          "series '" + s.scenario + "/" + s.matcher + "' has " +
          std::to_string(versions) + " versions but h=" +
          std::to_string(max_h) + " with " + std::to_string(options.targets) +
          " targets needs at least " +
          std::to_string(max_h + options.targets));

    std::size_t first_target = s.transitions.size() - options.targets;
    for (BacktestMethod method : options.methods) {
      for (std::size_t h : h_range) {
        for (std::size_t t = first_target; t < s.transitions.size(); ++t) {
          EvolutionHistory history;
          history.transitions.assign(
              s.transitions.begin() + static_cast<std::ptrdiff_t>(t - (h - 1)),
              s.transitions.begin() + static_cast<std::ptrdiff_t>(t));
          history.current.ext_count = s.transitions[t].ext_count;
          history.current.red_count = s.transitions[t].red_count;
          history.current.rev_count = s.transitions[t].rev_count;

          Prediction p;
          switch (method) {
            case BacktestMethod::me_avg:
              p = me_predict(history,
                             make_weights(history.transitions.size(),
                                          WeightKind::avg));
              break;
            case BacktestMethod::me_w2:
              p = me_predict(history,
                             make_weights(history.transitions.size(),
                                          WeightKind::quadratic));
              break;
            case BacktestMethod::ie_w2:
              p = ie_predict(history,
                             make_weights(history.transitions.size(),
                                          WeightKind::quadratic));
              break;
          }

          PredictionRow row;
          row.scenario = s.scenario;
          row.matcher = s.matcher;
          row.method = method;
          row.h = h;
          row.target_version = static_cast<int>(t + 2);  // versions are 1-based
          row.cr_add = std::llround(s.transitions[t].add_count);
          row.cr_del = std::llround(s.transitions[t].del_count);
          row.pr_add = p.add_rounded;
          row.pr_del = p.del_rounded;
          row.target_mapping_size = s.target_mapping_sizes[t];
          row.err_add =
              detail::error_rate(row.pr_add, row.cr_add, row.target_mapping_size);
          row.err_del =
              detail::error_rate(row.pr_del, row.cr_del, row.target_mapping_size);
          report.rows.push_back(std::move(row));
        }
      }
    }
  }

  std::sort(report.rows.begin(), report.rows.end(),
            [](const PredictionRow& a, const PredictionRow& b) {
              return std::tie(a.scenario, a.matcher, a.method, a.h,
                              a.target_version) <
                     std::tie(b.scenario, b.matcher, b.method, b.h,
                              b.target_version);
            });

  for (BacktestMethod method : options.methods) {
    for (std::size_t h : h_range) {
      MethodSummary sum;
      sum.method = method;
      sum.h = h;
      for (const auto& row : report.rows) {
        if (row.method != method || row.h != h) continue;
        sum.err_sum += static_cast<double>(row.abs_error());
        ++sum.predictions;
      }
      sum.avg_err_sum = options.targets
                            ? sum.err_sum / static_cast<double>(options.targets)
                            : 0.0;
      report.summaries.push_back(sum);
    }
  }
  std::sort(report.summaries.begin(), report.summaries.end(),
            [](const MethodSummary& a, const MethodSummary& b) {
              return std::tie(a.method, a.h) < std::tie(b.method, b.h);
            });
  return report;
}

inline EvaluationReport run_backtest(std::span<const RawBacktestSeries> raw,
                                     const BacktestOptions& options) {
  std::vector<BacktestSeries> stats;
  for (const auto& r : raw) {
    if (r.mappings.empty()) throw DataError("series without mappings");
    stats.push_back(build_series_stats(r, r.mappings.front().config.label()));
  }
  return run_backtest(std::span<const BacktestSeries>(stats), options);
}

// --- report rendering ---------------------------------------------------------

namespace detail {

inline std::string format_ratio(double err) {
  if (std::isinf(err)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", err);
  return buf;
}

inline std::string format_avg(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace detail

inline std::string report_detail_tsv(const EvaluationReport& report) {
  std::ostringstream os;
  os << "scenario\tmatcher\tmethod\th\ttarget\tCR_add\tPR_add\tCR_del\tPR_del"
        "\terr_add\terr_del\n";
  for (const auto& r : report.rows) {
    os << r.scenario << '\t' << r.matcher << '\t'
       << backtest_method_label(r.method) << '\t' << r.h << '\t'
       << r.target_version << '\t' << r.cr_add << '\t' << r.pr_add << '\t'
       << r.cr_del << '\t' << r.pr_del << '\t'
       << detail::format_ratio(r.err_add) << '\t'
       << detail::format_ratio(r.err_del) << '\n';
  }
  return os.str();
}

inline std::string report_summary_tsv(const EvaluationReport& report) {
  std::ostringstream os;
  os << "method\th\terr_sum\tavg_err_sum\n";
  for (const auto& s : report.summaries) {
    os << backtest_method_label(s.method) << '\t' << s.h << '\t'
       << static_cast<long long>(s.err_sum) << '\t'
       << detail::format_avg(s.avg_err_sum) << '\n';
  }
  return os.str();
}

inline nlohmann::json to_json(const EvaluationReport& report) {
  nlohmann::json j;
  j["h_range"] = report.h_range;
  j["targets"] = report.targets;
  auto rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back(
        {{"scenario", r.scenario},
         {"matcher", r.matcher},
         {"method", std::string(backtest_method_label(r.method))},
         {"h", r.h},
         {"target", r.target_version},
         {"cr_add", r.cr_add},
         {"pr_add", r.pr_add},
         {"cr_del", r.cr_del},
         {"pr_del", r.pr_del},
         {"err_add", std::isinf(r.err_add) ? nlohmann::json(nullptr)
                                           : nlohmann::json(r.err_add)},
         {"err_del", std::isinf(r.err_del) ? nlohmann::json(nullptr)
                                           : nlohmann::json(r.err_del)},
         {"target_mapping_size", r.target_mapping_size}});
  }
  j["rows"] = std::move(rows);
  auto summaries = nlohmann::json::array();
  for (const auto& s : report.summaries) {
    summaries.push_back({{"method", std::string(backtest_method_label(s.method))},
                         {"h", s.h},
                         {"err_sum", s.err_sum},
                         {"avg_err_sum", s.avg_err_sum},
                         {"predictions", s.predictions}});
  }
  j["summaries"] = std::move(summaries);
  return j;
}

// Per-transition change-ratio time series (one row per matcher and
// transition) for external plotting.
struct ChangeRatioRow {
  std::string scenario;
  std::string matcher;
  int old_version = 0;
  int new_version = 0;
  double ocr_o1 = 0;
  double ocr_o2 = 0;
  double mcr = 0;
};

inline std::string change_ratio_tsv(const std::vector<ChangeRatioRow>& rows) {
  std::ostringstream os;
  os << "scenario\tmatcher\ttransition\tocr_o1\tocr_o2\tmcr\n";
  for (const auto& r : rows) {
    os << r.scenario << '\t' << r.matcher << '\t' << r.old_version << "->"
       << r.new_version << '\t' << detail::format_ratio(r.ocr_o1) << '\t'
       << detail::format_ratio(r.ocr_o2) << '\t'
       << detail::format_ratio(r.mcr) << '\n';
  }
  return os.str();
}

}  // namespace ontomap
