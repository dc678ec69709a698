#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ontomap/mapping_evolution.hpp"

namespace ontomap {

// Aggregated change statistics for one version transition v-1 -> v:
// correspondence change counts, concept change counts combined over both
// ontologies, and the six observed impact ratios (absent where the concept
// class was empty).
struct TransitionRecord {
  double add_count = 0;
  double del_count = 0;
  double ext_count = 0;
  double red_count = 0;
  double rev_count = 0;
  std::array<std::array<std::optional<double>, 2>, 3> ir{};

  std::optional<double>& ir_cell(OntologyChangeClass o, MappingChangeClass m) {
    return ir[static_cast<std::size_t>(o)][static_cast<std::size_t>(m)];
  }
  const std::optional<double>& ir_cell(OntologyChangeClass o,
                                       MappingChangeClass m) const {
    return ir[static_cast<std::size_t>(o)][static_cast<std::size_t>(m)];
  }

  double class_count(OntologyChangeClass o) const {
    switch (o) {
      case OntologyChangeClass::ext: return ext_count;
      case OntologyChangeClass::red: return red_count;
      default: return rev_count;
    }
  }
};

struct CurrentCounts {
  double ext_count = 0;
  double red_count = 0;
  double rev_count = 0;

  double class_count(OntologyChangeClass o) const {
    switch (o) {
      case OntologyChangeClass::ext: return ext_count;
      case OntologyChangeClass::red: return red_count;
      default: return rev_count;
    }
  }
};

// Input window for one prediction: the h-1 observed transitions (oldest
// first) plus the concept-change counts of the transition being predicted.
struct EvolutionHistory {
  std::vector<TransitionRecord> transitions;
  CurrentCounts current;
};

enum class WeightKind { avg, quadratic };

inline std::string_view weight_kind_label(WeightKind k) {
  return k == WeightKind::avg ? "avg" : "quadratic";
}

inline WeightKind weight_kind_from_label(std::string_view label) {
  if (label == "avg") return WeightKind::avg;
  if (label == "quadratic" || label == "w2") return WeightKind::quadratic;
  throw ConfigError("unknown weighting '" + std::string(label) + "'");
}

// Normalized transition weights, oldest first. avg weights uniformly;
// quadratic weights the i-th transition (i = 1 oldest) by i^2.
struct WeightVector {
  WeightKind kind = WeightKind::avg;
  std::vector<double> weights;
};

inline WeightVector make_weights(std::size_t n, WeightKind kind) {
  if (n == 0) throw ConfigError("cannot build weights for an empty history");
  WeightVector w;
  w.kind = kind;
  w.weights.resize(n);
  if (kind == WeightKind::avg) {
    for (auto& x : w.weights) x = 1.0 / static_cast<double>(n);
  } else {
    double denom = 0;
    for (std::size_t i = 1; i <= n; ++i)
      denom += static_cast<double>(i) * static_cast<double>(i);
    for (std::size_t i = 1; i <= n; ++i)
      w.weights[i - 1] =
          static_cast<double>(i) * static_cast<double>(i) / denom;
  }
  return w;
}

enum class PredictionMethod { me, ie };

inline std::string_view prediction_method_label(PredictionMethod m) {
  return m == PredictionMethod::me ? "ME" : "IE";
}

struct Prediction {
  PredictionMethod method = PredictionMethod::me;
  WeightKind weight_kind = WeightKind::avg;
  std::size_t h = 0;  // window size in versions; transitions used = h - 1
  double add_estimate = 0;
  double del_estimate = 0;
  long long add_rounded = 0;
  long long del_rounded = 0;
  std::optional<double> beta_add;
  std::optional<double> beta_del;
  std::optional<std::array<std::array<double, 2>, 3>> aggregated_irs;
  std::array<std::array<bool, 2>, 3> ir_all_undefined{};
  bool add_me_fallback = false;
  bool del_me_fallback = false;
};

namespace detail {

inline void round_estimates(Prediction& p) {
  p.add_rounded = std::llround(p.add_estimate);
  p.del_rounded = std::llround(p.del_estimate);
}

}  // namespace detail

// Weighted average of the previously observed correspondence change counts.
inline Prediction me_predict(const EvolutionHistory& history,
                             const WeightVector& weights) {
  if (history.transitions.empty())
    throw DataError("prediction requires at least one observed transition");
  if (weights.weights.size() != history.transitions.size())
    throw DataError("weight vector length does not match history length");
  Prediction p;
  p.method = PredictionMethod::me;
  p.weight_kind = weights.kind;
  p.h = history.transitions.size() + 1;
  for (std::size_t i = 0; i < history.transitions.size(); ++i) {
    p.add_estimate += weights.weights[i] * history.transitions[i].add_count;
    p.del_estimate += weights.weights[i] * history.transitions[i].del_count;
  }
  detail::round_estimates(p);
  return p;
}

// Weighted average of each impact-ratio cell over the transitions where it
// is defined; weights renormalize over those transitions. A cell undefined
// everywhere aggregates to 0 and is flagged.
inline std::array<std::array<double, 2>, 3> ie_aggregate_irs(
    const EvolutionHistory& history, const WeightVector& weights,
    std::array<std::array<bool, 2>, 3>* all_undefined = nullptr) {
  if (history.transitions.empty())
    throw DataError("cannot aggregate impact ratios over an empty history");
  if (weights.weights.size() != history.transitions.size())
    throw DataError("weight vector length does not match history length");
  std::array<std::array<double, 2>, 3> agg{};
  for (std::size_t o = 0; o < 3; ++o) {
    for (std::size_t k = 0; k < 2; ++k) {
      double weighted = 0, weight_sum = 0;
      for (std::size_t i = 0; i < history.transitions.size(); ++i) {
        const auto& cell = history.transitions[i].ir[o][k];
        if (!cell) continue;
        weighted += weights.weights[i] * *cell;
        weight_sum += weights.weights[i];
      }
      if (weight_sum > 0) {
        agg[o][k] = weighted / weight_sum;
        if (all_undefined) (*all_undefined)[o][k] = false;
      } else {
        agg[o][k] = 0.0;
        if (all_undefined) (*all_undefined)[o][k] = true;
      }
    }
  }
  return agg;
}

// Error-correction factor for one estimation model: for every historical
// transition, the linear combination of its own observed impact ratios and
// concept-change counts gives a raw estimate; beta is the mean ratio of
// actual to raw over the transitions where the raw estimate is nonzero.
// Absent when no transition produced a usable ratio.
inline std::optional<double> ie_beta(const EvolutionHistory& history,
                                     MappingChangeClass model) {
  double ratio_sum = 0;
  std::size_t ratios = 0;
  for (const auto& t : history.transitions) {
    double raw = 0;
    for (std::size_t o = 0; o < 3; ++o) {
      const auto& cell = t.ir[o][static_cast<std::size_t>(model)];
      if (!cell) continue;
      raw += *cell * t.class_count(static_cast<OntologyChangeClass>(o));
    }
    if (raw <= 0) continue;
    double actual =
        model == MappingChangeClass::add ? t.add_count : t.del_count;
    ratio_sum += actual / raw;
    ++ratios;
  }
  if (ratios == 0) return std::nullopt;
  return ratio_sum / static_cast<double>(ratios);
}

// Linear combination of the current concept-change counts weighted by the
// aggregated impact ratios, corrected by beta. A model whose beta is
// undefined falls back to the mapping-based estimate with the same weights.
inline Prediction ie_predict(const EvolutionHistory& history,
                             const WeightVector& weights) {
  Prediction me = me_predict(history, weights);
  Prediction p;
  p.method = PredictionMethod::ie;
  p.weight_kind = weights.kind;
  p.h = history.transitions.size() + 1;
  auto agg = ie_aggregate_irs(history, weights, &p.ir_all_undefined);
  p.aggregated_irs = agg;
  p.beta_add = ie_beta(history, MappingChangeClass::add);
  p.beta_del = ie_beta(history, MappingChangeClass::del);

  auto combine = [&](MappingChangeClass model) {
    double sum = 0;
    for (std::size_t o = 0; o < 3; ++o)
      sum += agg[o][static_cast<std::size_t>(model)] *
             history.current.class_count(static_cast<OntologyChangeClass>(o));
    return sum;
  };

  if (p.beta_add) {
    p.add_estimate = *p.beta_add * combine(MappingChangeClass::add);
  } else {
    p.add_estimate = me.add_estimate;
    p.add_me_fallback = true;
  }
  if (p.beta_del) {
    p.del_estimate = *p.beta_del * combine(MappingChangeClass::del);
  } else {
    p.del_estimate = me.del_estimate;
    p.del_me_fallback = true;
  }
  detail::round_estimates(p);
  return p;
}

// --- JSON --------------------------------------------------------------------

inline nlohmann::json to_json(const TransitionRecord& t) {
  nlohmann::json ir;
  for (std::size_t o = 0; o < 3; ++o) {
    for (std::size_t k = 0; k < 2; ++k) {
      std::string key =
          std::string(ontology_change_label(static_cast<OntologyChangeClass>(o))) +
          "_" +
          std::string(mapping_change_label(static_cast<MappingChangeClass>(k)));
      ir[key] = t.ir[o][k] ? nlohmann::json(*t.ir[o][k]) : nlohmann::json(nullptr);
    }
  }
  return {{"add_count", t.add_count}, {"del_count", t.del_count},
          {"ext_count", t.ext_count}, {"red_count", t.red_count},
          {"rev_count", t.rev_count}, {"ir", std::move(ir)}};
}

inline TransitionRecord transition_from_json(const nlohmann::json& j) {
  TransitionRecord t;
  t.add_count = j.value("add_count", 0.0);
  t.del_count = j.value("del_count", 0.0);
  t.ext_count = j.value("ext_count", 0.0);
  t.red_count = j.value("red_count", 0.0);
  t.rev_count = j.value("rev_count", 0.0);
  if (j.contains("ir")) {
    const auto& ir = j["ir"];
    for (std::size_t o = 0; o < 3; ++o) {
      for (std::size_t k = 0; k < 2; ++k) {
        std::string key =
            std::string(ontology_change_label(static_cast<OntologyChangeClass>(o))) +
            "_" +
            std::string(mapping_change_label(static_cast<MappingChangeClass>(k)));
        if (ir.contains(key) && !ir[key].is_null())
          t.ir[o][k] = ir[key].get<double>();
      }
    }
  }
  return t;
}

inline nlohmann::json to_json(const EvolutionHistory& h) {
  auto transitions = nlohmann::json::array();
  for (const auto& t : h.transitions) transitions.push_back(to_json(t));
  return {{"transitions", std::move(transitions)},
          {"current",
           {{"ext_count", h.current.ext_count},
            {"red_count", h.current.red_count},
            {"rev_count", h.current.rev_count}}}};
}

inline EvolutionHistory history_from_json(const nlohmann::json& j) {
  EvolutionHistory h;
  for (const auto& t : j.value("transitions", nlohmann::json::array()))
    h.transitions.push_back(transition_from_json(t));
  if (j.contains("current")) {
    h.current.ext_count = j["current"].value("ext_count", 0.0);
    h.current.red_count = j["current"].value("red_count", 0.0);
    h.current.rev_count = j["current"].value("rev_count", 0.0);
  }
  return h;
}

inline nlohmann::json to_json(const Prediction& p) {
  nlohmann::json j;
  j["method"] = std::string(prediction_method_label(p.method));
  j["weighting"] = std::string(weight_kind_label(p.weight_kind));
  j["h"] = p.h;
  j["add"] = {{"estimate", p.add_estimate}, {"rounded", p.add_rounded}};
  j["del"] = {{"estimate", p.del_estimate}, {"rounded", p.del_rounded}};
  if (p.method == PredictionMethod::ie) {
    j["beta"] = {{"add", p.beta_add ? nlohmann::json(*p.beta_add)
                                    : nlohmann::json(nullptr)},
                 {"del", p.beta_del ? nlohmann::json(*p.beta_del)
                                    : nlohmann::json(nullptr)}};
    if (p.aggregated_irs) {
      nlohmann::json irs;
      for (std::size_t o = 0; o < 3; ++o) {
        for (std::size_t k = 0; k < 2; ++k) {
          std::string key =
              std::string(
                  ontology_change_label(static_cast<OntologyChangeClass>(o))) +
              "_" +
              std::string(
                  mapping_change_label(static_cast<MappingChangeClass>(k)));
          irs[key] = (*p.aggregated_irs)[o][k];
        }
      }
      j["aggregated_irs"] = std::move(irs);
    }
    j["me_fallback"] = {{"add", p.add_me_fallback}, {"del", p.del_me_fallback}};
  }
  return j;
}

}  // namespace ontomap
