#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ontomap/error.hpp"

namespace ontomap {

enum class RelationKind { is_a, part_of, other };

inline RelationKind relation_kind_from_label(std::string_view label) {
  if (label == "is_a") return RelationKind::is_a;
  if (label == "part_of") return RelationKind::part_of;
  return RelationKind::other;
}

// Directed typed edge between two concepts. `tag` carries the raw type
// label for kinds outside is_a/part_of.
struct Relationship {
  std::string source;
  std::string target;
  RelationKind kind = RelationKind::is_a;
  std::string tag;

  std::string kind_label() const {
    switch (kind) {
      case RelationKind::is_a:
        return "is_a";
      case RelationKind::part_of:
        return "part_of";
      default:
        return tag;
    }
  }

  bool hierarchical() const {
    return kind == RelationKind::is_a || kind == RelationKind::part_of;
  }

  friend bool operator==(const Relationship&, const Relationship&) = default;
  friend bool operator<(const Relationship& a, const Relationship& b) {
    return std::tie(a.source, a.target, a.kind, a.tag) <
           std::tie(b.source, b.target, b.kind, b.tag);
  }
};

inline Relationship make_relationship(std::string source, std::string target,
                                      std::string_view label) {
  Relationship r{std::move(source), std::move(target),
                 relation_kind_from_label(label), {}};
  if (r.kind == RelationKind::other) r.tag = std::string(label);
  return r;
}

// One ontology concept with its descriptive attributes. `replaced_by` and
// `consider` hold successor hints consumed by complex-change detection.
struct Concept {
  std::string accession;
  std::string name;
  std::set<std::string> synonyms;
  std::optional<std::string> definition;
  bool obsolete = false;
  std::set<std::string> replaced_by;
  std::set<std::string> consider;

  friend bool operator==(const Concept&, const Concept&) = default;
};

// Mutable aggregate used while assembling a version (parser output, diff
// application, test fixtures). Sealed into an immutable OntologyVersion.
struct OntologyData {
  std::string ontology_id;
  int version = 1;
  std::string release_date;
  std::vector<Concept> concepts;
  std::vector<Relationship> relationships;
};

// Immutable snapshot of one ontology release. Construction validates the
// model invariants and builds the hierarchy indexes; afterwards the object
// is safe for concurrent read access.
class OntologyVersion {
 public:
  OntologyVersion() = default;

  explicit OntologyVersion(OntologyData data)
      : ontology_id_(std::move(data.ontology_id)),
        version_(data.version),
        release_date_(std::move(data.release_date)) {
    for (auto& c : data.concepts) {
      if (c.accession.empty())
        throw ValidationError("concept with empty accession");
      if (c.name.empty() && !c.obsolete)
        throw ValidationError("concept '" + c.accession +
                              "': name required for non-obsolete concept");
      auto [it, inserted] = concepts_.emplace(c.accession, std::move(c));
      if (!inserted)
        throw ValidationError("duplicate accession '" + it->first + "'");
    }
    std::sort(data.relationships.begin(), data.relationships.end());
    data.relationships.erase(
        std::unique(data.relationships.begin(), data.relationships.end()),
        data.relationships.end());
    relationships_ = std::move(data.relationships);
    for (const auto& r : relationships_) {
      if (r.source == r.target)
        throw ValidationError("relationship '" + r.source + "' -> '" +
                              r.target + "': self-loop not allowed");
      if (!concepts_.count(r.source))
        throw ValidationError("relationship '" + r.source + "' -> '" +
                              r.target + "': source not present");
      if (!concepts_.count(r.target))
        throw ValidationError("relationship '" + r.source + "' -> '" +
                              r.target + "': target not present");
    }
    build_hierarchy();
    check_isa_acyclic();
  }

  const std::string& ontology_id() const { return ontology_id_; }
  int version() const { return version_; }
  const std::string& release_date() const { return release_date_; }
  const std::map<std::string, Concept>& concepts() const { return concepts_; }
  const std::vector<Relationship>& relationships() const {
    return relationships_;
  }
  std::size_t size() const { return concepts_.size(); }

  bool contains(const std::string& accession) const {
    return concepts_.count(accession) != 0;
  }

  const Concept* find_concept(const std::string& accession) const {
    auto it = concepts_.find(accession);
    return it == concepts_.end() ? nullptr : &it->second;
  }

  // Hierarchy neighbours over is_a/part_of edges, sorted by accession.
  // Unknown accessions are an error.
  const std::vector<std::string>& parents_of(
      const std::string& accession) const {
    auto it = parents_.find(accession);
    if (it == parents_.end())
      throw DataError("unknown accession '" + accession + "'");
    return it->second;
  }

  const std::vector<std::string>& children_of(
      const std::string& accession) const {
    auto it = children_.find(accession);
    if (it == children_.end())
      throw DataError("unknown accession '" + accession + "'");
    return it->second;
  }

  OntologyData to_data() const {
    OntologyData d;
    d.ontology_id = ontology_id_;
    d.version = version_;
    d.release_date = release_date_;
    d.concepts.reserve(concepts_.size());
    for (const auto& [acc, c] : concepts_) d.concepts.push_back(c);
    d.relationships = relationships_;
    return d;
  }

  // Copy with new version metadata; the CLI numbers versions by the order
  // the input files were supplied in.
  OntologyVersion relabeled(int version, std::string release_date = {},
                            std::string ontology_id = {}) const {
    OntologyData d = to_data();
    d.version = version;
    if (!release_date.empty()) d.release_date = std::move(release_date);
    if (!ontology_id.empty()) d.ontology_id = std::move(ontology_id);
    return OntologyVersion(std::move(d));
  }

  friend bool operator==(const OntologyVersion& a, const OntologyVersion& b) {
    return a.ontology_id_ == b.ontology_id_ && a.version_ == b.version_ &&
           a.release_date_ == b.release_date_ && a.concepts_ == b.concepts_ &&
           a.relationships_ == b.relationships_;
  }

 private:
  void build_hierarchy() {
    for (const auto& [acc, c] : concepts_) {
      parents_[acc];
      children_[acc];
    }
    for (const auto& r : relationships_) {
      if (!r.hierarchical()) continue;
      parents_[r.source].push_back(r.target);
      children_[r.target].push_back(r.source);
    }
    auto sort_unique = [](std::map<std::string, std::vector<std::string>>& m) {
      for (auto& [acc, v] : m) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
      }
    };
    sort_unique(parents_);
    sort_unique(children_);
  }

  // Kahn's algorithm over the is_a subgraph; leftover edges mean a cycle.
  void check_isa_acyclic() const {
    std::map<std::string, std::size_t> out_degree;
    std::map<std::string, std::vector<std::string>> dependants;
    for (const auto& [acc, c] : concepts_) out_degree[acc] = 0;
    std::size_t edges = 0;
    for (const auto& r : relationships_) {
      if (r.kind != RelationKind::is_a) continue;
      ++out_degree[r.source];
      dependants[r.target].push_back(r.source);
      ++edges;
    }
    std::deque<std::string> ready;
    for (const auto& [acc, deg] : out_degree)
      if (deg == 0) ready.push_back(acc);
    while (!ready.empty()) {
      std::string acc = std::move(ready.front());
      ready.pop_front();
      auto it = dependants.find(acc);
      if (it == dependants.end()) continue;
      for (const auto& child : it->second) {
        --edges;
        if (--out_degree[child] == 0) ready.push_back(child);
      }
    }
    if (edges > 0) {
      for (const auto& [acc, deg] : out_degree)
        if (deg > 0)
          throw ValidationError("is_a cycle involving '" + acc + "'");
    }
  }

  std::string ontology_id_;
  int version_ = 1;
  std::string release_date_;
  std::map<std::string, Concept> concepts_;
  std::vector<Relationship> relationships_;
  std::map<std::string, std::vector<std::string>> parents_;
  std::map<std::string, std::vector<std::string>> children_;
};

// --- canonical JSON ---------------------------------------------------------
//
// Stable key order (nlohmann::json keeps object keys sorted), concepts
// sorted by accession, relationships in canonical order. Used for golden
// files and structural equality checks.

inline nlohmann::json to_json(const Concept& c) {
  nlohmann::json j;
  j["accession"] = c.accession;
  j["name"] = c.name;
  j["synonyms"] = c.synonyms;
  j["definition"] = c.definition ? nlohmann::json(*c.definition)
                                 : nlohmann::json(nullptr);
  j["obsolete"] = c.obsolete;
  j["replaced_by"] = c.replaced_by;
  j["consider"] = c.consider;
  return j;
}

inline Concept concept_from_json(const nlohmann::json& j) {
  Concept c;
  c.accession = j.at("accession").get<std::string>();
  c.name = j.value("name", std::string{});
  for (const auto& s : j.value("synonyms", nlohmann::json::array()))
    c.synonyms.insert(s.get<std::string>());
  if (j.contains("definition") && !j["definition"].is_null())
    c.definition = j["definition"].get<std::string>();
  c.obsolete = j.value("obsolete", false);
  for (const auto& s : j.value("replaced_by", nlohmann::json::array()))
    c.replaced_by.insert(s.get<std::string>());
  for (const auto& s : j.value("consider", nlohmann::json::array()))
    c.consider.insert(s.get<std::string>());
  return c;
}

inline nlohmann::json to_json(const Relationship& r) {
  return {{"source", r.source}, {"target", r.target}, {"kind", r.kind_label()}};
}

inline Relationship relationship_from_json(const nlohmann::json& j) {
  return make_relationship(j.at("source").get<std::string>(),
                           j.at("target").get<std::string>(),
                           j.at("kind").get<std::string>());
}

inline nlohmann::json to_json(const OntologyVersion& v) {
  nlohmann::json j;
  j["ontology_id"] = v.ontology_id();
  j["version"] = v.version();
  j["release_date"] = v.release_date();
  auto concepts = nlohmann::json::array();
  for (const auto& [acc, c] : v.concepts()) concepts.push_back(to_json(c));
  j["concepts"] = std::move(concepts);
  auto rels = nlohmann::json::array();
  for (const auto& r : v.relationships()) rels.push_back(to_json(r));
  j["relationships"] = std::move(rels);
  return j;
}

inline OntologyVersion ontology_from_json(const nlohmann::json& j) {
  OntologyData d;
  d.ontology_id = j.value("ontology_id", std::string{});
  d.version = j.value("version", 1);
  d.release_date = j.value("release_date", std::string{});
  for (const auto& c : j.value("concepts", nlohmann::json::array()))
    d.concepts.push_back(concept_from_json(c));
  for (const auto& r : j.value("relationships", nlohmann::json::array()))
    d.relationships.push_back(relationship_from_json(r));
  return OntologyVersion(std::move(d));
}

inline std::string canonical_json(const OntologyVersion& v) {
  return to_json(v).dump(2);
}

}  // namespace ontomap
