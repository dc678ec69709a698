#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>

#include "ontomap/diff.hpp"
#include "ontomap/matcher.hpp"

namespace ontomap {

using CorrespondencePair = std::pair<std::string, std::string>;

// Set difference between consecutive mapping versions. Correspondence
// identity is the accession pair; confidence drift alone is no change.
struct MappingDiff {
  int old_version = 0;
  int new_version = 0;
  std::set<CorrespondencePair> add_set;
  std::set<CorrespondencePair> del_set;
  std::size_t unchanged_count = 0;
};

inline MappingDiff mapping_diff(const Mapping& m_old, const Mapping& m_new) {
  if (!(m_old.config == m_new.config))
    throw DataError(
        "mapping diff requires mappings produced by the same matcher config ('" +
        m_old.config.label() + "' vs '" + m_new.config.label() + "')");
  if (m_old.left_ontology != m_new.left_ontology ||
      m_old.right_ontology != m_new.right_ontology)
    throw DataError("mapping diff requires mappings of the same ontology pair");

  MappingDiff d;
  d.old_version = m_old.left_version;
  d.new_version = m_new.left_version;
  std::set<CorrespondencePair> old_pairs = m_old.pair_set();
  std::set<CorrespondencePair> new_pairs = m_new.pair_set();
  for (const auto& p : new_pairs)
    if (!old_pairs.count(p)) d.add_set.insert(p);
  for (const auto& p : old_pairs) {
    if (!new_pairs.count(p)) d.del_set.insert(p);
    else ++d.unchanged_count;
  }
  return d;
}

// Changed correspondences relative to the union of both mapping versions.
// Two empty mappings did not change: 0.
inline double mapping_change_ratio(const MappingDiff& d) {
  std::size_t changed = d.add_set.size() + d.del_set.size();
  std::size_t total = changed + d.unchanged_count;
  if (total == 0) return 0.0;
  return static_cast<double>(changed) / static_cast<double>(total);
}

enum class OntologyChangeClass { ext, red, rev };
enum class MappingChangeClass { add, del };

inline std::string_view ontology_change_label(OntologyChangeClass c) {
  switch (c) {
    case OntologyChangeClass::ext: return "ext";
    case OntologyChangeClass::red: return "red";
    default: return "rev";
  }
}

inline std::string_view mapping_change_label(MappingChangeClass c) {
  return c == MappingChangeClass::add ? "add" : "del";
}

// One impact-matrix cell. `ratio` is absent when the concept-change class is
// empty: an undefined ratio is reported as an explicit null, never as 0.
struct ImpactCell {
  std::size_t impacted = 0;
  std::size_t total = 0;
  std::optional<double> ratio;
};

// Share of changed concepts appearing on either side of a changed
// correspondence.
inline ImpactCell impact_ratio(const std::set<std::string>& changed_concepts,
                               const std::set<CorrespondencePair>& changed_pairs) {
  ImpactCell cell;
  cell.total = changed_concepts.size();
  if (cell.total == 0) return cell;
  for (const auto& acc : changed_concepts) {
    bool hit = std::any_of(changed_pairs.begin(), changed_pairs.end(),
                           [&](const CorrespondencePair& p) {
                             return p.first == acc || p.second == acc;
                           });
    if (hit) ++cell.impacted;
  }
  cell.ratio = static_cast<double>(cell.impacted) /
               static_cast<double>(cell.total);
  return cell;
}

// 3x2 grid interrelating concept-change classes of both ontologies (union)
// with correspondence-change kinds.
struct ImpactMatrix {
  int old_version = 0;
  int new_version = 0;
  std::array<std::array<ImpactCell, 2>, 3> cells{};

  ImpactCell& cell(OntologyChangeClass o, MappingChangeClass m) {
    return cells[static_cast<std::size_t>(o)][static_cast<std::size_t>(m)];
  }
  const ImpactCell& cell(OntologyChangeClass o, MappingChangeClass m) const {
    return cells[static_cast<std::size_t>(o)][static_cast<std::size_t>(m)];
  }
};

inline ImpactMatrix impact_matrix(const DiffResult& diff1,
                                  const DiffResult& diff2,
                                  const MappingDiff& md) {
  ImpactMatrix m;
  m.old_version = md.old_version;
  m.new_version = md.new_version;
  auto united = [](const std::set<std::string>& a,
                   const std::set<std::string>& b) {
    std::set<std::string> u = a;
    u.insert(b.begin(), b.end());
    return u;
  };
  const std::set<std::string> classes[3] = {
      united(diff1.ext_set, diff2.ext_set),
      united(diff1.red_set, diff2.red_set),
      united(diff1.rev_set, diff2.rev_set)};
  const std::set<CorrespondencePair>* kinds[2] = {&md.add_set, &md.del_set};
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t k = 0; k < 2; ++k)
      m.cells[o][k] = impact_ratio(classes[o], *kinds[k]);
  return m;
}

// --- serialization -----------------------------------------------------------

inline std::string mapping_diff_tsv(const MappingDiff& d) {
  std::ostringstream os;
  os << "op\tleft_accession\tright_accession\n";
  for (const auto& [l, r] : d.add_set) os << "ADD\t" << l << '\t' << r << '\n';
  for (const auto& [l, r] : d.del_set) os << "DEL\t" << l << '\t' << r << '\n';
  return os.str();
}

inline nlohmann::json mapping_diff_meta_json(const MappingDiff& d) {
  return {{"old_version", d.old_version},
          {"new_version", d.new_version},
          {"added", d.add_set.size()},
          {"deleted", d.del_set.size()},
          {"unchanged", d.unchanged_count},
          {"mcr", mapping_change_ratio(d)}};
}

inline void write_mapping_diff(const MappingDiff& d,
                               const std::filesystem::path& tsv) {
  {
    std::ofstream out(tsv, std::ios::binary);
    if (!out) throw DataError("cannot write '" + tsv.string() + "'");
    out << mapping_diff_tsv(d);
  }
  std::filesystem::path meta_path = tsv;
  meta_path += ".meta.json";
  std::ofstream meta(meta_path, std::ios::binary);
  if (!meta) throw DataError("cannot write '" + meta_path.string() + "'");
  meta << mapping_diff_meta_json(d).dump(2) << '\n';
}

inline MappingDiff read_mapping_diff(const std::filesystem::path& tsv) {
  std::ifstream in(tsv, std::ios::binary);
  if (!in) throw DataError("cannot open '" + tsv.string() + "'");
  MappingDiff d;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "op\tleft_accession\tright_accession")
        throw ParseError("unexpected mapping diff TSV header", 1);
      continue;
    }
    std::istringstream ls(line);
    std::string op, l, r;
    if (!std::getline(ls, op, '\t') || !std::getline(ls, l, '\t') ||
        !std::getline(ls, r, '\t'))
      throw ParseError("expected 3 tab-separated columns", line_no);
    if (op == "ADD") d.add_set.emplace(l, r);
    else if (op == "DEL") d.del_set.emplace(l, r);
    else throw ParseError("unknown op '" + op + "'", line_no);
  }
  std::filesystem::path meta_path = tsv;
  meta_path += ".meta.json";
  std::ifstream meta(meta_path, std::ios::binary);
  if (meta) {
    nlohmann::json j = nlohmann::json::parse(meta);
    d.old_version = j.value("old_version", 0);
    d.new_version = j.value("new_version", 0);
    d.unchanged_count = j.value("unchanged", 0u);
  }
  return d;
}

inline nlohmann::json to_json(const ImpactMatrix& m) {
  nlohmann::json j;
  j["old_version"] = m.old_version;
  j["new_version"] = m.new_version;
  auto cells = nlohmann::json::array();
  for (std::size_t o = 0; o < 3; ++o) {
    for (std::size_t k = 0; k < 2; ++k) {
      const ImpactCell& c = m.cells[o][k];
      cells.push_back(
          {{"ontology_change",
            std::string(ontology_change_label(static_cast<OntologyChangeClass>(o)))},
           {"mapping_change",
            std::string(mapping_change_label(static_cast<MappingChangeClass>(k)))},
           {"impacted", c.impacted},
           {"total", c.total},
           {"ratio", c.ratio ? nlohmann::json(*c.ratio) : nlohmann::json(nullptr)}});
    }
  }
  j["cells"] = std::move(cells);
  return j;
}

inline ImpactMatrix impact_matrix_from_json(const nlohmann::json& j) {
  ImpactMatrix m;
  m.old_version = j.value("old_version", 0);
  m.new_version = j.value("new_version", 0);
  for (const auto& c : j.value("cells", nlohmann::json::array())) {
    std::string o = c.at("ontology_change").get<std::string>();
    std::string k = c.at("mapping_change").get<std::string>();
    std::size_t oi = o == "ext" ? 0 : o == "red" ? 1 : 2;
    std::size_t ki = k == "add" ? 0 : 1;
    ImpactCell& cell = m.cells[oi][ki];
    cell.impacted = c.value("impacted", 0u);
    cell.total = c.value("total", 0u);
    if (c.contains("ratio") && !c["ratio"].is_null())
      cell.ratio = c["ratio"].get<double>();
  }
  return m;
}

inline std::string impact_matrix_tsv(const ImpactMatrix& m) {
  std::ostringstream os;
  os << "ontology_change\tmapping_change\timpacted\ttotal\tratio\n";
  for (std::size_t o = 0; o < 3; ++o) {
    for (std::size_t k = 0; k < 2; ++k) {
      const ImpactCell& c = m.cells[o][k];
      os << ontology_change_label(static_cast<OntologyChangeClass>(o)) << '\t'
         << mapping_change_label(static_cast<MappingChangeClass>(k)) << '\t'
         << c.impacted << '\t' << c.total << '\t'
         << (c.ratio ? format_confidence(*c.ratio) : "NA") << '\n';
    }
  }
  return os.str();
}

}  // namespace ontomap
