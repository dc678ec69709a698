#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ontomap/ontology.hpp"

namespace ontomap {

// The change-operation taxonomy. Every operation falls into one of three
// categories; the category drives concept classification.
enum class ChangeKind {
  add_concept,
  del_concept,
  add_subgraph,
  del_subgraph,
  add_relationship,
  del_relationship,
  add_attribute,
  del_attribute,
  change_attribute_value,
  mark_obsolete,
  mark_non_obsolete,
  split,
  merge,
  substitute,
  move
};

enum class ChangeCategory { extension, reduction, revision };

inline ChangeCategory category_of(ChangeKind kind) {
  switch (kind) {
    case ChangeKind::add_concept:
    case ChangeKind::add_subgraph:
    case ChangeKind::add_relationship:
    case ChangeKind::add_attribute:
    case ChangeKind::mark_non_obsolete:
      return ChangeCategory::extension;
    case ChangeKind::del_concept:
    case ChangeKind::del_subgraph:
    case ChangeKind::del_relationship:
    case ChangeKind::del_attribute:
    case ChangeKind::mark_obsolete:
      return ChangeCategory::reduction;
    default:
      return ChangeCategory::revision;
  }
}

inline std::string_view change_kind_label(ChangeKind kind) {
  switch (kind) {
    case ChangeKind::add_concept: return "add_concept";
    case ChangeKind::del_concept: return "del_concept";
    case ChangeKind::add_subgraph: return "add_subgraph";
    case ChangeKind::del_subgraph: return "del_subgraph";
    case ChangeKind::add_relationship: return "add_relationship";
    case ChangeKind::del_relationship: return "del_relationship";
    case ChangeKind::add_attribute: return "add_attribute";
    case ChangeKind::del_attribute: return "del_attribute";
    case ChangeKind::change_attribute_value: return "change_attribute_value";
    case ChangeKind::mark_obsolete: return "mark_obsolete";
    case ChangeKind::mark_non_obsolete: return "mark_non_obsolete";
    case ChangeKind::split: return "split";
    case ChangeKind::merge: return "merge";
    case ChangeKind::substitute: return "substitute";
    case ChangeKind::move: return "move";
  }
  return "unknown";
}

inline ChangeKind change_kind_from_label(std::string_view label) {
  for (int k = 0; k <= static_cast<int>(ChangeKind::move); ++k) {
    auto kind = static_cast<ChangeKind>(k);
    if (change_kind_label(kind) == label) return kind;
  }
  throw DataError("unknown change kind '" + std::string(label) + "'");
}

// One change operation. `subjects` lists the concepts the operation is
// attributed to; the remaining fields are payload and only a kind-specific
// subset is populated:
//   add/del/change attribute ....... attribute, old_value/new_value
//   add/del relationship ........... edge
//   add_concept .................... concepts[0]
//   split .......................... subjects[0] = old, concepts = replacements
//   substitute ..................... subjects[0] = old, concepts[0] = replacement
//   merge .......................... target = survivor, subjects = sources + survivor,
//                                    survivor_adds = metadata re-established on apply
//   move ........................... removed_edges, edges (added)
//   add/del subgraph ............... concepts (members), edges (internal +
//                                    attachment), anchor (pre-existing), root
struct ChangeOp {
  ChangeKind kind = ChangeKind::add_concept;
  std::vector<std::string> subjects;
  std::string attribute;
  std::string old_value;
  std::string new_value;
  std::optional<Relationship> edge;
  std::vector<Concept> concepts;
  std::vector<Relationship> edges;
  std::vector<Relationship> removed_edges;
  std::string anchor;
  std::string root;
  std::string target;
  std::vector<std::pair<std::string, std::string>> survivor_adds;

  friend bool operator==(const ChangeOp&, const ChangeOp&) = default;
};

namespace detail {

inline std::string edge_key(const Relationship& r) {
  return r.source + "\x1f" + r.target + "\x1f" + r.kind_label();
}

inline std::string op_sort_key(const ChangeOp& op) {
  std::ostringstream os;
  os << static_cast<int>(op.kind) << '\x1e';
  for (const auto& s : op.subjects) os << s << '\x1f';
  os << '\x1e' << op.attribute << '\x1e' << op.old_value << '\x1e'
     << op.new_value << '\x1e';
  if (op.edge) os << edge_key(*op.edge);
  os << '\x1e' << op.target << '\x1e' << op.anchor;
  return os.str();
}

inline void canonical_sort(std::vector<ChangeOp>& ops) {
  std::sort(ops.begin(), ops.end(), [](const ChangeOp& a, const ChangeOp& b) {
    return op_sort_key(a) < op_sort_key(b);
  });
}

}  // namespace detail

inline ChangeOp make_attribute_add(const std::string& accession,
                                   std::string attribute, std::string value) {
  ChangeOp op;
  op.kind = ChangeKind::add_attribute;
  op.subjects = {accession};
  op.attribute = std::move(attribute);
  op.new_value = std::move(value);
  return op;
}

inline ChangeOp make_attribute_del(const std::string& accession,
                                   std::string attribute, std::string value) {
  ChangeOp op;
  op.kind = ChangeKind::del_attribute;
  op.subjects = {accession};
  op.attribute = std::move(attribute);
  op.old_value = std::move(value);
  return op;
}

// The exact basic-operation set transforming `old_v` into `new_v` under
// accession identity. Relationship changes are attributed to their source
// concept; multi-valued attributes diff element-wise, single-valued ones
// yield one change_attribute_value.
inline std::vector<ChangeOp> compute_basic_diff(const OntologyVersion& old_v,
                                                const OntologyVersion& new_v) {
  if (old_v.ontology_id() != new_v.ontology_id())
    throw DataError("cannot diff versions of different ontologies ('" +
                    old_v.ontology_id() + "' vs '" + new_v.ontology_id() +
                    "')");
  std::vector<ChangeOp> ops;

  for (const auto& [acc, c] : new_v.concepts()) {
    if (old_v.contains(acc)) continue;
    ChangeOp op;
    op.kind = ChangeKind::add_concept;
    op.subjects = {acc};
    op.concepts = {c};
    ops.push_back(std::move(op));
  }
  for (const auto& [acc, c] : old_v.concepts()) {
    if (new_v.contains(acc)) continue;
    ChangeOp op;
    op.kind = ChangeKind::del_concept;
    op.subjects = {acc};
    ops.push_back(std::move(op));
  }

  {
    const auto& olds = old_v.relationships();
    const auto& news = new_v.relationships();
    std::vector<Relationship> removed, added;
    std::set_difference(olds.begin(), olds.end(), news.begin(), news.end(),
                        std::back_inserter(removed));
    std::set_difference(news.begin(), news.end(), olds.begin(), olds.end(),
                        std::back_inserter(added));
    for (auto& r : removed) {
      ChangeOp op;
      op.kind = ChangeKind::del_relationship;
      op.subjects = {r.source};
      op.edge = std::move(r);
      ops.push_back(std::move(op));
    }
    for (auto& r : added) {
      ChangeOp op;
      op.kind = ChangeKind::add_relationship;
      op.subjects = {r.source};
      op.edge = std::move(r);
      ops.push_back(std::move(op));
    }
  }

  auto diff_single = [&ops](const std::string& acc, const char* attribute,
                            const std::string& old_value,
                            const std::string& new_value) {
    if (old_value == new_value) return;
    if (old_value.empty()) {
      ops.push_back(make_attribute_add(acc, attribute, new_value));
    } else if (new_value.empty()) {
      ops.push_back(make_attribute_del(acc, attribute, old_value));
    } else {
      ChangeOp op;
      op.kind = ChangeKind::change_attribute_value;
      op.subjects = {acc};
      op.attribute = attribute;
      op.old_value = old_value;
      op.new_value = new_value;
      ops.push_back(std::move(op));
    }
  };
  auto diff_elements = [&ops](const std::string& acc, const char* attribute,
                              const std::set<std::string>& old_set,
                              const std::set<std::string>& new_set) {
    for (const auto& v : new_set)
      if (!old_set.count(v)) ops.push_back(make_attribute_add(acc, attribute, v));
    for (const auto& v : old_set)
      if (!new_set.count(v)) ops.push_back(make_attribute_del(acc, attribute, v));
  };

  for (const auto& [acc, oc] : old_v.concepts()) {
    const Concept* nc = new_v.find_concept(acc);
    if (!nc) continue;
    diff_single(acc, "name", oc.name, nc->name);
    diff_single(acc, "definition", oc.definition.value_or(""),
                nc->definition.value_or(""));
    diff_elements(acc, "synonym", oc.synonyms, nc->synonyms);
    diff_elements(acc, "replaced_by", oc.replaced_by, nc->replaced_by);
    diff_elements(acc, "consider", oc.consider, nc->consider);
    if (!oc.obsolete && nc->obsolete) {
      ChangeOp op;
      op.kind = ChangeKind::mark_obsolete;
      op.subjects = {acc};
      ops.push_back(std::move(op));
    } else if (oc.obsolete && !nc->obsolete) {
      ChangeOp op;
      op.kind = ChangeKind::mark_non_obsolete;
      op.subjects = {acc};
      ops.push_back(std::move(op));
    }
  }

  detail::canonical_sort(ops);
  return ops;
}

// Fold recognisable patterns of basic operations into complex operations.
// Detection is best-effort and rule based: replaced_by/consider successor
// hints first (merge/split/substitute), deleted-name-as-new-synonym merges
// second, parent-set rewires (move) third, attached/detached subtrees
// (add/del_subgraph) last. Unmatched operations pass through unchanged and
// the returned set still transforms old into new.
inline std::vector<ChangeOp> detect_complex_changes(
    const OntologyVersion& old_v, const OntologyVersion& new_v,
    std::vector<ChangeOp> basic) {
  std::vector<bool> consumed(basic.size(), false);
  std::vector<ChangeOp> complex_ops;

  std::map<std::string, std::size_t> del_concept_ix;
  std::map<std::string, std::size_t> add_concept_ix;
  // attribute -> value -> list of (op index, subject)
  std::map<std::string, std::map<std::string,
                                 std::vector<std::pair<std::size_t, std::string>>>>
      metadata_adds;
  for (std::size_t i = 0; i < basic.size(); ++i) {
    const ChangeOp& op = basic[i];
    if (op.kind == ChangeKind::del_concept) del_concept_ix[op.subjects[0]] = i;
    if (op.kind == ChangeKind::add_concept) add_concept_ix[op.subjects[0]] = i;
    if (op.kind == ChangeKind::add_attribute &&
        (op.attribute == "replaced_by" || op.attribute == "consider" ||
         op.attribute == "synonym"))
      metadata_adds[op.attribute][op.new_value].emplace_back(i, op.subjects[0]);
  }

  // merge candidates grouped by survivor:
  // survivor -> (sources, consumed op indices, survivor_adds)
  struct MergeGroup {
    std::vector<std::string> sources;
    std::vector<std::size_t> consumed_ops;
    std::vector<std::pair<std::string, std::string>> survivor_adds;
  };
  std::map<std::string, MergeGroup> merges;

  // Pass 1: successor hints. For a deleted concept c the replacement
  // targets are the new-version concepts that reference c via replaced_by
  // (or, failing that, consider) -- either through a metadata addition on a
  // surviving concept or inside an added concept's own payload.
  for (const auto& [deleted, del_ix] : del_concept_ix) {
    if (consumed[del_ix]) continue;
    for (const char* attribute : {"replaced_by", "consider"}) {
      // shared survivors referencing `deleted`
      std::vector<std::pair<std::size_t, std::string>> shared_refs;
      auto attr_it = metadata_adds.find(attribute);
      if (attr_it != metadata_adds.end()) {
        auto val_it = attr_it->second.find(deleted);
        if (val_it != attr_it->second.end()) {
          for (const auto& ref : val_it->second)
            if (!consumed[ref.first]) shared_refs.push_back(ref);
        }
      }
      // added concepts referencing `deleted`
      std::vector<std::string> added_refs;
      for (const auto& [acc, add_ix] : add_concept_ix) {
        if (consumed[add_ix]) continue;
        const Concept& c = basic[add_ix].concepts[0];
        const auto& hints =
            std::string_view(attribute) == "replaced_by" ? c.replaced_by
                                                         : c.consider;
        if (hints.count(deleted)) added_refs.push_back(acc);
      }

      if (shared_refs.empty() && added_refs.empty()) continue;

      if (shared_refs.size() == 1 && added_refs.empty()) {
        const auto& [attr_op_ix, survivor] = shared_refs[0];
        MergeGroup& g = merges[survivor];
        g.sources.push_back(deleted);
        g.consumed_ops.push_back(del_ix);
        g.consumed_ops.push_back(attr_op_ix);
        g.survivor_adds.emplace_back(attribute, deleted);
        consumed[del_ix] = true;
        consumed[attr_op_ix] = true;
      } else if (shared_refs.empty() && added_refs.size() == 1) {
        ChangeOp op;
        op.kind = ChangeKind::substitute;
        op.subjects = {deleted, added_refs[0]};
        op.concepts = {basic[add_concept_ix[added_refs[0]]].concepts[0]};
        consumed[del_ix] = true;
        consumed[add_concept_ix[added_refs[0]]] = true;
        complex_ops.push_back(std::move(op));
      } else if (shared_refs.empty() && added_refs.size() >= 2) {
        ChangeOp op;
        op.kind = ChangeKind::split;
        op.subjects = {deleted};
        for (const auto& acc : added_refs) {
          op.subjects.push_back(acc);
          op.concepts.push_back(basic[add_concept_ix[acc]].concepts[0]);
          consumed[add_concept_ix[acc]] = true;
        }
        consumed[del_ix] = true;
        complex_ops.push_back(std::move(op));
      }
      // mixed or ambiguous references: leave the basic ops in place
      break;
    }
  }

  // Pass 2: a deleted concept whose name reappears as a synonym newly added
  // to exactly one surviving concept is folded into a merge as well.
  for (const auto& [deleted, del_ix] : del_concept_ix) {
    if (consumed[del_ix]) continue;
    const Concept* old_c = old_v.find_concept(deleted);
    if (!old_c || old_c->name.empty()) continue;
    auto syn_it = metadata_adds.find("synonym");
    if (syn_it == metadata_adds.end()) continue;
    auto val_it = syn_it->second.find(old_c->name);
    if (val_it == syn_it->second.end()) continue;
    std::vector<std::pair<std::size_t, std::string>> live;
    for (const auto& ref : val_it->second)
      if (!consumed[ref.first]) live.push_back(ref);
    if (live.size() != 1) continue;
    const auto& [syn_op_ix, survivor] = live[0];
    MergeGroup& g = merges[survivor];
    g.sources.push_back(deleted);
    g.consumed_ops.push_back(del_ix);
    g.consumed_ops.push_back(syn_op_ix);
    g.survivor_adds.emplace_back("synonym", old_c->name);
    consumed[del_ix] = true;
    consumed[syn_op_ix] = true;
  }

  for (auto& [survivor, group] : merges) {
    ChangeOp op;
    op.kind = ChangeKind::merge;
    std::sort(group.sources.begin(), group.sources.end());
    op.subjects = group.sources;
    op.subjects.push_back(survivor);
    op.target = survivor;
    std::sort(group.survivor_adds.begin(), group.survivor_adds.end());
    op.survivor_adds = std::move(group.survivor_adds);
    complex_ops.push_back(std::move(op));
  }

  // Pass 3: moves. A concept present in both versions whose outgoing
  // is_a/part_of edges were both removed and added changed its place in the
  // hierarchy; the edge operations collapse into one move.
  {
    std::map<std::string, std::vector<std::size_t>> removed_by_source,
        added_by_source;
    for (std::size_t i = 0; i < basic.size(); ++i) {
      if (consumed[i] || !basic[i].edge || !basic[i].edge->hierarchical())
        continue;
      const std::string& source = basic[i].edge->source;
      if (!old_v.contains(source) || !new_v.contains(source)) continue;
      if (basic[i].kind == ChangeKind::del_relationship)
        removed_by_source[source].push_back(i);
      else if (basic[i].kind == ChangeKind::add_relationship)
        added_by_source[source].push_back(i);
    }
    for (const auto& [source, removed] : removed_by_source) {
      auto added_it = added_by_source.find(source);
      if (added_it == added_by_source.end()) continue;
      ChangeOp op;
      op.kind = ChangeKind::move;
      op.subjects = {source};
      for (std::size_t i : removed) {
        op.removed_edges.push_back(*basic[i].edge);
        consumed[i] = true;
      }
      for (std::size_t i : added_it->second) {
        op.edges.push_back(*basic[i].edge);
        consumed[i] = true;
      }
      std::sort(op.removed_edges.begin(), op.removed_edges.end());
      std::sort(op.edges.begin(), op.edges.end());
      complex_ops.push_back(std::move(op));
    }
  }

  // Pass 4: subtrees. A maximal connected group (>= 2) of added concepts
  // whose hierarchical edges form a tree hanging off exactly one
  // pre-existing concept becomes one add_subgraph; deletions mirror this.
  auto fold_subgraphs = [&](bool additions) {
    const auto& concept_ix = additions ? add_concept_ix : del_concept_ix;
    const ChangeKind edge_kind = additions ? ChangeKind::add_relationship
                                           : ChangeKind::del_relationship;
    std::set<std::string> members;
    for (const auto& [acc, ix] : concept_ix)
      if (!consumed[ix]) members.insert(acc);
    if (members.size() < 2) return;

    std::vector<std::size_t> edge_ops;
    for (std::size_t i = 0; i < basic.size(); ++i)
      if (!consumed[i] && basic[i].kind == edge_kind && basic[i].edge &&
          basic[i].edge->hierarchical())
        edge_ops.push_back(i);

    // undirected components over edges internal to the member set
    std::map<std::string, std::string> rep;
    for (const auto& m : members) rep[m] = m;
    std::function<std::string(const std::string&)> find =
        [&](const std::string& x) {
          return rep[x] == x ? x : rep[x] = find(rep[x]);
        };
    for (std::size_t i : edge_ops) {
      const Relationship& e = *basic[i].edge;
      if (members.count(e.source) && members.count(e.target))
        rep[find(e.source)] = find(e.target);
    }
    std::map<std::string, std::vector<std::string>> components;
    for (const auto& m : members) components[find(m)].push_back(m);

    for (auto& [root_rep, comp] : components) {
      if (comp.size() < 2) continue;
      std::set<std::string> comp_set(comp.begin(), comp.end());
      std::vector<std::size_t> internal, external;
      std::set<std::string> anchors;
      std::map<std::string, std::size_t> parent_count;
      bool inbound_external = false;
      for (std::size_t i : edge_ops) {
        if (consumed[i]) continue;
        const Relationship& e = *basic[i].edge;
        bool s_in = comp_set.count(e.source) > 0;
        bool t_in = comp_set.count(e.target) > 0;
        if (s_in) ++parent_count[e.source];
        if (s_in && t_in) {
          internal.push_back(i);
        } else if (s_in && !t_in) {
          external.push_back(i);
          anchors.insert(e.target);
        } else if (!s_in && t_in) {
          inbound_external = true;
        }
      }
      // subtree shape: every member has exactly one parent edge, a single
      // external attachment edge, one anchor, no inbound edges
      bool unique_parents =
          parent_count.size() == comp.size() &&
          std::all_of(parent_count.begin(), parent_count.end(),
                      [](const auto& kv) { return kv.second == 1; });
      if (inbound_external || anchors.size() != 1 || external.size() != 1 ||
          internal.size() != comp.size() - 1 || !unique_parents)
        continue;
      ChangeOp op;
      op.kind = additions ? ChangeKind::add_subgraph : ChangeKind::del_subgraph;
      std::sort(comp.begin(), comp.end());
      op.subjects = comp;
      op.anchor = *anchors.begin();
      op.root = basic[external[0]].edge->source;
      const OntologyVersion& side = additions ? new_v : old_v;
      for (const auto& m : comp) {
        const Concept* c = side.find_concept(m);
        if (c) op.concepts.push_back(*c);
        consumed[concept_ix.at(m)] = true;
      }
      for (std::size_t i : internal) {
        op.edges.push_back(*basic[i].edge);
        consumed[i] = true;
      }
      op.edges.push_back(*basic[external[0]].edge);
      consumed[external[0]] = true;
      std::sort(op.edges.begin(), op.edges.end());
      complex_ops.push_back(std::move(op));
    }
  };
  fold_subgraphs(true);
  fold_subgraphs(false);

  std::vector<ChangeOp> result;
  for (std::size_t i = 0; i < basic.size(); ++i)
    if (!consumed[i]) result.push_back(std::move(basic[i]));
  for (auto& op : complex_ops) result.push_back(std::move(op));
  detail::canonical_sort(result);
  return result;
}

struct ConceptClassification {
  std::set<std::string> ext;
  std::set<std::string> red;
  std::set<std::string> rev;
};

// Per-concept aggregation over every operation naming it: concepts touched
// only by extension operations land in ext, only reductions in red, and any
// revision involvement or a mix of both lands in rev.
inline ConceptClassification classify_concepts(
    const std::vector<ChangeOp>& ops) {
  struct Flags {
    bool ext = false, red = false, rev = false;
  };
  std::map<std::string, Flags> flags;
  for (const auto& op : ops) {
    ChangeCategory cat = category_of(op.kind);
    for (const auto& acc : op.subjects) {
      Flags& f = flags[acc];
      if (cat == ChangeCategory::extension) f.ext = true;
      else if (cat == ChangeCategory::reduction) f.red = true;
      else f.rev = true;
    }
  }
  ConceptClassification out;
  for (const auto& [acc, f] : flags) {
    if (f.rev || (f.ext && f.red)) out.rev.insert(acc);
    else if (f.ext) out.ext.insert(acc);
    else out.red.insert(acc);
  }
  return out;
}

// Share of concepts touched by the change set, relative to the union of
// concepts across both versions. Two empty versions change nothing: 0.
inline double ontology_change_ratio(const ConceptClassification& cls,
                                    const OntologyVersion& old_v,
                                    const OntologyVersion& new_v) {
  std::set<std::string> universe;
  for (const auto& [acc, c] : old_v.concepts()) universe.insert(acc);
  for (const auto& [acc, c] : new_v.concepts()) universe.insert(acc);
  if (universe.empty()) return 0.0;
  std::size_t changed = cls.ext.size() + cls.red.size() + cls.rev.size();
  return static_cast<double>(changed) / static_cast<double>(universe.size());
}

// Replay a change set against the version it was computed from. Operations
// are applied in dependency phases (edge removals before concept removals,
// concept insertions before edge insertions, attribute changes last) so the
// result does not depend on the order of `ops`.
inline OntologyVersion apply_diff(const OntologyVersion& old_v,
                                  const std::vector<ChangeOp>& ops,
                                  int new_version_label,
                                  std::string release_date = {}) {
  std::map<std::string, Concept> concepts;
  for (const auto& [acc, c] : old_v.concepts()) concepts[acc] = c;
  std::set<Relationship> edges(old_v.relationships().begin(),
                               old_v.relationships().end());

  auto require_concept = [&](const std::string& acc,
                             const char* what) -> Concept& {
    auto it = concepts.find(acc);
    if (it == concepts.end())
      throw DataError(std::string(what) + ": accession '" + acc +
                      "' not present");
    return it->second;
  };
  auto erase_concept = [&](const std::string& acc, const char* what) {
    if (!concepts.erase(acc))
      throw DataError(std::string(what) + ": accession '" + acc +
                      "' not present");
  };
  auto insert_concept = [&](const Concept& c, const char* what) {
    if (!concepts.emplace(c.accession, c).second)
      throw DataError(std::string(what) + ": accession '" + c.accession +
                      "' already present");
  };
  auto erase_edge = [&](const Relationship& r, const char* what) {
    if (!edges.erase(r))
      throw DataError(std::string(what) + ": relationship '" + r.source +
                      "' -> '" + r.target + "' not present");
  };
  auto insert_edge = [&](const Relationship& r, const char* what) {
    if (!edges.insert(r).second)
      throw DataError(std::string(what) + ": relationship '" + r.source +
                      "' -> '" + r.target + "' already present");
  };
  auto apply_survivor_add = [](Concept& c, const std::string& attribute,
                               const std::string& value) {
    if (attribute == "synonym") c.synonyms.insert(value);
    else if (attribute == "replaced_by") c.replaced_by.insert(value);
    else if (attribute == "consider") c.consider.insert(value);
  };

  auto phase_of = [](const ChangeOp& op) -> int {
    switch (op.kind) {
      case ChangeKind::del_relationship: return 0;
      case ChangeKind::move: return 1;  // removals in phase 1, additions in 7
      case ChangeKind::del_subgraph: return 2;
      case ChangeKind::merge:
      case ChangeKind::split:
      case ChangeKind::substitute: return 3;
      case ChangeKind::del_concept: return 3;
      case ChangeKind::add_concept: return 4;
      case ChangeKind::add_subgraph: return 5;
      case ChangeKind::add_relationship: return 6;
      default: return 8;  // attribute and obsolete-flag operations
    }
  };

  std::vector<const ChangeOp*> ordered;
  ordered.reserve(ops.size());
  for (const auto& op : ops) ordered.push_back(&op);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [&](const ChangeOp* a, const ChangeOp* b) {
                     return phase_of(*a) < phase_of(*b);
                   });

  // moves contribute to two phases
  for (const ChangeOp* op : ordered)
    if (op->kind == ChangeKind::move)
      for (const auto& e : op->removed_edges) erase_edge(e, "move");

  for (const ChangeOp* p : ordered) {
    const ChangeOp& op = *p;
    switch (op.kind) {
      case ChangeKind::del_relationship:
        erase_edge(*op.edge, "del_relationship");
        break;
      case ChangeKind::move:
        break;  // handled above / below
      case ChangeKind::del_subgraph:
        for (const auto& e : op.edges) erase_edge(e, "del_subgraph");
        for (const auto& m : op.subjects) erase_concept(m, "del_subgraph");
        break;
      case ChangeKind::merge: {
        Concept& survivor = require_concept(op.target, "merge");
        for (const auto& [attribute, value] : op.survivor_adds)
          apply_survivor_add(survivor, attribute, value);
        for (const auto& s : op.subjects)
          if (s != op.target) erase_concept(s, "merge");
        break;
      }
      case ChangeKind::split:
        erase_concept(op.subjects[0], "split");
        for (const auto& c : op.concepts) insert_concept(c, "split");
        break;
      case ChangeKind::substitute:
        erase_concept(op.subjects[0], "substitute");
        insert_concept(op.concepts[0], "substitute");
        break;
      case ChangeKind::del_concept:
        erase_concept(op.subjects[0], "del_concept");
        break;
      case ChangeKind::add_concept:
        insert_concept(op.concepts[0], "add_concept");
        break;
      case ChangeKind::add_subgraph:
        for (const auto& c : op.concepts) insert_concept(c, "add_subgraph");
        for (const auto& e : op.edges) insert_edge(e, "add_subgraph");
        break;
      case ChangeKind::add_relationship:
        insert_edge(*op.edge, "add_relationship");
        break;
      case ChangeKind::add_attribute: {
        Concept& c = require_concept(op.subjects[0], "add_attribute");
        if (op.attribute == "name") c.name = op.new_value;
        else if (op.attribute == "definition") c.definition = op.new_value;
        else apply_survivor_add(c, op.attribute, op.new_value);
        break;
      }
      case ChangeKind::del_attribute: {
        Concept& c = require_concept(op.subjects[0], "del_attribute");
        if (op.attribute == "name") c.name.clear();
        else if (op.attribute == "definition") c.definition.reset();
        else if (op.attribute == "synonym") c.synonyms.erase(op.old_value);
        else if (op.attribute == "replaced_by") c.replaced_by.erase(op.old_value);
        else if (op.attribute == "consider") c.consider.erase(op.old_value);
        break;
      }
      case ChangeKind::change_attribute_value: {
        Concept& c = require_concept(op.subjects[0], "change_attribute_value");
        if (op.attribute == "name") c.name = op.new_value;
        else if (op.attribute == "definition") c.definition = op.new_value;
        break;
      }
      case ChangeKind::mark_obsolete:
        require_concept(op.subjects[0], "mark_obsolete").obsolete = true;
        break;
      case ChangeKind::mark_non_obsolete:
        require_concept(op.subjects[0], "mark_non_obsolete").obsolete = false;
        break;
    }
  }

  for (const ChangeOp* op : ordered)
    if (op->kind == ChangeKind::move)
      for (const auto& e : op->edges) insert_edge(e, "move");

  OntologyData data;
  data.ontology_id = old_v.ontology_id();
  data.version = new_version_label;
  data.release_date = std::move(release_date);
  for (auto& [acc, c] : concepts) data.concepts.push_back(std::move(c));
  data.relationships.assign(edges.begin(), edges.end());
  return OntologyVersion(std::move(data));
}

enum class ConceptSide { old_only, new_only, both };

inline std::string_view side_label(ConceptSide s) {
  switch (s) {
    case ConceptSide::old_only: return "old";
    case ConceptSide::new_only: return "new";
    default: return "both";
  }
}

struct DiffResult {
  std::string ontology_id;
  int old_version = 0;
  int new_version = 0;
  std::vector<ChangeOp> ops;
  std::set<std::string> ext_set;
  std::set<std::string> red_set;
  std::set<std::string> rev_set;
  std::map<std::string, ConceptSide> sides;
  double ocr = 0.0;
};

inline DiffResult compute_diff(const OntologyVersion& old_v,
                               const OntologyVersion& new_v) {
  DiffResult d;
  d.ontology_id = old_v.ontology_id();
  d.old_version = old_v.version();
  d.new_version = new_v.version();
  d.ops = detect_complex_changes(old_v, new_v,
                                 compute_basic_diff(old_v, new_v));
  ConceptClassification cls = classify_concepts(d.ops);
  d.ext_set = std::move(cls.ext);
  d.red_set = std::move(cls.red);
  d.rev_set = std::move(cls.rev);
  d.ocr = ontology_change_ratio(
      ConceptClassification{d.ext_set, d.red_set, d.rev_set}, old_v, new_v);
  auto tag_side = [&](const std::set<std::string>& s) {
    for (const auto& acc : s) {
      bool in_old = old_v.contains(acc), in_new = new_v.contains(acc);
      d.sides[acc] = in_old && in_new
                         ? ConceptSide::both
                         : (in_old ? ConceptSide::old_only
                                   : ConceptSide::new_only);
    }
  };
  tag_side(d.ext_set);
  tag_side(d.red_set);
  tag_side(d.rev_set);
  return d;
}

// --- JSON -------------------------------------------------------------------

inline nlohmann::json to_json(const ChangeOp& op) {
  nlohmann::json j;
  j["kind"] = std::string(change_kind_label(op.kind));
  j["subjects"] = op.subjects;
  switch (op.kind) {
    case ChangeKind::add_attribute:
      j["attribute"] = op.attribute;
      j["value"] = op.new_value;
      break;
    case ChangeKind::del_attribute:
      j["attribute"] = op.attribute;
      j["value"] = op.old_value;
      break;
    case ChangeKind::change_attribute_value:
      j["attribute"] = op.attribute;
      j["old_value"] = op.old_value;
      j["new_value"] = op.new_value;
      break;
    case ChangeKind::add_relationship:
    case ChangeKind::del_relationship:
      j["edge"] = to_json(*op.edge);
      break;
    case ChangeKind::add_concept:
      j["concept"] = to_json(op.concepts[0]);
      break;
    case ChangeKind::merge: {
      auto adds = nlohmann::json::array();
      for (const auto& [attribute, value] : op.survivor_adds)
        adds.push_back({{"attribute", attribute}, {"value", value}});
      j["target"] = op.target;
      j["survivor_adds"] = std::move(adds);
      break;
    }
    case ChangeKind::split: {
      auto reps = nlohmann::json::array();
      for (const auto& c : op.concepts) reps.push_back(to_json(c));
      j["old"] = op.subjects[0];
      j["replacements"] = std::move(reps);
      break;
    }
    case ChangeKind::substitute:
      j["old"] = op.subjects[0];
      j["replacement"] = to_json(op.concepts[0]);
      break;
    case ChangeKind::move: {
      auto removed = nlohmann::json::array();
      for (const auto& e : op.removed_edges) removed.push_back(to_json(e));
      auto added = nlohmann::json::array();
      for (const auto& e : op.edges) added.push_back(to_json(e));
      j["removed_edges"] = std::move(removed);
      j["added_edges"] = std::move(added);
      break;
    }
    case ChangeKind::add_subgraph:
    case ChangeKind::del_subgraph: {
      auto members = nlohmann::json::array();
      for (const auto& c : op.concepts) members.push_back(to_json(c));
      auto es = nlohmann::json::array();
      for (const auto& e : op.edges) es.push_back(to_json(e));
      j["anchor"] = op.anchor;
      j["root"] = op.root;
      j["concepts"] = std::move(members);
      j["edges"] = std::move(es);
      break;
    }
    default:
      break;
  }
  return j;
}

inline ChangeOp change_op_from_json(const nlohmann::json& j) {
  ChangeOp op;
  op.kind = change_kind_from_label(j.at("kind").get<std::string>());
  op.subjects = j.at("subjects").get<std::vector<std::string>>();
  switch (op.kind) {
    case ChangeKind::add_attribute:
      op.attribute = j.at("attribute").get<std::string>();
      op.new_value = j.at("value").get<std::string>();
      break;
    case ChangeKind::del_attribute:
      op.attribute = j.at("attribute").get<std::string>();
      op.old_value = j.at("value").get<std::string>();
      break;
    case ChangeKind::change_attribute_value:
      op.attribute = j.at("attribute").get<std::string>();
      op.old_value = j.at("old_value").get<std::string>();
      op.new_value = j.at("new_value").get<std::string>();
      break;
    case ChangeKind::add_relationship:
    case ChangeKind::del_relationship:
      op.edge = relationship_from_json(j.at("edge"));
      break;
    case ChangeKind::add_concept:
      op.concepts = {concept_from_json(j.at("concept"))};
      break;
    case ChangeKind::merge:
      op.target = j.at("target").get<std::string>();
      for (const auto& a : j.at("survivor_adds"))
        op.survivor_adds.emplace_back(a.at("attribute").get<std::string>(),
                                      a.at("value").get<std::string>());
      break;
    case ChangeKind::split:
      for (const auto& c : j.at("replacements"))
        op.concepts.push_back(concept_from_json(c));
      break;
    case ChangeKind::substitute:
      op.concepts = {concept_from_json(j.at("replacement"))};
      break;
    case ChangeKind::move:
      for (const auto& e : j.at("removed_edges"))
        op.removed_edges.push_back(relationship_from_json(e));
      for (const auto& e : j.at("added_edges"))
        op.edges.push_back(relationship_from_json(e));
      break;
    case ChangeKind::add_subgraph:
    case ChangeKind::del_subgraph:
      op.anchor = j.at("anchor").get<std::string>();
      op.root = j.at("root").get<std::string>();
      for (const auto& c : j.at("concepts"))
        op.concepts.push_back(concept_from_json(c));
      for (const auto& e : j.at("edges"))
        op.edges.push_back(relationship_from_json(e));
      break;
    default:
      break;
  }
  return op;
}

inline nlohmann::json to_json(const DiffResult& d) {
  nlohmann::json j;
  j["ontology_id"] = d.ontology_id;
  j["old_version"] = d.old_version;
  j["new_version"] = d.new_version;
  j["ocr"] = d.ocr;
  auto ops = nlohmann::json::array();
  for (const auto& op : d.ops) ops.push_back(to_json(op));
  j["ops"] = std::move(ops);
  auto dump_set = [&](const std::set<std::string>& s) {
    auto arr = nlohmann::json::array();
    for (const auto& acc : s) {
      auto side_it = d.sides.find(acc);
      arr.push_back(
          {{"accession", acc},
           {"side", side_it == d.sides.end()
                        ? "both"
                        : std::string(side_label(side_it->second))}});
    }
    return arr;
  };
  j["ext"] = dump_set(d.ext_set);
  j["red"] = dump_set(d.red_set);
  j["rev"] = dump_set(d.rev_set);
  return j;
}

inline DiffResult diff_from_json(const nlohmann::json& j) {
  DiffResult d;
  d.ontology_id = j.value("ontology_id", std::string{});
  d.old_version = j.value("old_version", 0);
  d.new_version = j.value("new_version", 0);
  d.ocr = j.value("ocr", 0.0);
  for (const auto& op : j.value("ops", nlohmann::json::array()))
    d.ops.push_back(change_op_from_json(op));
  auto load_set = [&](const char* key, std::set<std::string>& out) {
    for (const auto& e : j.value(key, nlohmann::json::array())) {
      std::string acc = e.at("accession").get<std::string>();
      std::string side = e.value("side", "both");
      d.sides[acc] = side == "old" ? ConceptSide::old_only
                                   : side == "new" ? ConceptSide::new_only
                                                   : ConceptSide::both;
      out.insert(std::move(acc));
    }
  };
  load_set("ext", d.ext_set);
  load_set("red", d.red_set);
  load_set("rev", d.rev_set);
  return d;
}

}  // namespace ontomap
