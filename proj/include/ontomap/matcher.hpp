#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ontomap/ontology.hpp"

namespace ontomap {

// --- trigram string similarity ----------------------------------------------

// Lowercase, trim, collapse whitespace runs to single spaces.
inline std::string normalize_text(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char raw : s) {
    unsigned char c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      if (!out.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

namespace detail {

constexpr char kTrigramBegin = '\x02';
constexpr char kTrigramEnd = '\x03';

inline std::uint32_t trigram_code(char a, char b, char c) {
  return (static_cast<std::uint32_t>(static_cast<unsigned char>(a)) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b)) << 8) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(c));
}

// Count of elements shared by two sorted multisets.
inline std::size_t multiset_overlap(const std::vector<std::uint32_t>& a,
                                    const std::vector<std::uint32_t>& b) {
  std::size_t i = 0, j = 0, shared = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++shared;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return shared;
}

}  // namespace detail

// Sorted multiset of character trigrams over the padded normalized string.
// Two boundary sentinels on each side give every non-empty string at least
// one trigram. The input must already be normalized.
inline std::vector<std::uint32_t> trigram_multiset(std::string_view normalized) {
  std::vector<std::uint32_t> out;
  if (normalized.empty()) return out;
  std::string padded;
  padded.reserve(normalized.size() + 4);
  padded.push_back(detail::kTrigramBegin);
  padded.push_back(detail::kTrigramBegin);
  padded.append(normalized);
  padded.push_back(detail::kTrigramEnd);
  padded.push_back(detail::kTrigramEnd);
  out.reserve(padded.size() - 2);
  for (std::size_t i = 0; i + 2 < padded.size(); ++i)
    out.push_back(detail::trigram_code(padded[i], padded[i + 1], padded[i + 2]));
  std::sort(out.begin(), out.end());
  return out;
}

// Dice coefficient over the padded trigram multisets of the normalized
// strings. Both strings empty compare equal (1); exactly one empty gives 0.
inline double trigram_similarity(std::string_view s1, std::string_view s2) {
  std::string n1 = normalize_text(s1);
  std::string n2 = normalize_text(s2);
  if (n1.empty() || n2.empty()) return n1.empty() && n2.empty() ? 1.0 : 0.0;
  std::vector<std::uint32_t> t1 = trigram_multiset(n1);
  std::vector<std::uint32_t> t2 = trigram_multiset(n2);
  std::size_t shared = detail::multiset_overlap(t1, t2);
  return 2.0 * static_cast<double>(shared) /
         static_cast<double>(t1.size() + t2.size());
}

// --- match strategies ---------------------------------------------------------

enum class MatchStrategy { name, namesyn, context };

inline std::string_view strategy_label(MatchStrategy s) {
  switch (s) {
    case MatchStrategy::name: return "name";
    case MatchStrategy::namesyn: return "namesyn";
    default: return "context";
  }
}

inline MatchStrategy strategy_from_label(std::string_view label) {
  if (label == "name") return MatchStrategy::name;
  if (label == "namesyn") return MatchStrategy::namesyn;
  if (label == "context") return MatchStrategy::context;
  throw ConfigError("unknown match strategy '" + std::string(label) + "'");
}

struct MatcherConfig {
  MatchStrategy strategy = MatchStrategy::name;
  double threshold = 0.6;
  double max_delta = 0.02;

  void validate() const {
    if (!(threshold >= 0.0 && threshold <= 1.0))
      throw ConfigError("threshold must be in [0,1]");
    if (!(max_delta >= 0.0 && max_delta <= 1.0))
      throw ConfigError("max_delta must be in [0,1]");
  }

  // Human-readable tag used in reports, e.g. "namesyn 0.6".
  std::string label() const {
    std::ostringstream os;
    os << strategy_label(strategy) << ' ' << threshold;
    return os.str();
  }

  friend bool operator==(const MatcherConfig&, const MatcherConfig&) = default;
};

// Concatenation of sorted parent names, the concept's own name, and sorted
// children names; empty segments drop out.
inline std::string context_string(const OntologyVersion& v, const Concept& c) {
  std::vector<std::string> parts;
  auto add_names = [&](const std::vector<std::string>& accessions) {
    std::vector<std::string> names;
    for (const auto& acc : accessions) {
      const Concept* n = v.find_concept(acc);
      if (n && !n->name.empty()) names.push_back(n->name);
    }
    std::sort(names.begin(), names.end());
    for (auto& n : names) parts.push_back(std::move(n));
  };
  add_names(v.parents_of(c.accession));
  if (!c.name.empty()) parts.push_back(c.name);
  add_names(v.children_of(c.accession));
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out.push_back(' ');
    out += p;
  }
  return out;
}

// The raw strings a strategy consults for one concept.
inline std::vector<std::string> match_strings(const OntologyVersion& v,
                                              const Concept& c,
                                              MatchStrategy strategy) {
  switch (strategy) {
    case MatchStrategy::name:
      return {c.name};
    case MatchStrategy::namesyn: {
      std::vector<std::string> out{c.name};
      out.insert(out.end(), c.synonyms.begin(), c.synonyms.end());
      return out;
    }
    default:
      return {context_string(v, c)};
  }
}

// Pairwise concept similarity: the maximum trigram similarity over the
// cross product of the strategy strings of both concepts.
inline double concept_similarity(const OntologyVersion& v1, const Concept& c1,
                                 const OntologyVersion& v2, const Concept& c2,
                                 MatchStrategy strategy) {
  double best = 0.0;
  for (const auto& s1 : match_strings(v1, c1, strategy))
    for (const auto& s2 : match_strings(v2, c2, strategy))
      best = std::max(best, trigram_similarity(s1, s2));
  return best;
}

// --- mapping -----------------------------------------------------------------

struct Correspondence {
  std::string left;
  std::string right;
  double confidence = 0.0;

  friend bool operator==(const Correspondence&, const Correspondence&) = default;
};

struct Mapping {
  std::string left_ontology;
  std::string right_ontology;
  int left_version = 0;
  int right_version = 0;
  MatcherConfig config;
  std::vector<Correspondence> correspondences;  // sorted by (left, right)

  std::size_t size() const { return correspondences.size(); }

  std::set<std::pair<std::string, std::string>> pair_set() const {
    std::set<std::pair<std::string, std::string>> s;
    for (const auto& c : correspondences) s.emplace(c.left, c.right);
    return s;
  }
};

// --- trigram index -------------------------------------------------------------

// Inverted index trigram -> (string id, occurrence count) over the strategy
// strings of every non-obsolete concept of one version. A candidate that
// shares no trigram with a probe has similarity 0, so for any positive
// threshold the postings walk finds every qualifying pair.
class TrigramIndex {
 public:
  TrigramIndex() = default;

  TrigramIndex(const OntologyVersion& version, MatchStrategy strategy) {
    for (const auto& [acc, c] : version.concepts()) {
      if (c.obsolete) continue;
      std::uint32_t concept_id =
          static_cast<std::uint32_t>(accessions_.size());
      accessions_.push_back(acc);
      for (const auto& raw : match_strings(version, c, strategy)) {
        std::string n = normalize_text(raw);
        if (n.empty()) continue;
        std::vector<std::uint32_t> trigrams = trigram_multiset(n);
        std::uint32_t string_id = static_cast<std::uint32_t>(string_concept_.size());
        string_concept_.push_back(concept_id);
        string_sizes_.push_back(static_cast<std::uint32_t>(trigrams.size()));
        for (std::size_t i = 0; i < trigrams.size();) {
          std::size_t j = i;
          while (j < trigrams.size() && trigrams[j] == trigrams[i]) ++j;
          postings_[trigrams[i]].emplace_back(string_id,
                                              static_cast<std::uint32_t>(j - i));
          i = j;
        }
      }
    }
  }

  std::size_t concept_count() const { return accessions_.size(); }
  std::size_t string_count() const { return string_concept_.size(); }
  const std::vector<std::string>& accessions() const { return accessions_; }

  // Reusable scratch space for one scoring worker.
  struct Scratch {
    std::vector<std::uint32_t> shared;      // per string id
    std::vector<std::uint32_t> touched_strings;
    std::vector<double> best;               // per concept id
    std::vector<std::uint32_t> touched_concepts;
  };

  Scratch make_scratch() const {
    Scratch s;
    s.shared.assign(string_count(), 0);
    s.best.assign(concept_count(), 0.0);
    return s;
  }

  // Best similarity per indexed concept against the probe strings (already
  // normalized and trigrammed); candidates below `threshold` are skipped.
  // Appends (concept id, score) pairs ordered by concept id.
  void best_scores(const std::vector<std::vector<std::uint32_t>>& probes,
                   double threshold, Scratch& scratch,
                   std::vector<std::pair<std::uint32_t, double>>& out) const {
    for (const auto& trigrams : probes) {
      if (trigrams.empty()) continue;
      for (std::size_t i = 0; i < trigrams.size();) {
        std::size_t j = i;
        while (j < trigrams.size() && trigrams[j] == trigrams[i]) ++j;
        std::uint32_t probe_count = static_cast<std::uint32_t>(j - i);
        auto it = postings_.find(trigrams[i]);
        if (it != postings_.end()) {
          for (const auto& [string_id, count] : it->second) {
            if (scratch.shared[string_id] == 0)
              scratch.touched_strings.push_back(string_id);
            scratch.shared[string_id] += std::min(probe_count, count);
          }
        }
        i = j;
      }
      for (std::uint32_t string_id : scratch.touched_strings) {
        double sim = 2.0 * static_cast<double>(scratch.shared[string_id]) /
                     static_cast<double>(trigrams.size() + string_sizes_[string_id]);
        scratch.shared[string_id] = 0;
        std::uint32_t concept_id = string_concept_[string_id];
        if (sim > scratch.best[concept_id]) {
          if (scratch.best[concept_id] == 0.0)
            scratch.touched_concepts.push_back(concept_id);
          scratch.best[concept_id] = sim;
        }
      }
      scratch.touched_strings.clear();
    }
    std::sort(scratch.touched_concepts.begin(), scratch.touched_concepts.end());
    for (std::uint32_t concept_id : scratch.touched_concepts) {
      double sim = scratch.best[concept_id];
      scratch.best[concept_id] = 0.0;
      if (sim >= threshold) out.emplace_back(concept_id, sim);
    }
    scratch.touched_concepts.clear();
  }

 private:
  std::vector<std::string> accessions_;
  std::vector<std::uint32_t> string_concept_;
  std::vector<std::uint32_t> string_sizes_;
  std::unordered_map<std::uint32_t,
                     std::vector<std::pair<std::uint32_t, std::uint32_t>>>
      postings_;
};

inline TrigramIndex build_trigram_index(const OntologyVersion& version,
                                        MatchStrategy strategy) {
  return TrigramIndex(version, strategy);
}

namespace detail {

struct ScoredPair {
  std::uint32_t left;
  std::uint32_t right;
  double confidence;
};

// Retain only pairs within max_delta of the best confidence seen from both
// of their endpoints: each concept contributes only its top candidates.
inline std::vector<ScoredPair> max_delta_select(std::vector<ScoredPair> pairs,
                                                double max_delta) {
  std::unordered_map<std::uint32_t, double> best_left, best_right;
  for (const auto& p : pairs) {
    auto& bl = best_left[p.left];
    bl = std::max(bl, p.confidence);
    auto& br = best_right[p.right];
    br = std::max(br, p.confidence);
  }
  std::vector<ScoredPair> kept;
  kept.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (p.confidence >= best_left[p.left] - max_delta &&
        p.confidence >= best_right[p.right] - max_delta)
      kept.push_back(p);
  }
  return kept;
}

}  // namespace detail

// Match two versions: score candidate pairs (obsolete concepts excluded),
// drop those below the threshold, then apply MaxDelta selection. A positive
// threshold uses the trigram index; threshold 0 falls back to exhaustive
// pairwise scoring. Output is deterministic for given inputs and config.
inline Mapping match(const OntologyVersion& o1, const OntologyVersion& o2,
                     const MatcherConfig& config, unsigned jobs = 0) {
  config.validate();

  std::vector<std::string> left_accessions;
  std::vector<std::vector<std::vector<std::uint32_t>>> left_probes;
  for (const auto& [acc, c] : o1.concepts()) {
    if (c.obsolete) continue;
    left_accessions.push_back(acc);
    std::vector<std::vector<std::uint32_t>> probes;
    for (const auto& raw : match_strings(o1, c, config.strategy)) {
      std::string n = normalize_text(raw);
      if (!n.empty()) probes.push_back(trigram_multiset(n));
    }
    left_probes.push_back(std::move(probes));
  }

  std::vector<detail::ScoredPair> pairs;

  if (config.threshold > 0.0) {
    TrigramIndex index(o2, config.strategy);
    unsigned workers = jobs ? jobs : std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
    std::size_t n = left_accessions.size();
    workers = static_cast<unsigned>(
        std::min<std::size_t>(workers, std::max<std::size_t>(n / 512, 1)));

    auto score_range = [&](std::size_t begin, std::size_t end) {
      std::vector<detail::ScoredPair> local;
      TrigramIndex::Scratch scratch = index.make_scratch();
      std::vector<std::pair<std::uint32_t, double>> hits;
      for (std::size_t i = begin; i < end; ++i) {
        hits.clear();
        index.best_scores(left_probes[i], config.threshold, scratch, hits);
        for (const auto& [right_id, sim] : hits)
          local.push_back({static_cast<std::uint32_t>(i), right_id, sim});
      }
      return local;
    };

    if (workers <= 1) {
      pairs = score_range(0, n);
    } else {
      std::vector<std::future<std::vector<detail::ScoredPair>>> futures;
      std::size_t chunk = (n + workers - 1) / workers;
      for (unsigned w = 0; w < workers; ++w) {
        std::size_t begin = w * chunk;
        std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        futures.push_back(std::async(std::launch::async, score_range, begin, end));
      }
      for (auto& f : futures) {
        auto local = f.get();
        pairs.insert(pairs.end(), local.begin(), local.end());
      }
    }

    pairs = detail::max_delta_select(std::move(pairs), config.max_delta);

    Mapping m;
    m.left_ontology = o1.ontology_id();
    m.right_ontology = o2.ontology_id();
    m.left_version = o1.version();
    m.right_version = o2.version();
    m.config = config;
    m.correspondences.reserve(pairs.size());
    for (const auto& p : pairs)
      m.correspondences.push_back(
          {left_accessions[p.left], index.accessions()[p.right], p.confidence});
    std::sort(m.correspondences.begin(), m.correspondences.end(),
              [](const Correspondence& a, const Correspondence& b) {
                return std::tie(a.left, a.right) < std::tie(b.left, b.right);
              });
    return m;
  }

  // exhaustive path (threshold 0 keeps every pair before selection)
  std::vector<std::string> right_accessions;
  for (const auto& [acc, c] : o2.concepts())
    if (!c.obsolete) right_accessions.push_back(acc);
  for (std::size_t i = 0; i < left_accessions.size(); ++i) {
    const Concept& c1 = *o1.find_concept(left_accessions[i]);
    for (std::size_t j = 0; j < right_accessions.size(); ++j) {
      const Concept& c2 = *o2.find_concept(right_accessions[j]);
      double sim = concept_similarity(o1, c1, o2, c2, config.strategy);
      if (sim >= config.threshold)
        pairs.push_back({static_cast<std::uint32_t>(i),
                         static_cast<std::uint32_t>(j), sim});
    }
  }
  pairs = detail::max_delta_select(std::move(pairs), config.max_delta);

  Mapping m;
  m.left_ontology = o1.ontology_id();
  m.right_ontology = o2.ontology_id();
  m.left_version = o1.version();
  m.right_version = o2.version();
  m.config = config;
  for (const auto& p : pairs)
    m.correspondences.push_back(
        {left_accessions[p.left], right_accessions[p.right], p.confidence});
  std::sort(m.correspondences.begin(), m.correspondences.end(),
            [](const Correspondence& a, const Correspondence& b) {
              return std::tie(a.left, a.right) < std::tie(b.left, b.right);
            });
  return m;
}

// --- serialization -------------------------------------------------------------

inline std::string format_confidence(double c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", c);
  return buf;
}

inline std::string mapping_tsv(const Mapping& m) {
  std::ostringstream os;
  os << "left_accession\tright_accession\tconfidence\n";
  for (const auto& c : m.correspondences)
    os << c.left << '\t' << c.right << '\t' << format_confidence(c.confidence)
       << '\n';
  return os.str();
}

inline nlohmann::json mapping_meta_json(const Mapping& m) {
  return {{"left_ontology", m.left_ontology},
          {"right_ontology", m.right_ontology},
          {"left_version", m.left_version},
          {"right_version", m.right_version},
          {"strategy", std::string(strategy_label(m.config.strategy))},
          {"threshold", m.config.threshold},
          {"max_delta", m.config.max_delta},
          {"size", m.size()}};
}

inline std::filesystem::path mapping_meta_path(const std::filesystem::path& tsv) {
  std::filesystem::path p = tsv;
  p += ".meta.json";
  return p;
}

inline void write_mapping(const Mapping& m, const std::filesystem::path& tsv) {
  {
    std::ofstream out(tsv, std::ios::binary);
    if (!out) throw DataError("cannot write '" + tsv.string() + "'");
    out << mapping_tsv(m);
  }
  std::ofstream meta(mapping_meta_path(tsv), std::ios::binary);
  if (!meta)
    throw DataError("cannot write '" + mapping_meta_path(tsv).string() + "'");
  meta << mapping_meta_json(m).dump(2) << '\n';
}

inline Mapping read_mapping(const std::filesystem::path& tsv) {
  std::ifstream in(tsv, std::ios::binary);
  if (!in) throw DataError("cannot open '" + tsv.string() + "'");
  Mapping m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "left_accession\tright_accession\tconfidence")
        throw ParseError("unexpected mapping TSV header", 1);
      continue;
    }
    std::istringstream ls(line);
    Correspondence c;
    std::string conf;
    if (!std::getline(ls, c.left, '\t') || !std::getline(ls, c.right, '\t') ||
        !std::getline(ls, conf, '\t'))
      throw ParseError("expected 3 tab-separated columns", line_no);
    try {
      c.confidence = std::stod(conf);
    } catch (const std::exception&) {
      throw ParseError("bad confidence value '" + conf + "'", line_no);
    }
    m.correspondences.push_back(std::move(c));
  }

  std::filesystem::path meta_path = mapping_meta_path(tsv);
  std::ifstream meta(meta_path, std::ios::binary);
  if (!meta)
    throw DataError("missing mapping sidecar '" + meta_path.string() + "'");
  nlohmann::json j = nlohmann::json::parse(meta);
  m.left_ontology = j.value("left_ontology", std::string{});
  m.right_ontology = j.value("right_ontology", std::string{});
  m.left_version = j.value("left_version", 0);
  m.right_version = j.value("right_version", 0);
  m.config.strategy = strategy_from_label(j.value("strategy", "name"));
  m.config.threshold = j.value("threshold", 0.6);
  m.config.max_delta = j.value("max_delta", 0.02);
  return m;
}

}  // namespace ontomap
