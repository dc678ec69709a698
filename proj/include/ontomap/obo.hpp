#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ontomap/ontology.hpp"

namespace ontomap {

// Tags ignored inside [Term] stanzas are not an error; they are counted so
// callers can report what was skipped.
struct ParseWarnings {
  std::map<std::string, std::size_t> unknown_term_tags;
  std::size_t skipped_stanzas = 0;

  std::size_t total() const {
    std::size_t n = skipped_stanzas;
    for (const auto& [tag, count] : unknown_term_tags) n += count;
    return n;
  }

  std::string summary() const {
    std::ostringstream os;
    if (unknown_term_tags.empty() && skipped_stanzas == 0) return "none";
    bool first = true;
    for (const auto& [tag, count] : unknown_term_tags) {
      if (!first) os << ", ";
      os << tag << " x" << count;
      first = false;
    }
    if (skipped_stanzas) {
      if (!first) os << ", ";
      os << skipped_stanzas << " non-Term stanza(s) skipped";
    }
    return os.str();
  }
};

struct RawParse {
  OntologyData data;
  ParseWarnings warnings;
};

struct ParseResult {
  OntologyVersion version;
  ParseWarnings warnings;
};

namespace detail {

inline std::string strip(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Remove a trailing " ! ..." comment and any "{...}" trailing modifier from
// an unquoted tag value.
inline std::string strip_value_decorations(std::string_view value) {
  std::size_t cut = value.size();
  for (std::size_t i = 0; i + 1 < value.size(); ++i) {
    if (value[i] == ' ' && value[i + 1] == '!') {
      cut = i;
      break;
    }
  }
  std::string_view v = value.substr(0, cut);
  if (auto brace = v.find('{'); brace != std::string_view::npos)
    v = v.substr(0, brace);
  return strip(v);
}

// Extract the leading quoted segment of a def/synonym value, honouring
// backslash escapes.
inline std::string extract_quoted(std::string_view value, std::size_t line) {
  std::string v = strip(value);
  if (v.empty() || v.front() != '"')
    throw ParseError("expected quoted text", line);
  std::string out;
  for (std::size_t i = 1; i < v.size(); ++i) {
    char c = v[i];
    if (c == '\\' && i + 1 < v.size()) {
      out.push_back(v[++i]);
    } else if (c == '"') {
      return out;
    } else {
      out.push_back(c);
    }
  }
  throw ParseError("unterminated quoted text", line);
}

inline std::string escape_quoted(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

// Parse the supported OBO 1.2 subset into raw ontology data. Recognised
// [Term] tags: id, name, synonym, def, is_a, relationship, is_obsolete,
// replaced_by, consider. Synonym scope markers are flattened into one
// synonym set. Header tags `ontology:` and `data-version:` feed the
// ontology id and release date.
inline RawParse parse_obo_data(std::string_view text) {
  RawParse result;
  OntologyData& data = result.data;

  enum class Section { header, term, skipped };
  Section section = Section::header;

  Concept current;
  std::size_t stanza_line = 0;
  bool has_id = false;
  std::set<std::string> seen;

  auto flush_term = [&]() {
    if (section != Section::term) return;
    if (!has_id) throw ParseError("[Term] stanza without id", stanza_line);
    if (!seen.insert(current.accession).second)
      throw ParseError("duplicate accession '" + current.accession + "'",
                       stanza_line);
    data.concepts.push_back(std::move(current));
    current = Concept{};
    has_id = false;
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view raw = eol == std::string_view::npos
                               ? text.substr(pos)
                               : text.substr(pos, eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    std::string line = detail::strip(raw);
    if (line.empty() || line.front() == '!') continue;

    if (line.front() == '[') {
      flush_term();
      if (line == "[Term]") {
        section = Section::term;
        stanza_line = line_no;
      } else {
        ++result.warnings.skipped_stanzas;
        section = Section::skipped;
      }
      continue;
    }

    auto colon = line.find(':');
    if (colon == std::string::npos)
      throw ParseError("expected 'tag: value'", line_no);
    std::string tag = detail::strip(line.substr(0, colon));
    std::string value = detail::strip(line.substr(colon + 1));

    if (section == Section::header) {
      if (tag == "ontology") data.ontology_id = detail::strip_value_decorations(value);
      else if (tag == "data-version") data.release_date = detail::strip_value_decorations(value);
      continue;
    }
    if (section == Section::skipped) continue;

    if (tag == "id") {
      if (has_id) throw ParseError("duplicate id tag in stanza", line_no);
      current.accession = detail::strip_value_decorations(value);
      if (current.accession.empty()) throw ParseError("empty id", line_no);
      has_id = true;
    } else if (!has_id) {
      throw ParseError("id must be the first tag in a [Term] stanza", line_no);
    } else if (tag == "name") {
      current.name = detail::strip_value_decorations(value);
    } else if (tag == "def") {
      current.definition = detail::extract_quoted(value, line_no);
    } else if (tag == "synonym") {
      current.synonyms.insert(detail::extract_quoted(value, line_no));
    } else if (tag == "is_a") {
      std::string target = detail::strip_value_decorations(value);
      if (target.empty()) throw ParseError("empty is_a target", line_no);
      data.relationships.push_back(
          Relationship{current.accession, target, RelationKind::is_a, {}});
    } else if (tag == "relationship") {
      std::string body = detail::strip_value_decorations(value);
      auto space = body.find(' ');
      if (space == std::string::npos)
        throw ParseError("expected 'relationship: TYPE ID'", line_no);
      std::string label = detail::strip(body.substr(0, space));
      std::string target = detail::strip(body.substr(space + 1));
      if (label.empty() || target.empty())
        throw ParseError("expected 'relationship: TYPE ID'", line_no);
      data.relationships.push_back(
          make_relationship(current.accession, target, label));
    } else if (tag == "is_obsolete") {
      current.obsolete = detail::strip_value_decorations(value) == "true";
    } else if (tag == "replaced_by") {
      current.replaced_by.insert(detail::strip_value_decorations(value));
    } else if (tag == "consider") {
      current.consider.insert(detail::strip_value_decorations(value));
    } else {
      ++result.warnings.unknown_term_tags[tag];
    }
  }
  flush_term();
  return result;
}

inline ParseResult parse_ontology(std::string_view text) {
  RawParse raw = parse_obo_data(text);
  return ParseResult{OntologyVersion(std::move(raw.data)),
                     std::move(raw.warnings)};
}

inline ParseResult parse_ontology_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_ontology(buf.str());
  } catch (const Error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// Serialize a version back to the supported OBO subset. parse(to_obo(v))
// reproduces v up to the ordinal version number, which OBO cannot carry.
inline std::string to_obo(const OntologyVersion& v) {
  std::ostringstream os;
  os << "format-version: 1.2\n";
  if (!v.ontology_id().empty()) os << "ontology: " << v.ontology_id() << "\n";
  if (!v.release_date().empty())
    os << "data-version: " << v.release_date() << "\n";

  std::map<std::string, std::vector<const Relationship*>> by_source;
  for (const auto& r : v.relationships()) by_source[r.source].push_back(&r);

  for (const auto& [acc, c] : v.concepts()) {
    os << "\n[Term]\n";
    os << "id: " << acc << "\n";
    if (!c.name.empty()) os << "name: " << c.name << "\n";
    if (c.definition)
      os << "def: \"" << detail::escape_quoted(*c.definition) << "\" []\n";
    for (const auto& s : c.synonyms)
      os << "synonym: \"" << detail::escape_quoted(s) << "\" RELATED []\n";
    for (const Relationship* r : by_source[acc]) {
      if (r->kind == RelationKind::is_a)
        os << "is_a: " << r->target << "\n";
      else
        os << "relationship: " << r->kind_label() << " " << r->target << "\n";
    }
    if (c.obsolete) os << "is_obsolete: true\n";
    for (const auto& s : c.replaced_by) os << "replaced_by: " << s << "\n";
    for (const auto& s : c.consider) os << "consider: " << s << "\n";
  }
  return os.str();
}

}  // namespace ontomap
