#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kinfuse/mcq.hpp"

namespace kinfuse {

enum PosTag : std::uint8_t {
  kPosVerb = 1 << 0,
  kPosAdj = 1 << 1,
  kPosAdv = 1 << 2,
  kPosNoun = 1 << 3,
  kPosOther = 1 << 4,
};

std::uint8_t parse_pos_tag(std::string_view tag);

/// Static word -> coarse POS tag set lookup, case-insensitive.
class PosLexicon {
 public:
  void add(std::string_view word, std::uint8_t tags);
  /// Tag bitmask, or nullopt for unknown words.
  std::optional<std::uint8_t> lookup(std::string_view word) const;
  std::size_t size() const { return tags_.size(); }

  /// TSV word<TAB>tag, one tag per line; a word may repeat with more tags.
  static PosLexicon load(const std::filesystem::path& path);

 private:
  std::unordered_map<std::string, std::uint8_t> tags_;
};

using StopwordSet = std::set<std::string, std::less<>>;

const StopwordSet& default_stopwords();
StopwordSet load_stopwords(const std::filesystem::path& path);

struct QueryConfig {
  StopwordSet stopwords = default_stopwords();
  std::optional<PosLexicon> lexicon;
  bool pos_filter = false;
};

struct Query {
  std::map<std::string, std::size_t> terms;  // term -> count
  std::string item_id;
  std::size_t option_index = 0;

  /// Terms expanded by multiplicity, in lexicographic order.
  std::vector<std::string> bag() const;
  /// Distinct terms joined by single spaces.
  std::string text() const;
};

/// Tokens of "context question option" minus stopwords (and, with
/// pos_filter on and a lexicon present, minus words tagged only OTHER).
/// Throws EmptyQueryError when nothing survives.
Query generate_query(const McqItem& item, std::size_t option_index, const QueryConfig& config);

}  // namespace kinfuse
