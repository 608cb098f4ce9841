#include "kinfuse/querygen.hpp"

#include "kinfuse/error.hpp"
#include "kinfuse/io.hpp"
#include "kinfuse/text.hpp"

namespace kinfuse {

namespace detail {
extern const std::string_view kBuiltinStopwords;
}

std::uint8_t parse_pos_tag(std::string_view tag) {
  auto t = text::to_lower(tag);
  if (t == "verb") return kPosVerb;
  if (t == "adj") return kPosAdj;
  if (t == "adv") return kPosAdv;
  if (t == "noun") return kPosNoun;
  if (t == "other") return kPosOther;
  throw ValidationError("unknown POS tag '" + std::string(tag) + "'");
}

void PosLexicon::add(std::string_view word, std::uint8_t tags) { tags_[text::to_lower(word)] |= tags; }

std::optional<std::uint8_t> PosLexicon::lookup(std::string_view word) const {
  auto it = tags_.find(text::to_lower(word));
  if (it == tags_.end()) return std::nullopt;
  return it->second;
}

PosLexicon PosLexicon::load(const std::filesystem::path& path) {
  PosLexicon lex;
  auto lines = io::split_lines(io::read_file(path));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ValidationError(path.string() + ":" + std::to_string(i + 1) + ": expected word<TAB>tag");
    }
    lex.add(line.substr(0, tab), parse_pos_tag(text::normalize_whitespace(line.substr(tab + 1))));
  }
  return lex;
}

namespace {

StopwordSet parse_stopwords(std::string_view contents) {
  StopwordSet out;
  for (auto& line : io::split_lines(contents)) {
    auto w = text::to_lower(text::normalize_whitespace(line));
    if (w.empty() || w[0] == '#') continue;
    // Stopwords are compared against tokenizer output, so "don't" becomes
    // "don" + "t".
    for (auto& tok : text::tokenize(w)) out.insert(tok);
  }
  return out;
}

}  // namespace

const StopwordSet& default_stopwords() {
  static const StopwordSet words = parse_stopwords(detail::kBuiltinStopwords);
  return words;
}

StopwordSet load_stopwords(const std::filesystem::path& path) { return parse_stopwords(io::read_file(path)); }

std::vector<std::string> Query::bag() const {
  std::vector<std::string> out;
  for (const auto& [term, count] : terms) out.insert(out.end(), count, term);
  return out;
}

std::string Query::text() const {
  std::string out;
  for (const auto& [term, count] : terms) {
    if (!out.empty()) out.push_back(' ');
    out += term;
  }
  return out;
}

Query generate_query(const McqItem& item, std::size_t option_index, const QueryConfig& config) {
  if (option_index >= item.options.size()) throw ValidationError("option index out of range");
  std::string joined;
  if (item.context && !item.context->empty()) joined = *item.context + " ";
  joined += item.question + " " + item.options[option_index];

  Query q;
  q.item_id = item.id;
  q.option_index = option_index;
  const bool use_pos = config.pos_filter && config.lexicon.has_value();
  constexpr std::uint8_t kContent = kPosVerb | kPosAdj | kPosAdv | kPosNoun;
  for (auto& tok : text::tokenize(joined)) {
    if (config.stopwords.contains(tok)) continue;
    if (use_pos) {
      auto tags = config.lexicon->lookup(tok);
      if (tags && (*tags & kContent) == 0) continue;
    }
    ++q.terms[tok];
  }
  if (q.terms.empty()) throw EmptyQueryError();
  return q;
}

}  // namespace kinfuse
