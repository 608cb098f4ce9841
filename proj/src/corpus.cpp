#include "kinfuse/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <array>
#include <cstdio>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "kinfuse/error.hpp"
#include "kinfuse/io.hpp"
#include "kinfuse/text.hpp"

namespace kinfuse {

using nlohmann::json;

KnowledgeCorpus::KnowledgeCorpus(std::vector<KnowledgeSentence> sentences) : sentences_(std::move(sentences)) {
  by_id_.reserve(sentences_.size());
  for (std::size_t i = 0; i < sentences_.size(); ++i) {
    const auto& s = sentences_[i];
    if (text::normalize_whitespace(s.text).empty()) {
      throw ValidationError("sentence " + s.id + " has empty text");
    }
    if (!by_id_.emplace(s.id, i).second) throw ValidationError("duplicate sentence id " + s.id);
    token_count_ += text::tokenize(s.text).size();
  }
}

const KnowledgeSentence* KnowledgeCorpus::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &sentences_[it->second];
}

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "plain-lines") return CorpusFormat::PlainLines;
  if (name == "titled-paragraphs") return CorpusFormat::TitledParagraphs;
  if (name == "atomic-events") return CorpusFormat::AtomicEvents;
  if (name == "corpus-jsonl") return CorpusFormat::CorpusJsonl;
  throw ValidationError("unknown corpus format '" + std::string(name) + "'");
}

const AtomicTemplates& default_atomic_templates() {
  static const AtomicTemplates templates = {
      {"xIntent", "{event}, because PersonX wanted {inference}."},
      {"xNeed", "{event}, before that PersonX needed {inference}."},
      {"xAttr", "{event}, so PersonX is seen as {inference}."},
      {"xReact", "{event}, as a result PersonX feels {inference}."},
      {"xWant", "{event}, as a result PersonX wants {inference}."},
      {"xEffect", "{event}, as a result PersonX {inference}."},
      {"oReact", "{event}, as a result others feel {inference}."},
      {"oWant", "{event}, as a result others want {inference}."},
  };
  return templates;
}

const std::vector<std::string>& default_name_pool() {
  static const std::vector<std::string> names = {
      "Jody",   "Alex",    "Jordan", "Taylor", "Casey",  "Riley",  "Morgan",  "Jamie",
      "Avery",  "Quinn",   "Skyler", "Dakota", "Reese",  "Rowan",  "Sage",    "Parker",
      "Emerson", "Finley", "Hayden", "Kendall", "Logan", "Peyton", "Robin",   "Sam",
      "Charlie", "Drew",   "Jesse",  "Kai",    "Blair",  "Cameron", "Devon",  "Elliot"};
  return names;
}

AtomicTemplates load_atomic_templates(const std::filesystem::path& path) {
  AtomicTemplates out;
  auto lines = io::split_lines(io::read_file(path));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ValidationError(path.string() + ":" + std::to_string(i + 1) + ": expected dimension<TAB>template");
    }
    out[line.substr(0, tab)] = line.substr(tab + 1);
  }
  if (out.empty()) throw ValidationError(path.string() + ": no templates");
  return out;
}

std::vector<std::string> load_word_list(const std::filesystem::path& path) {
  std::vector<std::string> out;
  for (auto& line : io::split_lines(io::read_file(path))) {
    auto word = text::normalize_whitespace(line);
    if (word.empty() || word[0] == '#') continue;
    out.push_back(std::move(word));
  }
  return out;
}

std::string make_sentence_id(std::string_view source_tag, std::size_t ordinal) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%08zu", ordinal);
  return std::string(source_tag) + "-" + buf;
}

namespace {

// Abbreviations that never end a sentence even before a capitalized word.
const std::set<std::string, std::less<>> kNonTerminalAbbrev = {
    "mr", "mrs", "ms", "dr", "prof", "rev", "gen", "col", "lt", "sgt", "capt", "st", "mt",
    "fig", "vs", "e.g", "i.e", "cf", "approx", "no", "vol", "pp"};

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }
bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// Does a period at `dot` belong to an abbreviation or an initial?
bool period_is_abbreviation(std::string_view s, std::size_t dot) {
  std::size_t start = dot;
  while (start > 0 && !is_space(s[start - 1])) --start;
  std::string word = text::to_lower(s.substr(start, dot - start));
  while (!word.empty() && (word.front() == '(' || word.front() == '"' || word.front() == '\'')) word.erase(0, 1);
  if (word.empty()) return false;
  // a capital initial such as "J."
  if (word.size() == 1 && std::isupper(static_cast<unsigned char>(s[dot - 1]))) return true;
  if (kNonTerminalAbbrev.contains(word)) return true;
  // dotted initials such as "u.s"
  if (word.size() % 2 == 1 && word.size() >= 3) {
    bool dotted = true;
    for (std::size_t i = 0; i < word.size(); ++i) {
      bool want_letter = i % 2 == 0;
      if (want_letter ? !std::isalpha(static_cast<unsigned char>(word[i])) : word[i] != '.') dotted = false;
    }
    if (dotted) return true;
  }
  return false;
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view paragraph) {
  std::vector<std::string> out;
  std::size_t seg_start = 0;
  std::size_t i = 0;
  const std::size_t n = paragraph.size();
  auto emit = [&](std::size_t end) {
    auto piece = text::normalize_whitespace(paragraph.substr(seg_start, end - seg_start));
    if (!piece.empty()) out.push_back(std::move(piece));
    seg_start = end;
  };
  while (i < n) {
    if (!is_terminator(paragraph[i])) {
      ++i;
      continue;
    }
    std::size_t first_term = i;
    std::size_t j = i;
    while (j < n && is_terminator(paragraph[j])) ++j;
    bool single_period = (j - first_term == 1 && paragraph[first_term] == '.');
    while (j < n && is_closer(paragraph[j])) ++j;
    if (j < n && !is_space(paragraph[j])) {
      i = j;
      continue;
    }
    std::size_t k = j;
    while (k < n && is_space(paragraph[k])) ++k;
    bool split = true;
    if (k < n) {
      char next = paragraph[k];
      if (next >= 'a' && next <= 'z') split = false;
      if (single_period && period_is_abbreviation(paragraph, first_term)) split = false;
    }
    if (split) emit(j);
    i = j;
  }
  emit(n);
  return out;
}

std::vector<KnowledgeSentence> prepare_titled(const std::vector<TitledParagraph>& paragraphs,
                                              std::string_view source_tag) {
  std::vector<KnowledgeSentence> out;
  for (const auto& p : paragraphs) {
    auto title = text::normalize_whitespace(p.title);
    for (auto& sentence : split_sentences(p.body)) {
      KnowledgeSentence ks;
      ks.id = make_sentence_id(source_tag, out.size());
      ks.source_tag = std::string(source_tag);
      if (title.empty()) {
        ks.text = std::move(sentence);
      } else {
        bool terminated = is_terminator(title.back());
        ks.text = title + (terminated ? " " : ". ") + sentence;
      }
      ks.title = title;
      out.push_back(std::move(ks));
    }
  }
  return out;
}

namespace {

constexpr std::array<std::string_view, 3> kPlaceholders = {"PersonX", "PersonY", "PersonZ"};

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

std::string strip_trailing_punct(std::string s) {
  while (!s.empty() && (is_terminator(s.back()) || is_space(s.back()))) s.pop_back();
  return s;
}

bool has_blank(std::string_view event) { return event.find("___") != std::string_view::npos; }

}  // namespace

std::vector<KnowledgeSentence> prepare_atomic(const std::vector<AtomicEvent>& events,
                                              const std::vector<std::string>& name_pool, std::uint64_t seed,
                                              const AtomicTemplates& templates, std::string_view source_tag) {
  if (name_pool.empty()) throw ValidationError("empty name pool");
  std::vector<KnowledgeSentence> out;
  for (const auto& ev : events) {
    auto event = strip_trailing_punct(text::normalize_whitespace(ev.event));
    auto inference = strip_trailing_punct(text::normalize_whitespace(ev.inference));
    if (event.empty() || has_blank(event)) continue;
    if (inference.empty() || text::to_lower(inference) == "none") continue;
    auto tmpl = templates.find(ev.dimension);
    if (tmpl == templates.end()) throw ValidationError("unknown ATOMIC dimension '" + ev.dimension + "'");

    std::string sentence = replace_all(replace_all(tmpl->second, "{event}", event), "{inference}", inference);

    // Names depend on the event text and seed only, so every dimension of
    // one event shares the same cast.
    std::size_t needed = 0;
    for (auto ph : kPlaceholders) {
      if (sentence.find(ph) != std::string::npos) ++needed;
    }
    if (needed > name_pool.size()) {
      throw ValidationError("name pool too small for event '" + event + "'");
    }
    std::mt19937_64 rng(seed ^ text::fnv1a(event));
    std::vector<std::size_t> order(name_pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    // partial Fisher-Yates: first slots are distinct picks
    for (std::size_t i = 0; i < std::min<std::size_t>(kPlaceholders.size(), order.size()); ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
      std::swap(order[i], order[pick(rng)]);
    }
    for (std::size_t p = 0; p < kPlaceholders.size(); ++p) {
      if (sentence.find(kPlaceholders[p]) == std::string::npos) continue;
      sentence = replace_all(std::move(sentence), kPlaceholders[p], name_pool[order[p]]);
    }
    KnowledgeSentence ks;
    ks.id = make_sentence_id(source_tag, out.size());
    ks.text = std::move(sentence);
    ks.source_tag = std::string(source_tag);
    out.push_back(std::move(ks));
  }
  return out;
}

namespace {

json parse_json_line(const std::string& line, const std::filesystem::path& path, std::size_t lineno) {
  try {
    auto j = json::parse(line);
    if (!j.is_object()) throw ValidationError("not an object");
    return j;
  } catch (const std::exception& e) {
    throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": malformed record: " + e.what());
  }
}

std::string required_string(const json& j, const char* key, const std::filesystem::path& path, std::size_t lineno) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": missing string field '" + key + "'");
  }
  return it->get<std::string>();
}

}  // namespace

KnowledgeCorpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                            const CorpusLoadOptions& options) {
  auto contents = io::read_file(path);
  auto lines = io::split_lines(contents);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!text::is_valid_utf8(lines[i])) {
      throw ValidationError(path.string() + ":" + std::to_string(i + 1) + ": invalid UTF-8");
    }
  }

  std::vector<KnowledgeSentence> sentences;
  switch (format) {
    case CorpusFormat::PlainLines: {
      std::string tag = options.source_tag.empty() ? "plain" : options.source_tag;
      for (const auto& line : lines) {
        auto t = text::normalize_whitespace(line);
        if (t.empty()) continue;
        sentences.push_back({make_sentence_id(tag, sentences.size()), std::move(t), tag, std::nullopt});
      }
      break;
    }
    case CorpusFormat::TitledParagraphs: {
      std::vector<TitledParagraph> paragraphs;
      for (std::size_t i = 0; i < lines.size(); ++i) {
        if (text::normalize_whitespace(lines[i]).empty()) continue;
        auto j = parse_json_line(lines[i], path, i + 1);
        paragraphs.push_back({required_string(j, "title", path, i + 1), required_string(j, "text", path, i + 1)});
      }
      sentences = prepare_titled(paragraphs, options.source_tag.empty() ? "wikihow" : options.source_tag);
      break;
    }
    case CorpusFormat::AtomicEvents: {
      std::vector<AtomicEvent> events;
      for (std::size_t i = 0; i < lines.size(); ++i) {
        if (text::normalize_whitespace(lines[i]).empty()) continue;
        auto j = parse_json_line(lines[i], path, i + 1);
        AtomicEvent ev{required_string(j, "event", path, i + 1), required_string(j, "dimension", path, i + 1),
                       required_string(j, "inference", path, i + 1)};
        if (!options.templates.contains(ev.dimension)) {
          throw ValidationError(path.string() + ":" + std::to_string(i + 1) + ": unknown dimension '" +
                                ev.dimension + "'");
        }
        events.push_back(std::move(ev));
      }
      sentences = prepare_atomic(events, options.name_pool, options.seed, options.templates,
                                 options.source_tag.empty() ? "atomic" : options.source_tag);
      break;
    }
    case CorpusFormat::CorpusJsonl: {
      for (std::size_t i = 0; i < lines.size(); ++i) {
        if (text::normalize_whitespace(lines[i]).empty()) continue;
        auto j = parse_json_line(lines[i], path, i + 1);
        KnowledgeSentence ks;
        ks.id = required_string(j, "id", path, i + 1);
        ks.text = required_string(j, "text", path, i + 1);
        ks.source_tag = j.contains("source") ? required_string(j, "source", path, i + 1) : std::string();
        if (j.contains("title") && !j["title"].is_null()) ks.title = required_string(j, "title", path, i + 1);
        sentences.push_back(std::move(ks));
      }
      break;
    }
  }
  if (sentences.empty()) throw ValidationError("empty corpus: " + path.string());
  return KnowledgeCorpus(std::move(sentences));
}

std::string serialize_plain_lines(const KnowledgeCorpus& corpus) {
  std::string out;
  for (const auto& s : corpus.sentences()) {
    out += s.text;
    out += '\n';
  }
  return out;
}

std::string serialize_corpus_jsonl(const KnowledgeCorpus& corpus) {
  std::string out;
  for (const auto& s : corpus.sentences()) {
    json j = {{"id", s.id}, {"text", s.text}, {"source", s.source_tag}};
    if (s.title) j["title"] = *s.title;
    out += j.dump();
    out += '\n';
  }
  return out;
}

KnowledgeCorpus merge_corpora(const std::vector<KnowledgeCorpus>& parts) {
  std::vector<KnowledgeSentence> all;
  for (const auto& p : parts) all.insert(all.end(), p.sentences().begin(), p.sentences().end());
  return KnowledgeCorpus(std::move(all));
}

}  // namespace kinfuse
