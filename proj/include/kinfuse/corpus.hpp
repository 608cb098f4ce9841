#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kinfuse {

struct KnowledgeSentence {
  std::string id;
  std::string text;
  std::string source_tag;
  std::optional<std::string> title;

  friend bool operator==(const KnowledgeSentence&, const KnowledgeSentence&) = default;
};

/// Immutable, ordered knowledge base. Construction validates that ids are
/// unique and that every text is non-empty after whitespace normalization.
class KnowledgeCorpus {
 public:
  KnowledgeCorpus() = default;
  explicit KnowledgeCorpus(std::vector<KnowledgeSentence> sentences);

  const std::vector<KnowledgeSentence>& sentences() const { return sentences_; }
  std::size_t size() const { return sentences_.size(); }
  bool empty() const { return sentences_.empty(); }
  std::size_t token_count() const { return token_count_; }

  const KnowledgeSentence* find(std::string_view id) const;

 private:
  std::vector<KnowledgeSentence> sentences_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::size_t token_count_ = 0;
};

enum class CorpusFormat { PlainLines, TitledParagraphs, AtomicEvents, CorpusJsonl };

CorpusFormat parse_corpus_format(std::string_view name);

struct TitledParagraph {
  std::string title;
  std::string body;
};

struct AtomicEvent {
  std::string event;
  std::string dimension;
  std::string inference;
};

/// dimension tag -> sentence template with "{event}" and "{inference}" slots.
/// Placeholders ("PersonX", "PersonY", "PersonZ") may also appear in a template.
using AtomicTemplates = std::map<std::string, std::string>;

const AtomicTemplates& default_atomic_templates();
const std::vector<std::string>& default_name_pool();

AtomicTemplates load_atomic_templates(const std::filesystem::path& path);
std::vector<std::string> load_word_list(const std::filesystem::path& path);

struct CorpusLoadOptions {
  std::string source_tag;  // empty -> per-format default
  std::vector<std::string> name_pool = default_name_pool();
  std::uint64_t seed = 0;
  AtomicTemplates templates = default_atomic_templates();
};

KnowledgeCorpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                            const CorpusLoadOptions& options = {});

/// Rule-based splitter on terminal punctuation. Abbreviations such as "Mr."
/// and single-letter initials do not end a sentence, nor does a terminator
/// followed by a lowercase word.
std::vector<std::string> split_sentences(std::string_view paragraph);

/// Each sentence of each body becomes "<title>. <sentence>".
std::vector<KnowledgeSentence> prepare_titled(const std::vector<TitledParagraph>& paragraphs,
                                              std::string_view source_tag = "wikihow");

/// Templated declarative sentences with placeholders replaced by names drawn
/// from `name_pool`. Events holding unfilled blanks ("___") are skipped, as
/// are records whose inference is empty or "none".
std::vector<KnowledgeSentence> prepare_atomic(const std::vector<AtomicEvent>& events,
                                              const std::vector<std::string>& name_pool,
                                              std::uint64_t seed,
                                              const AtomicTemplates& templates = default_atomic_templates(),
                                              std::string_view source_tag = "atomic");

std::string make_sentence_id(std::string_view source_tag, std::size_t ordinal);

/// One sentence text per line.
std::string serialize_plain_lines(const KnowledgeCorpus& corpus);
/// JSON-lines {"id","text","source","title"?}; read back with CorpusFormat::CorpusJsonl.
std::string serialize_corpus_jsonl(const KnowledgeCorpus& corpus);

KnowledgeCorpus merge_corpora(const std::vector<KnowledgeCorpus>& parts);

}  // namespace kinfuse
