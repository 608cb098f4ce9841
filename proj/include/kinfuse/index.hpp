#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kinfuse/corpus.hpp"

namespace kinfuse {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

struct Posting {
  std::uint32_t doc;  // ordinal in the indexed corpus
  std::uint32_t tf;
};

struct RetrievalHit {
  std::string sentence_id;
  std::uint32_t doc;
  double score;
  std::size_t rank;  // 1-based
};

/// Term -> postings index with BM25 ranking. The indexed sentences are kept
/// in the doc table so the index file is self-contained.
class InvertedIndex {
 public:
  static InvertedIndex build(const KnowledgeCorpus& corpus, Bm25Params params = {});

  /// Top-k documents for a bag of terms; repeated terms contribute once per
  /// occurrence. Zero-score documents are never returned. Ties are broken by
  /// sentence id ascending.
  std::vector<RetrievalHit> search(std::span<const std::string> query, std::size_t k) const;

  /// ln(1 + (N - df + 0.5) / (df + 0.5))
  double idf(std::string_view term) const;

  std::size_t n_docs() const { return corpus_.size(); }
  double avg_doc_len() const { return avg_doc_len_; }
  std::uint32_t doc_length(std::uint32_t doc) const { return doc_lengths_.at(doc); }
  const std::vector<std::uint32_t>& doc_lengths() const { return doc_lengths_; }
  const Bm25Params& params() const { return params_; }
  std::size_t doc_frequency(std::string_view term) const;
  std::span<const Posting> postings(std::string_view term) const;
  const std::map<std::string, std::vector<Posting>, std::less<>>& all_postings() const { return postings_; }

  const KnowledgeCorpus& corpus() const { return corpus_; }
  const KnowledgeSentence& sentence(std::uint32_t doc) const { return corpus_.sentences().at(doc); }

  /// "KIIX" | version u32 | params | doc table | postings, each section length-prefixed.
  std::string serialize() const;
  static InvertedIndex deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static InvertedIndex load(const std::filesystem::path& path);

 private:
  InvertedIndex(KnowledgeCorpus corpus, Bm25Params params);
  void finalize_stats();

  KnowledgeCorpus corpus_;
  Bm25Params params_;
  std::vector<std::uint32_t> doc_lengths_;
  double avg_doc_len_ = 0.0;
  std::map<std::string, std::vector<Posting>, std::less<>> postings_;
};

inline constexpr std::uint32_t kIndexFormatVersion = 1;

}  // namespace kinfuse
