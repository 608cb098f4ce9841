#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kinfuse/corpus.hpp"

namespace kinfuse {

/// Word vectors read from "word v1 ... vd" lines.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  void add(std::string word, std::vector<double> vec);
  const std::vector<double>* find(std::string_view word) const;
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }

  static EmbeddingTable load(const std::filesystem::path& path);

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

/// |T(a) n T(b)| / |T(a) u T(b)| over lowercase token sets; 1 when both are empty.
double token_jaccard(std::string_view a, std::string_view b);

/// Cosine of mean word vectors; unknown words skipped, 0 when either side has none.
double embedding_cosine(std::string_view a, std::string_view b, const EmbeddingTable& table);

enum class SimilarityKind { TokenJaccard, EmbeddingCosine };

class SimilarityFn {
 public:
  /// Text reduced to whatever the similarity compares.
  struct Features {
    std::vector<std::string> tokens;  // sorted, unique
    std::vector<double> mean;         // empty when no known word
  };

  SimilarityFn() = default;
  static SimilarityFn jaccard() { return {}; }
  static SimilarityFn cosine(std::shared_ptr<const EmbeddingTable> table);

  SimilarityKind kind() const { return kind_; }
  Features features(std::string_view text) const;
  double compare(const Features& a, const Features& b) const;
  double operator()(std::string_view a, std::string_view b) const { return compare(features(a), features(b)); }

 private:
  SimilarityKind kind_ = SimilarityKind::TokenJaccard;
  std::shared_ptr<const EmbeddingTable> table_;
};

struct RerankConfig {
  std::size_t m = 10;
  double lambda = 1.0;
  SimilarityFn similarity;
};

/// Greedy selection: each step takes the unselected candidate maximizing
///   sim(s, query) - lambda * max_{t selected} sim(s, t)
/// with ties going to the earlier candidate. Returns candidate positions in
/// pick order; at most m of them.
std::vector<std::size_t> rerank_order(std::span<const std::string> candidate_texts, std::string_view query_text,
                                      const RerankConfig& config);

std::vector<KnowledgeSentence> rerank(std::span<const KnowledgeSentence> candidates, std::string_view query_text,
                                      const RerankConfig& config);

}  // namespace kinfuse
