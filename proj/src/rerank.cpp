#include "kinfuse/rerank.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kinfuse/error.hpp"
#include "kinfuse/io.hpp"
#include "kinfuse/text.hpp"

namespace kinfuse {

void EmbeddingTable::add(std::string word, std::vector<double> vec) {
  if (dim_ == 0) dim_ = vec.size();
  if (vec.size() != dim_ || dim_ == 0) {
    throw ValidationError("embedding for '" + word + "' has dimension " + std::to_string(vec.size()) +
                          ", expected " + std::to_string(dim_));
  }
  vectors_.insert_or_assign(std::move(word), std::move(vec));
}

const std::vector<double>* EmbeddingTable::find(std::string_view word) const {
  auto it = vectors_.find(std::string(word));
  return it == vectors_.end() ? nullptr : &it->second;
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
  EmbeddingTable table;
  auto lines = io::split_lines(io::read_file(path));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto parts = text::split_whitespace(lines[i]);
    if (parts.empty()) continue;
    if (parts.size() < 2) {
      throw ValidationError(path.string() + ":" + std::to_string(i + 1) + ": expected word and vector");
    }
    std::vector<double> vec;
    vec.reserve(parts.size() - 1);
    for (std::size_t k = 1; k < parts.size(); ++k) {
      try {
        std::size_t used = 0;
        vec.push_back(std::stod(parts[k], &used));
        if (used != parts[k].size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw ValidationError(path.string() + ":" + std::to_string(i + 1) + ": bad number '" + parts[k] + "'");
      }
    }
    try {
      table.add(parts[0], std::move(vec));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return table;
}

namespace {

std::vector<std::string> token_set(std::string_view s) {
  auto toks = text::tokenize(s);
  std::sort(toks.begin(), toks.end());
  toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
  return toks;
}

double jaccard_sorted(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  std::size_t inter = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++inter;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

std::vector<double> mean_vector(std::string_view s, const EmbeddingTable& table) {
  std::vector<double> mean(table.dim(), 0.0);
  std::size_t known = 0;
  for (auto& tok : text::tokenize(s)) {
    const auto* v = table.find(tok);
    if (!v) continue;
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += (*v)[k];
    ++known;
  }
  if (known == 0) return {};
  for (auto& x : mean) x /= static_cast<double>(known);
  return mean;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) return 0.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

double token_jaccard(std::string_view a, std::string_view b) { return jaccard_sorted(token_set(a), token_set(b)); }

double embedding_cosine(std::string_view a, std::string_view b, const EmbeddingTable& table) {
  return cosine(mean_vector(a, table), mean_vector(b, table));
}

SimilarityFn SimilarityFn::cosine(std::shared_ptr<const EmbeddingTable> table) {
  if (!table || table->dim() == 0) throw ValidationError("embedding-cosine similarity needs a loaded table");
  SimilarityFn fn;
  fn.kind_ = SimilarityKind::EmbeddingCosine;
  fn.table_ = std::move(table);
  return fn;
}

SimilarityFn::Features SimilarityFn::features(std::string_view text) const {
  Features f;
  if (kind_ == SimilarityKind::TokenJaccard) {
    f.tokens = token_set(text);
  } else {
    f.mean = mean_vector(text, *table_);
  }
  return f;
}

double SimilarityFn::compare(const Features& a, const Features& b) const {
  if (kind_ == SimilarityKind::TokenJaccard) return jaccard_sorted(a.tokens, b.tokens);
  return kinfuse::cosine(a.mean, b.mean);
}

std::vector<std::size_t> rerank_order(std::span<const std::string> candidate_texts, std::string_view query_text,
                                      const RerankConfig& config) {
  if (candidate_texts.empty()) throw ValidationError("empty candidate list");
  if (config.m < 1) throw ValidationError("rerank target m must be >= 1");
  if (config.lambda < 0.0) throw ValidationError("rerank lambda must be >= 0");

  const auto& sim = config.similarity;
  const auto query = sim.features(query_text);
  std::vector<SimilarityFn::Features> feats;
  feats.reserve(candidate_texts.size());
  for (const auto& t : candidate_texts) feats.push_back(sim.features(t));

  const std::size_t n = feats.size();
  std::vector<double> relevance(n);
  for (std::size_t i = 0; i < n; ++i) relevance[i] = sim.compare(feats[i], query);

  // redundancy[i] = max similarity to anything selected so far
  std::vector<double> redundancy(n, -std::numeric_limits<double>::infinity());
  std::vector<bool> taken(n, false);
  std::vector<std::size_t> order;
  const std::size_t picks = std::min(config.m, n);
  order.reserve(picks);
  while (order.size() < picks) {
    std::size_t best = n;
    double best_gain = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      double gain = relevance[i] - (order.empty() ? 0.0 : config.lambda * redundancy[i]);
      if (best == n || gain > best_gain) {
        best = i;
        best_gain = gain;
      }
    }
    taken[best] = true;
    order.push_back(best);
    for (std::size_t i = 0; i < n; ++i) {
      if (!taken[i]) redundancy[i] = std::max(redundancy[i], sim.compare(feats[i], feats[best]));
    }
  }
  return order;
}

std::vector<KnowledgeSentence> rerank(std::span<const KnowledgeSentence> candidates, std::string_view query_text,
                                      const RerankConfig& config) {
  std::vector<std::string> texts;
  texts.reserve(candidates.size());
  for (const auto& c : candidates) texts.push_back(c.text);
  std::vector<KnowledgeSentence> out;
  for (auto i : rerank_order(texts, query_text, config)) out.push_back(candidates[i]);
  return out;
}

}  // namespace kinfuse
