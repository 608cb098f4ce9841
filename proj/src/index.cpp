#include "kinfuse/index.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "kinfuse/error.hpp"
#include "kinfuse/io.hpp"
#include "kinfuse/text.hpp"

namespace kinfuse {

namespace {
constexpr std::string_view kMagic = "KIIX";
}

InvertedIndex::InvertedIndex(KnowledgeCorpus corpus, Bm25Params params)
    : corpus_(std::move(corpus)), params_(params) {}

InvertedIndex InvertedIndex::build(const KnowledgeCorpus& corpus, Bm25Params params) {
  if (corpus.empty()) throw ValidationError("empty corpus");
  if (params.k1 < 0.0 || params.b < 0.0 || params.b > 1.0) throw ValidationError("invalid BM25 parameters");
  InvertedIndex index(corpus, params);
  index.doc_lengths_.reserve(corpus.size());
  for (std::uint32_t d = 0; d < corpus.size(); ++d) {
    auto tokens = text::tokenize(corpus.sentences()[d].text);
    index.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
    std::map<std::string, std::uint32_t> tf;
    for (auto& t : tokens) ++tf[t];
    for (auto& [term, count] : tf) index.postings_[term].push_back({d, count});
  }
  index.finalize_stats();
  return index;
}

void InvertedIndex::finalize_stats() {
  double total = 0.0;
  for (auto len : doc_lengths_) total += len;
  avg_doc_len_ = doc_lengths_.empty() ? 0.0 : total / static_cast<double>(doc_lengths_.size());
}

std::size_t InvertedIndex::doc_frequency(std::string_view term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? 0 : it->second.size();
}

std::span<const Posting> InvertedIndex::postings(std::string_view term) const {
  auto it = postings_.find(term);
  if (it == postings_.end()) return {};
  return it->second;
}

double InvertedIndex::idf(std::string_view term) const {
  const auto n = static_cast<double>(n_docs());
  const auto df = static_cast<double>(doc_frequency(term));
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

std::vector<RetrievalHit> InvertedIndex::search(std::span<const std::string> query, std::size_t k) const {
  if (k < 1) throw ValidationError("k must be >= 1");
  std::map<std::string_view, std::size_t> bag;
  for (const auto& t : query) ++bag[t];

  std::unordered_map<std::uint32_t, double> acc;
  const double k1 = params_.k1;
  const double b = params_.b;
  for (auto& [term, count] : bag) {
    auto plist = postings(term);
    if (plist.empty()) continue;
    const double w = idf(term) * static_cast<double>(count);
    for (const auto& p : plist) {
      const double tf = p.tf;
      const double norm = 1.0 - b + b * static_cast<double>(doc_lengths_[p.doc]) / avg_doc_len_;
      acc[p.doc] += w * tf * (k1 + 1.0) / (tf + k1 * norm);
    }
  }

  std::vector<RetrievalHit> hits;
  hits.reserve(acc.size());
  for (auto& [doc, score] : acc) {
    if (score > 0.0) hits.push_back({corpus_.sentences()[doc].id, doc, score, 0});
  }
  auto by_rank = [](const RetrievalHit& a, const RetrievalHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.sentence_id < b.sentence_id;
  };
  if (hits.size() > k) {
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), by_rank);
    hits.resize(k);
  } else {
    std::sort(hits.begin(), hits.end(), by_rank);
  }
  for (std::size_t i = 0; i < hits.size(); ++i) hits[i].rank = i + 1;
  return hits;
}

std::string InvertedIndex::serialize() const {
  io::BinaryWriter out;
  out.bytes(kMagic);
  out.u32(kIndexFormatVersion);

  io::BinaryWriter params;
  params.f64(params_.k1);
  params.f64(params_.b);
  out.section(params);

  io::BinaryWriter docs;
  docs.u64(corpus_.size());
  for (std::size_t d = 0; d < corpus_.size(); ++d) {
    const auto& s = corpus_.sentences()[d];
    docs.str(s.id);
    docs.str(s.text);
    docs.str(s.source_tag);
    docs.u32(s.title ? 1 : 0);
    if (s.title) docs.str(*s.title);
    docs.u32(doc_lengths_[d]);
  }
  out.section(docs);

  io::BinaryWriter post;
  post.u64(postings_.size());
  for (const auto& [term, plist] : postings_) {
    post.str(term);
    post.u64(plist.size());
    for (const auto& p : plist) {
      post.u32(p.doc);
      post.u32(p.tf);
    }
  }
  out.section(post);
  return out.data();
}

InvertedIndex InvertedIndex::deserialize(std::string_view bytes) {
  io::BinaryReader in(bytes, "index file");
  if (in.bytes(kMagic.size()) != kMagic) throw ValidationError("index file: bad magic");
  auto version = in.u32();
  if (version != kIndexFormatVersion) {
    throw ValidationError("index file: unsupported version " + std::to_string(version));
  }
  auto params_sec = in.section();
  Bm25Params params;
  params.k1 = params_sec.f64();
  params.b = params_sec.f64();

  auto docs_sec = in.section();
  auto n = docs_sec.u64();
  std::vector<KnowledgeSentence> sentences;
  std::vector<std::uint32_t> lengths;
  sentences.reserve(n);
  for (std::uint64_t d = 0; d < n; ++d) {
    KnowledgeSentence s;
    s.id = docs_sec.str();
    s.text = docs_sec.str();
    s.source_tag = docs_sec.str();
    if (docs_sec.u32() != 0) s.title = docs_sec.str();
    lengths.push_back(docs_sec.u32());
    sentences.push_back(std::move(s));
  }

  InvertedIndex index(KnowledgeCorpus(std::move(sentences)), params);
  index.doc_lengths_ = std::move(lengths);
  auto post_sec = in.section();
  auto n_terms = post_sec.u64();
  for (std::uint64_t t = 0; t < n_terms; ++t) {
    auto term = post_sec.str();
    auto count = post_sec.u64();
    std::vector<Posting> plist;
    plist.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      Posting p{post_sec.u32(), post_sec.u32()};
      if (p.doc >= n) throw ValidationError("index file: posting references unknown document");
      plist.push_back(p);
    }
    index.postings_.emplace(std::move(term), std::move(plist));
  }
  if (!in.done()) throw ValidationError("index file: trailing bytes");
  index.finalize_stats();
  return index;
}

void InvertedIndex::save(const std::filesystem::path& path) const { io::write_file(path, serialize()); }

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) { return deserialize(io::read_file(path)); }

}  // namespace kinfuse
