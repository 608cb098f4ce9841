#include "kinfuse/pipeline.hpp"

#include <memory>

#include "kinfuse/error.hpp"
#include "kinfuse/querygen.hpp"
#include "kinfuse/rerank.hpp"

namespace kinfuse {

namespace {

std::size_t get_size(const KeyValueConfig& c, std::string_view key, std::size_t fallback) {
  auto v = c.get_int(key, static_cast<std::int64_t>(fallback));
  if (v < 0) throw ValidationError("config key '" + std::string(key) + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

Bm25Params bm25_params_from(const KeyValueConfig& c) {
  Bm25Params p;
  p.k1 = c.get_double("bm25.k1", p.k1);
  p.b = c.get_double("bm25.b", p.b);
  if (p.k1 < 0 || p.b < 0 || p.b > 1) throw ValidationError("bm25.k1 must be >= 0 and bm25.b in [0, 1]");
  return p;
}

AttachConfig attach_config_from(const KeyValueConfig& c) {
  AttachConfig a;
  if (auto path = c.get("query.stopwords")) a.query.stopwords = load_stopwords(*path);
  if (auto path = c.get("query.lexicon")) a.query.lexicon = PosLexicon::load(*path);
  a.query.pos_filter = c.get_bool("query.pos_filter", false);
  if (a.query.pos_filter && !a.query.lexicon) throw ValidationError("query.pos_filter needs query.lexicon");
  a.retrieve_k = get_size(c, "attach.retrieve_k", a.retrieve_k);
  a.rerank.m = get_size(c, "rerank.m", a.rerank.m);
  a.rerank.lambda = c.get_double("rerank.lambda", a.rerank.lambda);
  auto sim = c.get_string("rerank.similarity", "jaccard");
  if (sim == "cosine") {
    auto path = c.get("rerank.embeddings");
    if (!path) throw ValidationError("rerank.similarity = cosine needs rerank.embeddings");
    a.rerank.similarity = SimilarityFn::cosine(std::make_shared<const EmbeddingTable>(EmbeddingTable::load(*path)));
  } else if (sim != "jaccard") {
    throw ValidationError("rerank.similarity must be jaccard or cosine");
  }
  if (a.rerank.m == 0 || a.retrieve_k == 0) throw ValidationError("rerank.m and attach.retrieve_k must be positive");
  if (a.rerank.m > a.retrieve_k) throw ValidationError("rerank.m must not exceed attach.retrieve_k");
  return a;
}

EncoderConfig encoder_config_from(const KeyValueConfig& c) {
  EncoderConfig e;
  e.dim = get_size(c, "encoder.dim", e.dim);
  e.max_len = get_size(c, "encoder.max_len", e.max_len);
  e.ln_eps = c.get_double("encoder.ln_eps", e.ln_eps);
  return e;
}

TrainConfig train_config_from(const KeyValueConfig& c, const std::string& section, std::uint64_t seed) {
  TrainConfig t;
  const auto key = [&](const char* name) { return section + "." + name; };
  t.seed = seed;
  t.epochs = get_size(c, key("epochs"), t.epochs);
  t.learning_rate = c.get_double(key("learning_rate"), t.learning_rate);
  t.batch_size = get_size(c, key("batch_size"), t.batch_size);
  t.momentum = c.get_double(key("momentum"), t.momentum);
  t.mask_probability = c.get_double(key("mask_probability"), t.mask_probability);
  t.freeze_encoder = c.get_bool(key("freeze_encoder"), t.freeze_encoder);
  t.max_grad_norm = c.get_double(key("max_grad_norm"), t.max_grad_norm);
  t.validate();
  return t;
}

CorpusLoadOptions corpus_options_from(const KeyValueConfig& c, std::uint64_t seed) {
  CorpusLoadOptions o;
  o.seed = seed;
  o.source_tag = c.get_string("corpus.source_tag", "");
  if (auto path = c.get("corpus.names")) o.name_pool = load_word_list(*path);
  if (auto path = c.get("corpus.templates")) o.templates = load_atomic_templates(*path);
  return o;
}

Strategy strategy_from(const KeyValueConfig& c) {
  Strategy s;
  s.revision = c.get_bool("strategy.revision", s.revision);
  s.openbook = c.get_bool("strategy.openbook", s.openbook);
  return s;
}

HeadChoice head_choice_from(const KeyValueConfig& c, const Strategy& strategy) {
  HeadChoice h;
  h.head = parse_head_kind(c.get_string("model.head", strategy.openbook ? "weighted-sum" : "baseline"));
  h.tied = c.get_bool("model.tied", false);
  if (!strategy.openbook && h.head != HeadKind::Baseline) {
    throw ValidationError("strategy.openbook = false only admits model.head = baseline");
  }
  if (h.tied && h.head != HeadKind::WeightedSum) throw ValidationError("model.tied applies to weighted-sum only");
  return h;
}

McqDataset without_premises(const McqDataset& dataset) {
  McqDataset out = dataset;
  for (auto& it : out.items) it.premises.reset();
  return out;
}

}  // namespace kinfuse
