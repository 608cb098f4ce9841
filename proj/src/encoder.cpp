#include "kinfuse/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "kinfuse/error.hpp"
#include "kinfuse/io.hpp"
#include "kinfuse/text.hpp"

namespace kinfuse {

using ad::Matrix;
using ad::Parameter;
using ad::Tape;
using ad::Var;

namespace {

const std::vector<std::string> kSpecialTokens = {"[CLS]", "[SEP]", "[MASK]", "[PAD]", "[UNK]"};
constexpr std::string_view kEncoderMagic = "KIEN";
constexpr std::uint32_t kEncoderVersion = 1;

}  // namespace

Vocabulary::Vocabulary() {
  for (std::size_t i = 0; i < kSpecialTokens.size(); ++i) {
    tokens_.push_back(kSpecialTokens[i]);
    ids_.emplace(kSpecialTokens[i], static_cast<int>(i));
  }
}

Vocabulary Vocabulary::build(std::span<const std::string> texts) {
  std::vector<std::string> words;
  for (const auto& t : texts) {
    auto toks = text::tokenize(t);
    words.insert(words.end(), toks.begin(), toks.end());
  }
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  return from_words(words);
}

Vocabulary Vocabulary::from_words(std::span<const std::string> words) {
  Vocabulary v;
  for (const auto& w : words) {
    auto [it, inserted] = v.ids_.emplace(w, static_cast<int>(v.tokens_.size()));
    if (!inserted) throw ValidationError("duplicate vocabulary entry '" + w + "'");
    v.tokens_.push_back(w);
  }
  return v;
}

int Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

TokenSequence Vocabulary::encode_text(std::string_view t) const {
  TokenSequence out;
  for (auto& tok : text::tokenize(t)) out.push_back(id(tok));
  return out;
}

TokenSequence build_sequence(std::string_view knowledge, std::string_view question, std::string_view option,
                             const Vocabulary& vocab, std::size_t max_len) {
  auto k = vocab.encode_text(knowledge);
  auto q = vocab.encode_text(question);
  auto a = vocab.encode_text(option);
  const std::size_t fixed = 3 + q.size() + a.size();
  const std::size_t room = max_len > fixed ? max_len - fixed : 0;
  if (k.size() > room) k.resize(room);
  TokenSequence seq;
  seq.reserve(fixed + k.size());
  seq.push_back(Vocabulary::kCls);
  seq.insert(seq.end(), k.begin(), k.end());
  seq.push_back(Vocabulary::kSep);
  seq.insert(seq.end(), q.begin(), q.end());
  seq.insert(seq.end(), a.begin(), a.end());
  seq.push_back(Vocabulary::kSep);
  return seq;
}

EncoderModel EncoderModel::create(Vocabulary vocab, EncoderConfig config, std::uint64_t seed) {
  if (config.dim == 0) throw ValidationError("encoder dimension must be positive");
  if (!(config.ln_eps > 0.0)) throw ValidationError("layer-norm epsilon must be positive");
  if (config.max_len < 4) throw ValidationError("max_len must be at least 4");
  EncoderModel m;
  m.vocab_ = std::move(vocab);
  m.config_ = config;
  const auto d = static_cast<Eigen::Index>(config.dim);
  const auto v = static_cast<Eigen::Index>(m.vocab_.size());
  std::mt19937_64 rng(seed);
  auto gaussian = [&rng](Eigen::Index rows, Eigen::Index cols, double stddev) {
    std::normal_distribution<double> nd(0.0, stddev);
    Matrix out(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = nd(rng);
    }
    return out;
  };
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  m.embedding_ = Parameter("embedding", gaussian(v, d, s));
  m.wq_ = Parameter("attn.wq", gaussian(d, d, s));
  m.wk_ = Parameter("attn.wk", gaussian(d, d, s));
  m.wv_ = Parameter("attn.wv", gaussian(d, d, s));
  m.wo_ = Parameter("attn.wo", gaussian(d, d, s));
  m.bq_ = Parameter("attn.bq", Matrix::Zero(1, d));
  m.bk_ = Parameter("attn.bk", Matrix::Zero(1, d));
  m.bv_ = Parameter("attn.bv", Matrix::Zero(1, d));
  m.bo_ = Parameter("attn.bo", Matrix::Zero(1, d));
  m.ln1_g_ = Parameter("ln1.gamma", Matrix::Ones(1, d));
  m.ln1_b_ = Parameter("ln1.beta", Matrix::Zero(1, d));
  m.w1_ = Parameter("ffn.w1", gaussian(d, 4 * d, s));
  m.b1_ = Parameter("ffn.b1", Matrix::Zero(1, 4 * d));
  m.w2_ = Parameter("ffn.w2", gaussian(4 * d, d, 0.5 * s));
  m.b2_ = Parameter("ffn.b2", Matrix::Zero(1, d));
  m.ln2_g_ = Parameter("ln2.gamma", Matrix::Ones(1, d));
  m.ln2_b_ = Parameter("ln2.beta", Matrix::Zero(1, d));
  m.mlm_bias_ = Parameter("mlm.bias", Matrix::Zero(1, v));
  m.nsp_w_ = Parameter("nsp.w", gaussian(d, 1, s));
  m.nsp_b_ = Parameter("nsp.b", Matrix::Zero(1, 1));
  return m;
}

std::vector<Parameter*> EncoderModel::encoder_parameters() {
  return {&embedding_, &wq_, &wk_, &wv_, &wo_, &bq_, &bk_, &bv_, &bo_, &ln1_g_, &ln1_b_,
          &w1_,        &b1_, &w2_, &b2_, &ln2_g_, &ln2_b_};
}

std::vector<Parameter*> EncoderModel::all_parameters() {
  auto out = encoder_parameters();
  out.push_back(&mlm_bias_);
  out.push_back(&nsp_w_);
  out.push_back(&nsp_b_);
  return out;
}

std::vector<const Parameter*> EncoderModel::all_parameters() const {
  auto params = const_cast<EncoderModel*>(this)->all_parameters();
  return {params.begin(), params.end()};
}

Parameter* EncoderModel::find_parameter(std::string_view name) {
  for (auto* p : all_parameters()) {
    if (p->name == name) return p;
  }
  return nullptr;
}

Var EncoderModel::forward(Tape& t, std::span<const int> tokens, std::span<const bool> key_mask) {
  if (tokens.empty()) throw ValidationError("empty sequence");
  if (!key_mask.empty() && key_mask.size() != tokens.size()) throw ValidationError("key mask length mismatch");
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(config_.dim));
  auto x = t.embed(embedding_, tokens);
  auto q = t.add_row(t.matmul(x, t.param(wq_)), t.param(bq_));
  auto k = t.add_row(t.matmul(x, t.param(wk_)), t.param(bk_));
  auto v = t.add_row(t.matmul(x, t.param(wv_)), t.param(bv_));
  auto attn = t.softmax_rows(t.scale(t.matmul_nt(q, k), inv_sqrt_d), key_mask);
  auto ctx = t.add_row(t.matmul(t.matmul(attn, v), t.param(wo_)), t.param(bo_));
  auto h1 = t.layer_norm(t.add(x, ctx), t.param(ln1_g_), t.param(ln1_b_), config_.ln_eps);
  auto ff = t.gelu(t.add_row(t.matmul(h1, t.param(w1_)), t.param(b1_)));
  auto ff2 = t.add_row(t.matmul(ff, t.param(w2_)), t.param(b2_));
  return t.layer_norm(t.add(h1, ff2), t.param(ln2_g_), t.param(ln2_b_), config_.ln_eps);
}

Var EncoderModel::pooled(Tape& t, std::span<const int> tokens, std::span<const bool> key_mask) {
  return t.row(forward(t, tokens, key_mask), 0);
}

Eigen::VectorXd EncoderModel::encode(std::span<const int> tokens) const { return encode_masked(tokens, {}); }

Eigen::VectorXd EncoderModel::encode_masked(std::span<const int> tokens, std::span<const bool> key_mask) const {
  Tape t;
  // forward never writes parameters; only backward does
  auto& self = const_cast<EncoderModel&>(*this);
  auto h = self.pooled(t, tokens, key_mask);
  return t.value(h).row(0).transpose();
}

bool EncoderModel::all_finite() const {
  for (const auto* p : all_parameters()) {
    if (!p->value.allFinite()) return false;
  }
  return true;
}

namespace {

void write_matrix(io::BinaryWriter& w, const Parameter& p) {
  w.str(p.name);
  w.u64(static_cast<std::uint64_t>(p.value.rows()));
  w.u64(static_cast<std::uint64_t>(p.value.cols()));
  for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.value.cols(); ++c) w.f64(p.value(r, c));
  }
}

void read_matrix(io::BinaryReader& r, Parameter& p) {
  auto name = r.str();
  if (name != p.name) throw ValidationError("checkpoint: expected parameter " + p.name + ", found " + name);
  auto rows = static_cast<Eigen::Index>(r.u64());
  auto cols = static_cast<Eigen::Index>(r.u64());
  if (rows != p.value.rows() || cols != p.value.cols()) {
    throw ValidationError("checkpoint: shape mismatch for " + p.name);
  }
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) p.value(i, j) = r.f64();
  }
  p.zero_grad();
}

}  // namespace

std::string EncoderModel::serialize() const {
  io::BinaryWriter w;
  w.bytes(kEncoderMagic);
  w.u32(kEncoderVersion);
  io::BinaryWriter cfg;
  cfg.u64(config_.dim);
  cfg.u64(config_.max_len);
  cfg.f64(config_.ln_eps);
  w.section(cfg);
  io::BinaryWriter voc;
  voc.u64(vocab_.size());
  for (const auto& tok : vocab_.tokens()) voc.str(tok);
  w.section(voc);
  io::BinaryWriter params;
  auto all = all_parameters();
  params.u64(all.size());
  for (const auto* p : all) write_matrix(params, *p);
  w.section(params);
  return w.data();
}

EncoderModel EncoderModel::deserialize(std::string_view bytes) {
  io::BinaryReader r(bytes, "encoder checkpoint");
  if (r.bytes(kEncoderMagic.size()) != kEncoderMagic) throw ValidationError("encoder checkpoint: bad magic");
  if (auto v = r.u32(); v != kEncoderVersion) {
    throw ValidationError("encoder checkpoint: unsupported version " + std::to_string(v));
  }
  auto cfg_sec = r.section();
  EncoderConfig cfg;
  cfg.dim = cfg_sec.u64();
  cfg.max_len = cfg_sec.u64();
  cfg.ln_eps = cfg_sec.f64();
  auto voc_sec = r.section();
  auto n = voc_sec.u64();
  if (n < static_cast<std::uint64_t>(Vocabulary::kNumSpecial)) throw ValidationError("encoder checkpoint: bad vocabulary");
  std::vector<std::string> words;
  for (std::uint64_t i = 0; i < n; ++i) {
    auto tok = voc_sec.str();
    if (i < static_cast<std::uint64_t>(Vocabulary::kNumSpecial)) {
      if (tok != kSpecialTokens[i]) throw ValidationError("encoder checkpoint: bad special token");
      continue;
    }
    words.push_back(std::move(tok));
  }
  auto m = create(Vocabulary::from_words(words), cfg, 0);
  auto params_sec = r.section();
  auto all = m.all_parameters();
  if (params_sec.u64() != all.size()) throw ValidationError("encoder checkpoint: parameter count mismatch");
  for (auto* p : all) read_matrix(params_sec, *p);
  if (!r.done()) throw ValidationError("encoder checkpoint: trailing bytes");
  return m;
}

void EncoderModel::save(const std::filesystem::path& path) const { io::write_file(path, serialize()); }

EncoderModel EncoderModel::load(const std::filesystem::path& path) { return deserialize(io::read_file(path)); }

// ---------------------------------------------------------------------------

void ExternalVectorStore::insert(const std::string& item, std::size_t option, std::optional<std::size_t> passage,
                                 Eigen::VectorXd vec) {
  if (vec.size() == 0) throw ValidationError("external vector for " + item + " is empty");
  if (dim_ == 0) dim_ = static_cast<std::size_t>(vec.size());
  if (static_cast<std::size_t>(vec.size()) != dim_) {
    throw ValidationError("external vector for " + item + " has dimension " + std::to_string(vec.size()) +
                          ", expected " + std::to_string(dim_));
  }
  if (!vectors_.emplace(Key{item, option, passage}, std::move(vec)).second) {
    throw ValidationError("duplicate external vector key for item " + item + " option " + std::to_string(option));
  }
}

bool ExternalVectorStore::contains(const std::string& item, std::size_t option,
                                   std::optional<std::size_t> passage) const {
  return vectors_.contains(Key{item, option, passage});
}

const Eigen::VectorXd& ExternalVectorStore::lookup(const std::string& item, std::size_t option,
                                                   std::optional<std::size_t> passage) const {
  auto it = vectors_.find(Key{item, option, passage});
  if (it == vectors_.end()) {
    throw ValidationError("no external vector for item " + item + " option " + std::to_string(option) +
                          " passage " + (passage ? std::to_string(*passage) : std::string("none")));
  }
  return it->second;
}

ExternalVectorStore ExternalVectorStore::parse(std::string_view contents, std::string_view origin) {
  ExternalVectorStore store;
  auto lines = io::split_lines(contents);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::normalize_whitespace(lines[i]).empty()) continue;
    auto where = std::string(origin) + ":" + std::to_string(i + 1);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[i]);
    } catch (const std::exception& e) {
      throw ValidationError(where + ": malformed record: " + e.what());
    }
    if (!j.is_object() || !j.contains("item") || !j.contains("option") || !j.contains("vec") ||
        !j["option"].is_number_unsigned() || !j["vec"].is_array()) {
      throw ValidationError(where + ": expected {item, option, passage, vec}");
    }
    std::string item = j["item"].is_string() ? j["item"].get<std::string>() : j["item"].dump();
    std::optional<std::size_t> passage;
    if (j.contains("passage") && !j["passage"].is_null()) {
      if (!j["passage"].is_number_unsigned()) throw ValidationError(where + ": passage must be a non-negative integer");
      passage = j["passage"].get<std::size_t>();
    }
    const auto& arr = j["vec"];
    Eigen::VectorXd vec(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t k = 0; k < arr.size(); ++k) {
      if (!arr[k].is_number()) throw ValidationError(where + ": vec entries must be numbers");
      vec(static_cast<Eigen::Index>(k)) = arr[k].get<double>();
    }
    try {
      store.insert(item, j["option"].get<std::size_t>(), passage, std::move(vec));
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  return store;
}

ExternalVectorStore ExternalVectorStore::load(const std::filesystem::path& path) {
  return parse(io::read_file(path), path.string());
}

std::string ExternalVectorStore::serialize() const {
  std::string out;
  for (const auto& [key, vec] : vectors_) {
    nlohmann::json j;
    j["item"] = std::get<0>(key);
    j["option"] = std::get<1>(key);
    j["passage"] = std::get<2>(key) ? nlohmann::json(*std::get<2>(key)) : nlohmann::json(nullptr);
    std::vector<double> v(vec.data(), vec.data() + vec.size());
    j["vec"] = v;
    out += j.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ValidationError("learning rate must be >= 0");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (momentum < 0.0 || momentum >= 1.0) throw ValidationError("momentum must be in [0, 1)");
  if (max_grad_norm < 0.0) throw ValidationError("max_grad_norm must be >= 0");
}

MomentumSgd::MomentumSgd(std::vector<Parameter*> params, double learning_rate, double momentum, double max_grad_norm)
    : params_(std::move(params)), lr_(learning_rate), momentum_(momentum), max_grad_norm_(max_grad_norm) {
  for (auto* p : params_) velocity_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
}

void MomentumSgd::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

void MomentumSgd::step(double grad_scale) {
  if (max_grad_norm_ > 0.0) {
    double sq = 0.0;
    for (auto* p : params_) sq += p->grad.squaredNorm();
    double norm = std::sqrt(sq) * std::abs(grad_scale);
    if (norm > max_grad_norm_) grad_scale *= max_grad_norm_ / norm;
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    velocity_[i] = momentum_ * velocity_[i] + grad_scale * params_[i]->grad;
    params_[i]->value -= lr_ * velocity_[i];
  }
}

// ---------------------------------------------------------------------------

bool has_paragraph_structure(const KnowledgeCorpus& corpus) {
  const auto& s = corpus.sentences();
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    if (s[i].title && !s[i].title->empty() && s[i + 1].title == s[i].title) return true;
  }
  return false;
}

namespace {

TokenSequence sentence_sequence(const Vocabulary& vocab, std::string_view sentence, std::size_t max_len) {
  auto toks = vocab.encode_text(sentence);
  if (toks.size() + 2 > max_len) toks.resize(max_len - 2);
  TokenSequence seq;
  seq.reserve(toks.size() + 2);
  seq.push_back(Vocabulary::kCls);
  seq.insert(seq.end(), toks.begin(), toks.end());
  seq.push_back(Vocabulary::kSep);
  return seq;
}

TokenSequence pair_sequence(const Vocabulary& vocab, std::string_view a, std::string_view b, std::size_t max_len) {
  auto ta = vocab.encode_text(a);
  auto tb = vocab.encode_text(b);
  while (ta.size() + tb.size() + 3 > max_len) {
    if (ta.size() >= tb.size()) {
      ta.pop_back();
    } else {
      tb.pop_back();
    }
  }
  TokenSequence seq{Vocabulary::kCls};
  seq.insert(seq.end(), ta.begin(), ta.end());
  seq.push_back(Vocabulary::kSep);
  seq.insert(seq.end(), tb.begin(), tb.end());
  seq.push_back(Vocabulary::kSep);
  return seq;
}

struct MaskedExample {
  TokenSequence input;
  std::vector<int> positions;
  std::vector<std::size_t> targets;
};

MaskedExample mask_sequence(const TokenSequence& seq, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  MaskedExample ex{seq, {}, {}};
  for (std::size_t i = 1; i + 1 < seq.size(); ++i) {
    if (coin(rng)) {
      ex.positions.push_back(static_cast<int>(i));
      ex.targets.push_back(static_cast<std::size_t>(seq[i]));
      ex.input[i] = Vocabulary::kMask;
    }
  }
  return ex;
}

// Sum of cross-entropy over the example's masked positions, recorded on `t`.
Var masked_loss_sum(EncoderModel& model, Tape& t, const MaskedExample& ex) {
  auto h = model.forward(t, ex.input);
  auto hm = t.gather_rows(h, ex.positions);
  auto logits = t.add_row(t.matmul_nt(hm, t.param(model.embedding())), t.param(model.mlm_bias()));
  return t.scale(t.cross_entropy(logits, ex.targets), static_cast<double>(ex.positions.size()));
}

}  // namespace

EncoderModel revision_train(EncoderModel model, const KnowledgeCorpus& corpus, const TrainConfig& config,
                            RevisionLog* log) {
  config.validate();
  if (!(config.mask_probability > 0.0 && config.mask_probability < 1.0)) {
    throw ValidationError("mask probability must be in (0, 1)");
  }
  if (corpus.empty()) throw ValidationError("empty corpus");

  const auto& sentences = corpus.sentences();
  const std::size_t max_len = model.config().max_len;
  std::vector<TokenSequence> seqs;
  seqs.reserve(sentences.size());
  for (const auto& s : sentences) seqs.push_back(sentence_sequence(model.vocab(), s.text, max_len));

  const bool use_nsp = has_paragraph_structure(corpus) && sentences.size() >= 3;
  std::vector<bool> has_next(sentences.size(), false);
  if (use_nsp) {
    for (std::size_t i = 0; i + 1 < sentences.size(); ++i) {
      has_next[i] = sentences[i].title && !sentences[i].title->empty() && sentences[i + 1].title == sentences[i].title;
    }
  }

  RevisionLog local;
  RevisionLog& out = log ? *log : local;
  out.next_sentence_used = use_nsp;

  MomentumSgd opt(model.all_parameters(), config.learning_rate, config.momentum, config.max_grad_norm);
  std::mt19937_64 rng(config.seed);
  Tape tape;
  std::vector<std::size_t> order(sentences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double mlm_sum = 0.0, nsp_sum = 0.0;
    std::size_t mlm_count = 0, nsp_count = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<MaskedExample> masked;
      std::vector<std::pair<TokenSequence, double>> pairs;
      std::size_t n_masked = 0;
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = order[b];
        auto ex = mask_sequence(seqs[i], config.mask_probability, rng);
        if (!ex.positions.empty()) {
          n_masked += ex.positions.size();
          masked.push_back(std::move(ex));
        }
        if (use_nsp && has_next[i]) {
          std::bernoulli_distribution coin(0.5);
          if (coin(rng)) {
            pairs.emplace_back(pair_sequence(model.vocab(), sentences[i].text, sentences[i + 1].text, max_len), 1.0);
          } else {
            std::uniform_int_distribution<std::size_t> pick(0, sentences.size() - 1);
            std::size_t j = pick(rng);
            while (j == i + 1 || j == i) j = pick(rng);
            pairs.emplace_back(pair_sequence(model.vocab(), sentences[i].text, sentences[j].text, max_len), 0.0);
          }
        }
      }
      if (masked.empty() && pairs.empty()) {
        ++out.skipped_batches;
        continue;
      }
      opt.zero_grad();
      for (const auto& ex : masked) {
        tape.clear();
        auto loss = masked_loss_sum(model, tape, ex);
        mlm_sum += tape.scalar(loss);
        tape.backward(loss, 1.0 / static_cast<double>(n_masked));
      }
      mlm_count += n_masked;
      for (const auto& [seq, label] : pairs) {
        tape.clear();
        auto pooled = model.pooled(tape, seq);
        auto logit = tape.add(tape.matmul(pooled, tape.param(model.nsp_weight())), tape.param(model.nsp_bias()));
        const double target[] = {label};
        auto loss = tape.bce_with_logits(logit, target);
        nsp_sum += tape.scalar(loss);
        tape.backward(loss, 1.0 / static_cast<double>(pairs.size()));
      }
      nsp_count += pairs.size();
      opt.step();
    }
    out.mlm_loss.push_back(mlm_count ? mlm_sum / static_cast<double>(mlm_count) : 0.0);
    out.nsp_loss.push_back(nsp_count ? nsp_sum / static_cast<double>(nsp_count) : 0.0);
  }
  for (auto* p : model.all_parameters()) p->zero_grad();
  return model;
}

double masked_lm_loss(const EncoderModel& model, const KnowledgeCorpus& corpus, double mask_probability,
                      std::uint64_t seed) {
  if (!(mask_probability > 0.0 && mask_probability < 1.0)) throw ValidationError("mask probability must be in (0, 1)");
  auto& m = const_cast<EncoderModel&>(model);
  std::mt19937_64 rng(seed);
  Tape tape;
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& s : corpus.sentences()) {
    auto ex = mask_sequence(sentence_sequence(model.vocab(), s.text, model.config().max_len), mask_probability, rng);
    if (ex.positions.empty()) continue;
    tape.clear();
    total += tape.scalar(masked_loss_sum(m, tape, ex));
    count += ex.positions.size();
  }
  if (count == 0) throw ValidationError("masking selected no positions");
  return total / static_cast<double>(count);
}

}  // namespace kinfuse
