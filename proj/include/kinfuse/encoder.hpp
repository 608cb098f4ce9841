#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "kinfuse/autodiff.hpp"
#include "kinfuse/corpus.hpp"

namespace kinfuse {

using TokenSequence = std::vector<int>;

class Vocabulary {
 public:
  static constexpr int kCls = 0;
  static constexpr int kSep = 1;
  static constexpr int kMask = 2;
  static constexpr int kPad = 3;
  static constexpr int kUnk = 4;
  static constexpr int kNumSpecial = 5;

  Vocabulary();
  /// Specials followed by every distinct token of `texts` in sorted order.
  static Vocabulary build(std::span<const std::string> texts);
  /// Specials followed by `words` as given (duplicates rejected).
  static Vocabulary from_words(std::span<const std::string> words);

  int id(std::string_view token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Lowercased word tokens mapped to ids; unknown words -> kUnk.
  TokenSequence encode_text(std::string_view text) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// [start] K [sep] Q a [sep]. When the sequence would exceed max_len the
/// knowledge tokens are cut from the end; question and option tokens are
/// never dropped.
TokenSequence build_sequence(std::string_view knowledge, std::string_view question, std::string_view option,
                             const Vocabulary& vocab, std::size_t max_len = 256);

struct EncoderConfig {
  std::size_t dim = 32;
  std::size_t max_len = 256;
  double ln_eps = 1e-12;
};

/// One post-norm transformer block over token embeddings; the pooled summary
/// is the final hidden state at position 0.
class EncoderModel {
 public:
  EncoderModel() = default;
  static EncoderModel create(Vocabulary vocab, EncoderConfig config, std::uint64_t seed);

  const Vocabulary& vocab() const { return vocab_; }
  const EncoderConfig& config() const { return config_; }
  std::size_t dim() const { return config_.dim; }

  /// Parameters touched by encode().
  std::vector<ad::Parameter*> encoder_parameters();
  /// Encoder parameters plus the masked-token bias and next-sentence head.
  std::vector<ad::Parameter*> all_parameters();
  std::vector<const ad::Parameter*> all_parameters() const;

  /// Final hidden states (L x d). Keys with key_mask false are ignored by attention.
  ad::Var forward(ad::Tape& tape, std::span<const int> tokens, std::span<const bool> key_mask = {});
  ad::Var pooled(ad::Tape& tape, std::span<const int> tokens, std::span<const bool> key_mask = {});

  Eigen::VectorXd encode(std::span<const int> tokens) const;
  /// Same as encode() on a padded sequence; positions with mask false are padding.
  Eigen::VectorXd encode_masked(std::span<const int> tokens, std::span<const bool> key_mask) const;

  ad::Parameter& embedding() { return embedding_; }
  ad::Parameter& mlm_bias() { return mlm_bias_; }
  ad::Parameter& nsp_weight() { return nsp_w_; }
  ad::Parameter& nsp_bias() { return nsp_b_; }
  ad::Parameter* find_parameter(std::string_view name);

  /// "KIEN" | version | config | vocab | named row-major f64 matrices.
  std::string serialize() const;
  static EncoderModel deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static EncoderModel load(const std::filesystem::path& path);

  bool all_finite() const;

 private:
  Vocabulary vocab_;
  EncoderConfig config_;
  ad::Parameter embedding_;
  ad::Parameter wq_, wk_, wv_, wo_, bq_, bk_, bv_, bo_;
  ad::Parameter ln1_g_, ln1_b_;
  ad::Parameter w1_, b1_, w2_, b2_;
  ad::Parameter ln2_g_, ln2_b_;
  ad::Parameter mlm_bias_;
  ad::Parameter nsp_w_, nsp_b_;
};

/// Vectors produced elsewhere (e.g. by a pretrained model), keyed by
/// (item id, option index, passage index or none).
class ExternalVectorStore {
 public:
  using Key = std::tuple<std::string, std::size_t, std::optional<std::size_t>>;

  void insert(const std::string& item, std::size_t option, std::optional<std::size_t> passage,
              Eigen::VectorXd vec);
  /// Throws ValidationError for missing keys.
  const Eigen::VectorXd& lookup(const std::string& item, std::size_t option, std::optional<std::size_t> passage) const;
  bool contains(const std::string& item, std::size_t option, std::optional<std::size_t> passage) const;
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }

  /// JSON-lines {"item", "option", "passage": int|null, "vec": [...]}.
  static ExternalVectorStore load(const std::filesystem::path& path);
  static ExternalVectorStore parse(std::string_view contents, std::string_view origin = "<memory>");
  std::string serialize() const;

 private:
  std::size_t dim_ = 0;
  std::map<Key, Eigen::VectorXd> vectors_;
};

struct TrainConfig {
  std::uint64_t seed = 0;
  double learning_rate = 0.05;
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  double momentum = 0.9;
  double mask_probability = 0.15;
  bool freeze_encoder = false;
  double max_grad_norm = 0.0;  // 0 disables clipping

  void validate() const;
};

/// Plain momentum SGD over a fixed parameter list.
class MomentumSgd {
 public:
  MomentumSgd(std::vector<ad::Parameter*> params, double learning_rate, double momentum, double max_grad_norm = 0.0);
  void zero_grad();
  /// Applies grad * grad_scale.
  void step(double grad_scale = 1.0);

 private:
  std::vector<ad::Parameter*> params_;
  std::vector<ad::Matrix> velocity_;
  double lr_, momentum_, max_grad_norm_;
};

struct RevisionLog {
  std::vector<double> mlm_loss;  // mean per epoch
  std::vector<double> nsp_loss;
  bool next_sentence_used = false;
  std::size_t skipped_batches = 0;
};

/// True when some adjacent sentences share a non-empty title.
bool has_paragraph_structure(const KnowledgeCorpus& corpus);

/// Continued training on the knowledge base: masked-token prediction through
/// an output projection tied to the embedding matrix, plus next-sentence
/// classification when the corpus has paragraph structure.
EncoderModel revision_train(EncoderModel model, const KnowledgeCorpus& corpus, const TrainConfig& config,
                            RevisionLog* log = nullptr);

/// Masked-token loss under a masking pattern fixed by `seed` (no training).
double masked_lm_loss(const EncoderModel& model, const KnowledgeCorpus& corpus, double mask_probability,
                      std::uint64_t seed);

}  // namespace kinfuse
