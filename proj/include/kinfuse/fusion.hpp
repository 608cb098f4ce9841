#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kinfuse/autodiff.hpp"
#include "kinfuse/encoder.hpp"
#include "kinfuse/mcq.hpp"

namespace kinfuse {

enum class HeadKind { Baseline, Concat, ParallelMax, SimpleSum, WeightedSum };

HeadKind parse_head_kind(std::string_view name);
std::string_view head_kind_name(HeadKind kind);

struct OptionScores {
  std::vector<double> scores;
  std::optional<std::vector<std::vector<double>>> weights;  // weighted-sum only
  std::size_t predicted = 0;                                // argmax, lowest index on ties
};

/// Scoring head over pooled summaries from either the built-in encoder or a
/// table of externally produced vectors.
class FusionModel {
 public:
  static FusionModel with_encoder(EncoderModel encoder, HeadKind head, bool tied, std::uint64_t seed);
  static FusionModel with_vectors(std::shared_ptr<const ExternalVectorStore> vectors, HeadKind head, bool tied,
                                  std::uint64_t seed);

  HeadKind head() const { return head_; }
  bool tied() const { return tied_; }
  std::size_t dim() const { return dim_; }
  bool has_encoder() const { return encoder_.has_value(); }
  EncoderModel& encoder() { return *encoder_; }
  const EncoderModel& encoder() const { return *encoder_; }

  ad::Parameter& score_weight() { return tied_ ? weight_w_ : score_w_; }
  ad::Parameter& score_bias() { return tied_ ? weight_b_ : score_b_; }
  ad::Parameter& weight_layer_weight() { return weight_w_; }
  ad::Parameter& weight_layer_bias() { return weight_b_; }
  /// Untied final layer (ignored by the weighted-sum head when tied).
  ad::Parameter& untied_score_weight() { return score_w_; }
  ad::Parameter& untied_score_bias() { return score_b_; }

  /// Parameters the head reads; encoder ones included when requested and present.
  std::vector<ad::Parameter*> parameters(bool include_encoder);

  /// Records the score computation for one item on `tape`; returns a 1 x n row.
  ad::Var score_var(ad::Tape& tape, const McqItem& item, bool encoder_trainable,
                    std::vector<std::vector<double>>* weights_out = nullptr);
  OptionScores score(const McqItem& item) const;
  /// Cross-entropy of softmax(scores) against the gold option.
  double loss(const McqItem& item) const;

  /// Token sequences the head feeds the encoder for option i.
  std::vector<TokenSequence> option_sequences(const McqItem& item, std::size_t option) const;

  /// "KIFM" checkpoint. External-vector models store no vectors; pass the
  /// store again on load.
  std::string serialize() const;
  static FusionModel deserialize(std::string_view bytes, std::shared_ptr<const ExternalVectorStore> vectors = nullptr);
  void save(const std::filesystem::path& path) const;
  static FusionModel load(const std::filesystem::path& path,
                          std::shared_ptr<const ExternalVectorStore> vectors = nullptr);

 private:
  FusionModel() = default;
  void init_head(std::uint64_t seed);
  ad::Var pooled_var(ad::Tape& tape, const McqItem& item, std::size_t option, std::optional<std::size_t> passage,
                     const std::string& knowledge, bool encoder_trainable);
  ad::Var linear(ad::Tape& tape, ad::Var x, ad::Parameter& w, ad::Parameter& b);

  HeadKind head_ = HeadKind::Baseline;
  bool tied_ = false;
  std::size_t dim_ = 0;
  std::optional<EncoderModel> encoder_;
  std::shared_ptr<const ExternalVectorStore> vectors_;
  ad::Parameter score_w_, score_b_, weight_w_, weight_b_;
};

/// Question slot text: context and question joined by a space.
std::string question_slot(const McqItem& item);

/// Knowledge passages a per-passage head iterates over: the premises of the
/// option, or a single empty placeholder when there are none.
std::vector<std::string> passages_for(const McqItem& item, std::size_t option);

OptionScores score_baseline(const FusionModel& model, const McqItem& item);
OptionScores score_concat(const FusionModel& model, const McqItem& item);
OptionScores score_max(const FusionModel& model, const McqItem& item);
OptionScores score_simple_sum(const FusionModel& model, const McqItem& item);
OptionScores score_weighted_sum(const FusionModel& model, const McqItem& item);

struct FusionTrainLog {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_accuracy;
};

/// Mini-batch momentum SGD on softmax cross-entropy over option scores.
FusionModel train(FusionModel model, const McqDataset& dataset, const TrainConfig& config,
                  FusionTrainLog* log = nullptr);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t entries_checked = 0;
  std::string worst_parameter;
};

/// Relative error used by grad_check: |a - n| / max(|a|, |n|, floor).
double gradient_relative_error(double analytic, double numeric, double floor = 1e-4);

/// Central finite differences of the item loss against the analytic gradient,
/// over every trainable parameter.
GradCheckResult grad_check(FusionModel& model, const McqItem& item, double step = 1e-6);

}  // namespace kinfuse
