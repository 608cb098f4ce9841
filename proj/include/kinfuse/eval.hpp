#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kinfuse/datasets.hpp"
#include "kinfuse/fusion.hpp"

namespace kinfuse {

struct Prediction {
  std::string item;
  std::vector<double> scores;
  std::optional<std::vector<std::vector<double>>> weights;
  std::size_t predicted = 0;
  std::optional<std::size_t> gold;
};

struct EvalReport {
  double accuracy = 0.0;
  std::size_t n_items = 0;
  std::size_t correct = 0;
  std::vector<Prediction> predictions;
  std::string fingerprint;
};

/// Argmax accuracy over a labelled dataset.
EvalReport evaluate(const FusionModel& model, const McqDataset& dataset, std::string fingerprint = {});

/// JSON-lines {"item","scores","weights","predicted","gold"}.
std::string serialize_predictions(const EvalReport& report);
/// Accuracy recomputed from a predictions file.
double accuracy_from_predictions(std::string_view jsonl);

/// |tokens(K) n tokens(Qa)| / |tokens(Qa)| over lowercase token sets; 0 when Qa is empty.
double normalized_overlap(std::string_view knowledge, std::string_view question_plus_answer);

struct WeightOverlapRow {
  std::string item;
  std::size_t option;
  std::size_t passage;
  double weight;
  double overlap;
};

/// One row per (item, option, passage) with the weighted-sum head's weight.
std::vector<WeightOverlapRow> weight_overlap_report(const FusionModel& model, const McqDataset& dataset);
std::string weight_overlap_csv(const std::vector<WeightOverlapRow>& rows);

/// Every text a model over these inputs may see, for vocabulary building.
std::vector<std::string> collect_texts(const KnowledgeCorpus* corpus, std::span<const McqDataset* const> datasets);

struct SweepConfig {
  AttachConfig attach;
  TrainConfig train;
  EncoderConfig encoder;
  HeadKind head = HeadKind::SimpleSum;
  bool tied = false;
  std::uint64_t model_seed = 0;
  /// Train a fresh model for every m; otherwise `trained` is re-evaluated.
  bool retrain = true;
};

struct SweepPoint {
  std::size_t m;
  double accuracy;
};

std::vector<SweepPoint> sweep_m(const SweepConfig& config, const InvertedIndex& index, const McqDataset& train_set,
                                const McqDataset& eval_set, std::span<const std::size_t> m_values,
                                const FusionModel* trained = nullptr);
std::string sweep_csv(const std::vector<SweepPoint>& points);

}  // namespace kinfuse
