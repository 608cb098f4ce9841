#pragma once

#include <cstdint>
#include <string>

#include "kinfuse/config.hpp"
#include "kinfuse/corpus.hpp"
#include "kinfuse/datasets.hpp"
#include "kinfuse/encoder.hpp"
#include "kinfuse/fusion.hpp"
#include "kinfuse/index.hpp"

namespace kinfuse {

/// Settings read from a KeyValueConfig; missing keys keep library defaults.
Bm25Params bm25_params_from(const KeyValueConfig& config);
AttachConfig attach_config_from(const KeyValueConfig& config);
EncoderConfig encoder_config_from(const KeyValueConfig& config);
/// `section` is "train" or "revise"; the seed is supplied by the caller.
TrainConfig train_config_from(const KeyValueConfig& config, const std::string& section, std::uint64_t seed);
CorpusLoadOptions corpus_options_from(const KeyValueConfig& config, std::uint64_t seed);

/// Which knowledge strategies are on: revision (continued encoder training)
/// and open book (retrieved premises at fine-tuning and inference time).
struct Strategy {
  bool revision = false;
  bool openbook = true;
};

Strategy strategy_from(const KeyValueConfig& config);

struct HeadChoice {
  HeadKind head = HeadKind::WeightedSum;
  bool tied = false;
};

/// model.head / model.tied, checked against the strategy: a closed-book run
/// only admits the baseline head, which is also its default.
HeadChoice head_choice_from(const KeyValueConfig& config, const Strategy& strategy);

/// Copy of the dataset with every premise list removed.
McqDataset without_premises(const McqDataset& dataset);

}  // namespace kinfuse
