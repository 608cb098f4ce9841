#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kinfuse/corpus.hpp"

namespace kinfuse {

/// One multiple-choice instance. `premises[i]` holds the knowledge passages
/// attached to option i (possibly none).
struct McqItem {
  std::string id;
  std::optional<std::string> context;
  std::string question;
  std::vector<std::string> options;
  std::optional<std::size_t> gold;
  std::optional<std::vector<std::vector<KnowledgeSentence>>> premises;

  std::size_t n_options() const { return options.size(); }
  /// Throws ValidationError when n < 2, gold >= n, or premises has the wrong arity.
  void validate() const;

  friend bool operator==(const McqItem&, const McqItem&) = default;
};

enum class SchemaTag { Anli, Piqa, SocialIqa, Pfqa, Generic };

SchemaTag parse_schema_tag(std::string_view name);
std::string_view schema_tag_name(SchemaTag tag);

struct McqDataset {
  std::vector<McqItem> items;
  SchemaTag schema_tag = SchemaTag::Generic;

  /// Unique ids and uniform option count.
  void validate() const;
  bool has_gold() const;
};

}  // namespace kinfuse
