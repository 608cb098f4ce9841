#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kinfuse/index.hpp"
#include "kinfuse/mcq.hpp"
#include "kinfuse/querygen.hpp"
#include "kinfuse/rerank.hpp"

namespace kinfuse {

/// Field names used to read one dataset flavour from JSON-lines.
struct SchemaMapping {
  std::string id_field;                     // empty -> "<schema>-<ordinal>"
  std::vector<std::string> context_fields;  // joined with a space
  std::string question_field;               // empty -> constant_question
  std::string constant_question;
  std::vector<std::string> option_fields;   // one field per option, or a single array field
  std::string label_field;
  int label_base = 0;

  static SchemaMapping defaults(SchemaTag tag);
  /// Overrides from "key = value" lines; list values are comma separated.
  /// Keys: id, context, question, constant_question, options, label, label_base.
  SchemaMapping with_overrides(const std::filesystem::path& mapping_file) const;
};

inline constexpr const char* kAnliQuestion = "What is the most plausible explanation?";

struct LoadMcqOptions {
  std::optional<SchemaMapping> mapping;           // defaults(schema) when absent
  std::optional<std::filesystem::path> labels;    // one label per line, overrides inline labels
};

McqDataset load_mcq(const std::filesystem::path& path, SchemaTag schema, const LoadMcqOptions& options = {});

/// Interchange JSON-lines with embedded premises (the generic schema).
std::string serialize_mcq_jsonl(const McqDataset& dataset);
McqDataset parse_mcq_jsonl(std::string_view contents, std::string_view origin = "<memory>",
                           SchemaTag tag = SchemaTag::Generic);

struct AttachConfig {
  QueryConfig query;
  RerankConfig rerank;
  std::size_t retrieve_k = 50;
};

/// Premise lists for every option: query -> BM25 top-k -> greedy re-rank to m.
/// Options whose query filters to nothing retry with stopword-only filtering;
/// if retrieval still finds nothing the list stays empty.
McqDataset attach_premises(const McqDataset& dataset, const InvertedIndex& index, const AttachConfig& config);

std::vector<KnowledgeSentence> retrieve_for_option(const McqItem& item, std::size_t option,
                                                   const InvertedIndex& index, const AttachConfig& config);

}  // namespace kinfuse
