#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kinfuse/mcq.hpp"

namespace kinfuse::pfqa {

struct ParentFact {
  std::string child;
  std::string parent;
};

enum class QuestionType { Parent, Grandparent, Sibling };

std::string_view question_type_name(QuestionType t);

struct PfqaQuestion {
  std::string person;
  QuestionType qtype;
  std::string question;
  std::vector<std::string> options;  // four first names
  std::size_t gold = 0;
  std::string gold_full_name;
  std::vector<std::string> knowledge;  // "The parent of X is Y." sentences
};

/// Unit-cost Levenshtein distance, case-sensitive, byte-wise.
std::size_t edit_distance(std::string_view a, std::string_view b);

/// First whitespace-separated token.
std::string first_name(std::string_view full_name);

std::string parent_sentence(std::string_view child, std::string_view parent);

/// `count` distinct names from `pool` closest to `gold` by edit distance
/// (distance 1 preferred, then 2, then whatever is nearest). Names equal to
/// gold or listed in `exclude` are never chosen. Equal-distance ties are
/// ordered by a seeded shuffle.
std::vector<std::string> select_distractors(std::string_view gold, const std::vector<std::string>& pool,
                                            std::size_t count, std::uint64_t seed,
                                            const std::set<std::string, std::less<>>& exclude = {});

/// One question per (person, type) that has at least one true answer.
std::vector<PfqaQuestion> generate_questions(const std::vector<ParentFact>& facts, std::uint64_t seed);

struct Splits {
  std::vector<PfqaQuestion> train, dev, test;
};

/// Splits by person: every question about one person lands in the same split.
Splits assign_splits(const std::vector<PfqaQuestion>& questions, std::array<double, 3> ratios, std::uint64_t seed);

/// TSV child<TAB>parent.
std::vector<ParentFact> load_facts(const std::filesystem::path& path);
std::vector<ParentFact> parse_facts(std::string_view contents, std::string_view origin = "<memory>");

McqItem to_mcq_item(const PfqaQuestion& q, std::string id);
/// Generic MCQ JSON-lines with "person", "qtype" and "knowledge" fields added.
std::string serialize_questions(const std::vector<PfqaQuestion>& questions, std::string_view id_prefix);

}  // namespace kinfuse::pfqa
