#include "kinfuse/datasets.hpp"

#include <cstdio>

#include <nlohmann/json.hpp>

#include "kinfuse/error.hpp"
#include "kinfuse/io.hpp"
#include "kinfuse/text.hpp"

namespace kinfuse {

using nlohmann::json;

SchemaMapping SchemaMapping::defaults(SchemaTag tag) {
  SchemaMapping m;
  switch (tag) {
    case SchemaTag::Anli:
      m.context_fields = {"obs1", "obs2"};
      m.constant_question = kAnliQuestion;
      m.option_fields = {"hyp1", "hyp2"};
      m.label_field = "label";
      m.label_base = 1;
      break;
    case SchemaTag::Piqa:
      m.id_field = "id";
      m.question_field = "goal";
      m.option_fields = {"sol1", "sol2"};
      m.label_field = "label";
      m.label_base = 0;
      break;
    case SchemaTag::SocialIqa:
      m.id_field = "id";
      m.context_fields = {"context"};
      m.question_field = "question";
      m.option_fields = {"answerA", "answerB", "answerC"};
      m.label_field = "label";
      m.label_base = 1;
      break;
    case SchemaTag::Pfqa:
    case SchemaTag::Generic:
      m.id_field = "id";
      m.context_fields = {"context"};
      m.question_field = "question";
      m.option_fields = {"options"};
      m.label_field = "gold";
      m.label_base = 0;
      break;
  }
  return m;
}

namespace {

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    auto comma = value.find(',', start);
    if (comma == std::string::npos) comma = value.size();
    auto piece = text::normalize_whitespace(value.substr(start, comma - start));
    if (!piece.empty()) out.push_back(piece);
    start = comma + 1;
  }
  return out;
}

std::string where(std::string_view origin, std::size_t lineno) {
  return std::string(origin) + ":" + std::to_string(lineno);
}

std::string field_string(const json& record, const std::string& field, std::string_view origin,
                         std::size_t lineno, bool required) {
  auto it = record.find(field);
  if (it == record.end() || it->is_null()) {
    if (required) throw ValidationError(where(origin, lineno) + ": missing field '" + field + "'");
    return {};
  }
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw ValidationError(where(origin, lineno) + ": field '" + field + "' must be a string");
}

std::optional<long long> parse_label(const json& value, std::string_view origin, std::size_t lineno) {
  if (value.is_null()) return std::nullopt;
  if (value.is_number_integer()) return value.get<long long>();
  if (value.is_string()) {
    auto s = text::normalize_whitespace(value.get<std::string>());
    if (s.empty()) return std::nullopt;
    try {
      std::size_t used = 0;
      long long v = std::stoll(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
  }
  throw ValidationError(where(origin, lineno) + ": label is not an integer");
}

json sentence_to_json(const KnowledgeSentence& s) {
  json j = {{"id", s.id}, {"text", s.text}, {"source", s.source_tag}};
  if (s.title) j["title"] = *s.title;
  return j;
}

KnowledgeSentence sentence_from_json(const json& j, std::string_view origin, std::size_t lineno) {
  if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
    throw ValidationError(where(origin, lineno) + ": malformed premise");
  }
  KnowledgeSentence s;
  s.id = j.value("id", std::string());
  s.text = j["text"].get<std::string>();
  s.source_tag = j.value("source", std::string());
  if (j.contains("title") && j["title"].is_string()) s.title = j["title"].get<std::string>();
  return s;
}

McqItem item_from_record(const json& record, const SchemaMapping& m, SchemaTag tag, std::size_t ordinal,
                         std::string_view origin, std::size_t lineno) {
  McqItem item;
  if (!m.id_field.empty() && record.contains(m.id_field) && !record[m.id_field].is_null()) {
    item.id = field_string(record, m.id_field, origin, lineno, true);
  } else {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%08zu", ordinal);
    item.id = std::string(schema_tag_name(tag)) + "-" + buf;
  }

  std::vector<std::string> context_parts;
  for (const auto& f : m.context_fields) {
    auto v = text::normalize_whitespace(field_string(record, f, origin, lineno, false));
    if (!v.empty()) context_parts.push_back(v);
  }
  if (!context_parts.empty()) item.context = text::join(context_parts, " ");

  item.question = m.question_field.empty() ? m.constant_question
                                           : field_string(record, m.question_field, origin, lineno, true);

  if (m.option_fields.size() == 1) {
    auto it = record.find(m.option_fields[0]);
    if (it == record.end() || !it->is_array()) {
      throw ValidationError(where(origin, lineno) + ": field '" + m.option_fields[0] + "' must be an array");
    }
    for (const auto& o : *it) {
      if (!o.is_string()) throw ValidationError(where(origin, lineno) + ": options must be strings");
      item.options.push_back(o.get<std::string>());
    }
  } else {
    for (const auto& f : m.option_fields) item.options.push_back(field_string(record, f, origin, lineno, true));
  }

  if (!m.label_field.empty() && record.contains(m.label_field)) {
    if (auto label = parse_label(record[m.label_field], origin, lineno)) {
      long long idx = *label - m.label_base;
      if (idx < 0 || idx >= static_cast<long long>(item.options.size())) {
        throw ValidationError(where(origin, lineno) + ": label out of range");
      }
      item.gold = static_cast<std::size_t>(idx);
    }
  }

  if (record.contains("premises") && !record["premises"].is_null()) {
    const auto& p = record["premises"];
    if (!p.is_array()) throw ValidationError(where(origin, lineno) + ": premises must be an array");
    std::vector<std::vector<KnowledgeSentence>> premises;
    for (const auto& per_option : p) {
      if (!per_option.is_array()) throw ValidationError(where(origin, lineno) + ": premises entries must be arrays");
      auto& list = premises.emplace_back();
      for (const auto& s : per_option) list.push_back(sentence_from_json(s, origin, lineno));
    }
    item.premises = std::move(premises);
  }

  try {
    item.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(where(origin, lineno) + ": " + e.what());
  }
  return item;
}

McqDataset parse_records(std::string_view contents, std::string_view origin, SchemaTag tag, const SchemaMapping& m,
                         const std::optional<std::vector<std::string>>& labels) {
  McqDataset ds;
  ds.schema_tag = tag;
  auto lines = io::split_lines(contents);
  std::size_t ordinal = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::normalize_whitespace(lines[i]).empty()) continue;
    json record;
    try {
      record = json::parse(lines[i]);
    } catch (const std::exception& e) {
      throw ValidationError(where(origin, i + 1) + ": malformed record: " + e.what());
    }
    if (!record.is_object()) throw ValidationError(where(origin, i + 1) + ": malformed record: not an object");
    if (labels) {
      if (ordinal >= labels->size()) throw ValidationError(where(origin, i + 1) + ": no label for record");
      record[m.label_field.empty() ? "label" : m.label_field] = (*labels)[ordinal];
    }
    auto mapping = m;
    if (labels && mapping.label_field.empty()) mapping.label_field = "label";
    ds.items.push_back(item_from_record(record, mapping, tag, ordinal, origin, i + 1));
    ++ordinal;
  }
  if (labels && labels->size() != ordinal) {
    throw ValidationError(std::string(origin) + ": label count " + std::to_string(labels->size()) +
                          " does not match record count " + std::to_string(ordinal));
  }
  ds.validate();
  return ds;
}

}  // namespace

SchemaMapping SchemaMapping::with_overrides(const std::filesystem::path& mapping_file) const {
  SchemaMapping m = *this;
  auto lines = io::split_lines(io::read_file(mapping_file));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line = text::normalize_whitespace(lines[i]);
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(mapping_file.string() + ":" + std::to_string(i + 1) + ": expected key = value");
    }
    auto key = text::normalize_whitespace(line.substr(0, eq));
    auto value = text::normalize_whitespace(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key == "id") m.id_field = value;
    else if (key == "context") m.context_fields = split_list(value);
    else if (key == "question") m.question_field = value;
    else if (key == "constant_question") m.constant_question = value;
    else if (key == "options") m.option_fields = split_list(value);
    else if (key == "label") m.label_field = value;
    else if (key == "label_base") m.label_base = std::stoi(value);
    else throw ValidationError(mapping_file.string() + ":" + std::to_string(i + 1) + ": unknown key '" + key + "'");
  }
  return m;
}

McqDataset load_mcq(const std::filesystem::path& path, SchemaTag schema, const LoadMcqOptions& options) {
  auto mapping = options.mapping.value_or(SchemaMapping::defaults(schema));
  std::optional<std::vector<std::string>> labels;
  if (options.labels) {
    labels.emplace();
    for (auto& line : io::split_lines(io::read_file(*options.labels))) {
      auto v = text::normalize_whitespace(line);
      if (!v.empty()) labels->push_back(v);
    }
  }
  return parse_records(io::read_file(path), path.string(), schema, mapping, labels);
}

McqDataset parse_mcq_jsonl(std::string_view contents, std::string_view origin, SchemaTag tag) {
  return parse_records(contents, origin, tag, SchemaMapping::defaults(SchemaTag::Generic), std::nullopt);
}

std::string serialize_mcq_jsonl(const McqDataset& dataset) {
  std::string out;
  for (const auto& item : dataset.items) {
    json j;
    j["id"] = item.id;
    j["context"] = item.context ? json(*item.context) : json(nullptr);
    j["question"] = item.question;
    j["options"] = item.options;
    j["gold"] = item.gold ? json(*item.gold) : json(nullptr);
    if (item.premises) {
      json p = json::array();
      for (const auto& list : *item.premises) {
        json l = json::array();
        for (const auto& s : list) l.push_back(sentence_to_json(s));
        p.push_back(std::move(l));
      }
      j["premises"] = std::move(p);
    } else {
      j["premises"] = nullptr;
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<KnowledgeSentence> retrieve_for_option(const McqItem& item, std::size_t option,
                                                   const InvertedIndex& index, const AttachConfig& config) {
  std::optional<Query> query;
  try {
    query = generate_query(item, option, config.query);
  } catch (const EmptyQueryError&) {
    if (config.query.pos_filter) {
      QueryConfig fallback = config.query;
      fallback.pos_filter = false;
      try {
        query = generate_query(item, option, fallback);
      } catch (const EmptyQueryError&) {
      }
    }
  }
  if (!query) return {};
  auto terms = query->bag();
  auto hits = index.search(terms, config.retrieve_k);
  if (hits.empty()) return {};
  std::vector<KnowledgeSentence> candidates;
  candidates.reserve(hits.size());
  for (const auto& h : hits) candidates.push_back(index.sentence(h.doc));
  return rerank(candidates, query->text(), config.rerank);
}

McqDataset attach_premises(const McqDataset& dataset, const InvertedIndex& index, const AttachConfig& config) {
  McqDataset out = dataset;
  for (auto& item : out.items) {
    std::vector<std::vector<KnowledgeSentence>> premises;
    premises.reserve(item.n_options());
    for (std::size_t i = 0; i < item.n_options(); ++i) premises.push_back(retrieve_for_option(item, i, index, config));
    item.premises = std::move(premises);
  }
  return out;
}

}  // namespace kinfuse
