#include "kinfuse/eval.hpp"

#include <algorithm>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "kinfuse/error.hpp"
#include "kinfuse/io.hpp"
#include "kinfuse/text.hpp"

namespace kinfuse {

EvalReport evaluate(const FusionModel& model, const McqDataset& dataset, std::string fingerprint) {
  if (!dataset.has_gold()) throw ValidationError("evaluation requires gold labels on every item");
  EvalReport report;
  report.fingerprint = std::move(fingerprint);
  report.n_items = dataset.items.size();
  for (const auto& item : dataset.items) {
    auto s = model.score(item);
    Prediction p{item.id, std::move(s.scores), std::move(s.weights), s.predicted, item.gold};
    if (p.predicted == *item.gold) ++report.correct;
    report.predictions.push_back(std::move(p));
  }
  report.accuracy = static_cast<double>(report.correct) / static_cast<double>(report.n_items);
  return report;
}

std::string serialize_predictions(const EvalReport& report) {
  std::string out;
  for (const auto& p : report.predictions) {
    nlohmann::json j;
    j["item"] = p.item;
    j["scores"] = p.scores;
    j["weights"] = p.weights ? nlohmann::json(*p.weights) : nlohmann::json(nullptr);
    j["predicted"] = p.predicted;
    j["gold"] = p.gold ? nlohmann::json(*p.gold) : nlohmann::json(nullptr);
    out += j.dump();
    out += '\n';
  }
  return out;
}

double accuracy_from_predictions(std::string_view jsonl) {
  std::size_t n = 0, correct = 0;
  for (const auto& line : io::split_lines(jsonl)) {
    if (text::normalize_whitespace(line).empty()) continue;
    auto j = nlohmann::json::parse(line);
    if (j["gold"].is_null()) throw ValidationError("prediction without gold label");
    ++n;
    if (j["predicted"].get<std::size_t>() == j["gold"].get<std::size_t>()) ++correct;
  }
  if (n == 0) throw ValidationError("no predictions");
  return static_cast<double>(correct) / static_cast<double>(n);
}

double normalized_overlap(std::string_view knowledge, std::string_view question_plus_answer) {
  auto qa = text::tokenize(question_plus_answer);
  std::sort(qa.begin(), qa.end());
  qa.erase(std::unique(qa.begin(), qa.end()), qa.end());
  if (qa.empty()) return 0.0;
  auto k = text::tokenize(knowledge);
  std::sort(k.begin(), k.end());
  k.erase(std::unique(k.begin(), k.end()), k.end());
  std::vector<std::string> inter;
  std::set_intersection(k.begin(), k.end(), qa.begin(), qa.end(), std::back_inserter(inter));
  return static_cast<double>(inter.size()) / static_cast<double>(qa.size());
}

std::vector<WeightOverlapRow> weight_overlap_report(const FusionModel& model, const McqDataset& dataset) {
  if (model.head() != HeadKind::WeightedSum) throw ValidationError("weight report needs a weighted-sum model");
  std::vector<WeightOverlapRow> rows;
  for (const auto& item : dataset.items) {
    auto s = model.score(item);
    const auto qslot = question_slot(item);
    for (std::size_t i = 0; i < item.n_options(); ++i) {
      const auto passages = passages_for(item, i);
      const auto& w = (*s.weights)[i];
      const auto qa = qslot + " " + item.options[i];
      for (std::size_t j = 0; j < passages.size(); ++j) {
        rows.push_back({item.id, i, j, w[j], normalized_overlap(passages[j], qa)});
      }
    }
  }
  return rows;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void append_item_texts(std::vector<std::string>& out, const McqItem& item) {
  if (item.context) out.push_back(*item.context);
  out.push_back(item.question);
  out.insert(out.end(), item.options.begin(), item.options.end());
  if (item.premises) {
    for (const auto& list : *item.premises) {
      for (const auto& s : list) out.push_back(s.text);
    }
  }
}

}  // namespace

std::string weight_overlap_csv(const std::vector<WeightOverlapRow>& rows) {
  std::string out = "item,option,passage,weight,overlap\n";
  for (const auto& r : rows) {
    out += csv_field(r.item) + "," + std::to_string(r.option) + "," + std::to_string(r.passage) + "," +
           fmt_double(r.weight) + "," + fmt_double(r.overlap) + "\n";
  }
  return out;
}

std::vector<std::string> collect_texts(const KnowledgeCorpus* corpus, std::span<const McqDataset* const> datasets) {
  std::vector<std::string> out;
  if (corpus) {
    for (const auto& s : corpus->sentences()) out.push_back(s.text);
  }
  for (const auto* ds : datasets) {
    for (const auto& item : ds->items) append_item_texts(out, item);
  }
  return out;
}

std::vector<SweepPoint> sweep_m(const SweepConfig& config, const InvertedIndex& index, const McqDataset& train_set,
                                const McqDataset& eval_set, std::span<const std::size_t> m_values,
                                const FusionModel* trained) {
  if (!config.retrain && !trained) throw ValidationError("sweep without retraining needs a trained model");
  for (std::size_t i = 0; i < m_values.size(); ++i) {
    if (m_values[i] < 1) throw ValidationError("m values must be positive");
    if (i > 0 && m_values[i] <= m_values[i - 1]) throw ValidationError("m values must be ascending");
  }
  std::vector<SweepPoint> points;
  for (auto m : m_values) {
    AttachConfig attach = config.attach;
    attach.rerank.m = m;
    auto eval_with = attach_premises(eval_set, index, attach);
    if (config.retrain) {
      auto train_with = attach_premises(train_set, index, attach);
      const McqDataset* sets[] = {&train_with, &eval_with};
      auto vocab = Vocabulary::build(collect_texts(&index.corpus(), sets));
      auto model = FusionModel::with_encoder(EncoderModel::create(std::move(vocab), config.encoder, config.model_seed),
                                             config.head, config.tied, config.model_seed);
      model = train(std::move(model), train_with, config.train);
      points.push_back({m, evaluate(model, eval_with).accuracy});
    } else {
      points.push_back({m, evaluate(*trained, eval_with).accuracy});
    }
  }
  return points;
}

std::string sweep_csv(const std::vector<SweepPoint>& points) {
  std::string out = "m,accuracy\n";
  for (const auto& p : points) out += std::to_string(p.m) + "," + fmt_double(p.accuracy) + "\n";
  return out;
}

}  // namespace kinfuse
