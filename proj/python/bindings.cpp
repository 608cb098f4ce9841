#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <map>
#include <memory>
#include <string>

#include "kinfuse/config.hpp"
#include "kinfuse/corpus.hpp"
#include "kinfuse/datasets.hpp"
#include "kinfuse/encoder.hpp"
#include "kinfuse/error.hpp"
#include "kinfuse/eval.hpp"
#include "kinfuse/fusion.hpp"
#include "kinfuse/index.hpp"
#include "kinfuse/pfqa.hpp"
#include "kinfuse/pipeline.hpp"
#include "kinfuse/rerank.hpp"
#include "kinfuse/text.hpp"

namespace py = pybind11;
using namespace kinfuse;

namespace {

using Settings = std::map<std::string, std::string>;

KeyValueConfig to_config(const Settings& settings) {
  KeyValueConfig c;
  for (const auto& [k, v] : settings) c.set(k, v);
  return c;
}

py::dict scores_to_dict(const OptionScores& s) {
  py::dict d;
  d["scores"] = s.scores;
  d["weights"] = s.weights ? py::cast(*s.weights) : py::none();
  d["predicted"] = s.predicted;
  return d;
}

}  // namespace

PYBIND11_MODULE(_kinfuse, m) {
  m.doc() = "Knowledge infusion for multiple-choice question answering";

  auto validation = py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<EmptyQueryError>(m, "EmptyQueryError", validation.ptr());

  m.def("tokenize", &text::tokenize, py::arg("text"));
  m.def("split_sentences", &split_sentences, py::arg("paragraph"));

  py::class_<KnowledgeSentence>(m, "KnowledgeSentence")
      .def(py::init([](std::string id, std::string text, std::string source_tag, std::optional<std::string> title) {
             return KnowledgeSentence{std::move(id), std::move(text), std::move(source_tag), std::move(title)};
           }),
           py::arg("id"), py::arg("text"), py::arg("source_tag") = "kb", py::arg("title") = py::none())
      .def_readwrite("id", &KnowledgeSentence::id)
      .def_readwrite("text", &KnowledgeSentence::text)
      .def_readwrite("source_tag", &KnowledgeSentence::source_tag)
      .def_readwrite("title", &KnowledgeSentence::title)
      .def("__repr__", [](const KnowledgeSentence& s) { return "<KnowledgeSentence " + s.id + ": " + s.text + ">"; });

  py::class_<KnowledgeCorpus>(m, "KnowledgeCorpus")
      .def(py::init<std::vector<KnowledgeSentence>>(), py::arg("sentences"))
      .def_property_readonly("sentences", &KnowledgeCorpus::sentences)
      .def_property_readonly("token_count", &KnowledgeCorpus::token_count)
      .def("__len__", &KnowledgeCorpus::size)
      .def("to_jsonl", &serialize_corpus_jsonl);

  m.def(
      "load_corpus",
      [](const std::filesystem::path& path, const std::string& format, std::uint64_t seed, const Settings& settings) {
        return load_corpus(path, parse_corpus_format(format), corpus_options_from(to_config(settings), seed));
      },
      py::arg("path"), py::arg("format") = "plain-lines", py::arg("seed") = 0, py::arg("config") = Settings{});

  py::class_<RetrievalHit>(m, "RetrievalHit")
      .def_readonly("sentence_id", &RetrievalHit::sentence_id)
      .def_readonly("doc", &RetrievalHit::doc)
      .def_readonly("score", &RetrievalHit::score)
      .def_readonly("rank", &RetrievalHit::rank);

  py::class_<InvertedIndex>(m, "InvertedIndex")
      .def_static(
          "build",
          [](const KnowledgeCorpus& corpus, double k1, double b) { return InvertedIndex::build(corpus, {k1, b}); },
          py::arg("corpus"), py::arg("k1") = 1.2, py::arg("b") = 0.75)
      .def_static("load", &InvertedIndex::load, py::arg("path"))
      .def("save", &InvertedIndex::save, py::arg("path"))
      .def(
          "search",
          [](const InvertedIndex& index, const std::vector<std::string>& terms, std::size_t k) {
            return index.search(terms, k);
          },
          py::arg("terms"), py::arg("k"))
      .def("idf", &InvertedIndex::idf, py::arg("term"))
      .def_property_readonly("n_docs", &InvertedIndex::n_docs)
      .def_property_readonly("avg_doc_len", &InvertedIndex::avg_doc_len)
      .def_property_readonly("corpus", &InvertedIndex::corpus, py::return_value_policy::reference_internal);

  m.def(
      "rerank_order",
      [](const std::vector<std::string>& candidates, const std::string& query, std::size_t m, double lambda) {
        RerankConfig cfg;
        cfg.m = m;
        cfg.lambda = lambda;
        return rerank_order(candidates, query, cfg);
      },
      py::arg("candidates"), py::arg("query"), py::arg("m"), py::arg("lambda_") = 1.0);
  m.def("token_jaccard", &token_jaccard, py::arg("a"), py::arg("b"));

  py::class_<McqItem>(m, "McqItem")
      .def(py::init([](std::string id, std::string question, std::vector<std::string> options,
                       std::optional<std::size_t> gold, std::optional<std::string> context) {
             McqItem it{std::move(id), std::move(context), std::move(question), std::move(options), gold, std::nullopt};
             it.validate();
             return it;
           }),
           py::arg("id"), py::arg("question"), py::arg("options"), py::arg("gold") = py::none(),
           py::arg("context") = py::none())
      .def_readwrite("id", &McqItem::id)
      .def_readwrite("context", &McqItem::context)
      .def_readwrite("question", &McqItem::question)
      .def_readwrite("options", &McqItem::options)
      .def_readwrite("gold", &McqItem::gold)
      .def_readwrite("premises", &McqItem::premises);

  py::class_<McqDataset>(m, "McqDataset")
      .def(py::init([](std::vector<McqItem> items) {
             McqDataset d;
             d.items = std::move(items);
             d.validate();
             return d;
           }),
           py::arg("items"))
      .def_readwrite("items", &McqDataset::items)
      .def("__len__", [](const McqDataset& d) { return d.items.size(); })
      .def("to_jsonl", &serialize_mcq_jsonl);

  m.def(
      "load_mcq",
      [](const std::filesystem::path& path, const std::string& schema) {
        return load_mcq(path, parse_schema_tag(schema));
      },
      py::arg("path"), py::arg("schema") = "generic");
  m.def(
      "parse_mcq_jsonl", [](const std::string& contents) { return parse_mcq_jsonl(contents); }, py::arg("contents"));
  m.def(
      "attach_premises",
      [](const McqDataset& dataset, const InvertedIndex& index, const Settings& settings) {
        return attach_premises(dataset, index, attach_config_from(to_config(settings)));
      },
      py::arg("dataset"), py::arg("index"), py::arg("config") = Settings{},
      "Per-option premises: query, BM25 retrieval, then greedy re-ranking. Config keys as in the CLI.");

  // pfqa
  m.def("edit_distance", &pfqa::edit_distance, py::arg("a"), py::arg("b"));
  m.def(
      "select_distractors",
      [](const std::string& gold, const std::vector<std::string>& pool, std::size_t count, std::uint64_t seed) {
        return pfqa::select_distractors(gold, pool, count, seed);
      },
      py::arg("gold"), py::arg("pool"), py::arg("count") = 3, py::arg("seed") = 0);
  m.def(
      "generate_pfqa",
      [](const std::vector<std::pair<std::string, std::string>>& facts, std::uint64_t seed) {
        std::vector<pfqa::ParentFact> pf;
        for (const auto& [c, p] : facts) pf.push_back({c, p});
        py::list out;
        for (const auto& q : pfqa::generate_questions(pf, seed)) {
          py::dict d;
          d["person"] = q.person;
          d["qtype"] = std::string(pfqa::question_type_name(q.qtype));
          d["question"] = q.question;
          d["options"] = q.options;
          d["gold"] = q.gold;
          d["knowledge"] = q.knowledge;
          out.append(d);
        }
        return out;
      },
      py::arg("facts"), py::arg("seed") = 0, "Questions from (child, parent) pairs, as dicts.");

  // models
  py::class_<Vocabulary>(m, "Vocabulary")
      .def_static("build", [](const std::vector<std::string>& texts) { return Vocabulary::build(texts); },
                  py::arg("texts"))
      .def("id", &Vocabulary::id, py::arg("token"))
      .def("__len__", &Vocabulary::size);

  py::class_<EncoderModel>(m, "EncoderModel")
      .def_static(
          "create",
          [](Vocabulary vocab, std::size_t dim, std::size_t max_len, std::uint64_t seed) {
            EncoderConfig cfg;
            cfg.dim = dim;
            cfg.max_len = max_len;
            return EncoderModel::create(std::move(vocab), cfg, seed);
          },
          py::arg("vocab"), py::arg("dim") = 32, py::arg("max_len") = 256, py::arg("seed") = 0)
      .def_static("load", &EncoderModel::load, py::arg("path"))
      .def("save", &EncoderModel::save, py::arg("path"))
      .def_property_readonly("dim", &EncoderModel::dim)
      .def(
          "encode_text",
          [](const EncoderModel& e, const std::string& text) {
            TokenSequence seq = {Vocabulary::kCls};
            for (int id : e.vocab().encode_text(text)) seq.push_back(id);
            seq.push_back(Vocabulary::kSep);
            return e.encode(seq);
          },
          py::arg("text"), "Pooled vector of [CLS] text [SEP].");

  m.def(
      "revise",
      [](const EncoderModel& model, const KnowledgeCorpus& corpus, std::uint64_t seed, const Settings& settings) {
        RevisionLog log;
        auto out = revision_train(model, corpus, train_config_from(to_config(settings), "revise", seed), &log);
        return py::make_tuple(out, log.mlm_loss);
      },
      py::arg("model"), py::arg("corpus"), py::arg("seed") = 0, py::arg("config") = Settings{},
      "Revision training; returns (encoder, per-epoch masked-token loss).");
  m.def("masked_lm_loss", &masked_lm_loss, py::arg("model"), py::arg("corpus"), py::arg("mask_probability") = 0.15,
        py::arg("seed") = 0);

  py::class_<FusionModel>(m, "FusionModel")
      .def_static(
          "with_encoder",
          [](const EncoderModel& encoder, const std::string& head, bool tied, std::uint64_t seed) {
            return FusionModel::with_encoder(encoder, parse_head_kind(head), tied, seed);
          },
          py::arg("encoder"), py::arg("head") = "weighted-sum", py::arg("tied") = false, py::arg("seed") = 0)
      .def_static("load", [](const std::filesystem::path& p) { return FusionModel::load(p); }, py::arg("path"))
      .def("save", &FusionModel::save, py::arg("path"))
      .def_property_readonly("head", [](const FusionModel& f) { return std::string(head_kind_name(f.head())); })
      .def_property_readonly("tied", &FusionModel::tied)
      .def(
          "score", [](const FusionModel& f, const McqItem& item) { return scores_to_dict(f.score(item)); },
          py::arg("item"))
      .def("loss", &FusionModel::loss, py::arg("item"));

  m.def(
      "train",
      [](const FusionModel& model, const McqDataset& dataset, std::uint64_t seed, const Settings& settings) {
        FusionTrainLog log;
        auto out = train(model, dataset, train_config_from(to_config(settings), "train", seed), &log);
        return py::make_tuple(out, log.epoch_loss);
      },
      py::arg("model"), py::arg("dataset"), py::arg("seed") = 0, py::arg("config") = Settings{},
      "Fine-tuning; returns (model, per-epoch loss).");
  m.def(
      "grad_check",
      [](FusionModel& model, const McqItem& item) {
        auto r = grad_check(model, item);
        return py::make_tuple(r.max_relative_error, r.entries_checked);
      },
      py::arg("model"), py::arg("item"));

  m.def(
      "evaluate",
      [](const FusionModel& model, const McqDataset& dataset) {
        auto r = evaluate(model, dataset);
        return py::make_tuple(r.accuracy, serialize_predictions(r));
      },
      py::arg("model"), py::arg("dataset"), "Returns (accuracy, predictions JSON-lines).");
  m.def("normalized_overlap", &normalized_overlap, py::arg("knowledge"), py::arg("question_plus_answer"));
  m.def(
      "weight_report",
      [](const FusionModel& model, const McqDataset& dataset) {
        return weight_overlap_csv(weight_overlap_report(model, dataset));
      },
      py::arg("model"), py::arg("dataset"), "CSV of (item, option, passage, weight, overlap).");
  m.def(
      "sweep_m",
      [](const InvertedIndex& index, const McqDataset& train_set, const McqDataset& eval_set,
         const std::vector<std::size_t>& m_values, std::uint64_t seed, const Settings& settings) {
        auto cfg = to_config(settings);
        SweepConfig sc;
        sc.attach = attach_config_from(cfg);
        sc.train = train_config_from(cfg, "train", seed + 1);
        sc.encoder = encoder_config_from(cfg);
        auto choice = head_choice_from(cfg, strategy_from(cfg));
        sc.head = choice.head;
        sc.tied = choice.tied;
        sc.model_seed = seed;
        std::vector<std::pair<std::size_t, double>> out;
        for (const auto& p : sweep_m(sc, index, train_set, eval_set, m_values)) out.emplace_back(p.m, p.accuracy);
        return out;
      },
      py::arg("index"), py::arg("train"), py::arg("eval"), py::arg("m_values"), py::arg("seed") = 0,
      py::arg("config") = Settings{});
}
