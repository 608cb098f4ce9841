// kinfuse command-line driver: one verb per pipeline stage.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kinfuse/config.hpp"
#include "kinfuse/corpus.hpp"
#include "kinfuse/datasets.hpp"
#include "kinfuse/encoder.hpp"
#include "kinfuse/error.hpp"
#include "kinfuse/eval.hpp"
#include "kinfuse/fusion.hpp"
#include "kinfuse/index.hpp"
#include "kinfuse/io.hpp"
#include "kinfuse/pfqa.hpp"
#include "kinfuse/pipeline.hpp"

namespace fs = std::filesystem;
using namespace kinfuse;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

const char* kConfigHelp = R"(Configuration file (--config): "key = value" lines, "[section]" headers,
"#" comments. Keys, with defaults:
  [bm25]      k1 = 1.2, b = 0.75
  [query]     stopwords = <built-in list file path>, lexicon = <POS TSV path>,
              pos_filter = false
  [attach]    retrieve_k = 50
  [rerank]    m = 10, lambda = 1.0, similarity = jaccard | cosine,
              embeddings = <word-vector file, needed for cosine>
  [corpus]    source_tag, names = <name pool file>, templates = <ATOMIC TSV>
  [encoder]   dim = 32, max_len = 256, ln_eps = 1e-12
  [revise]    epochs = 10, learning_rate = 0.05, batch_size = 8, momentum = 0.9,
              mask_probability = 0.15, max_grad_norm = 0
  [train]     same keys as [revise] plus freeze_encoder = false
  [model]     head = baseline | concat | parallel-max | simple-sum | weighted-sum,
              tied = false
  [strategy]  revision = false, openbook = true
  [pfqa]      train = 0.8, dev = 0.1, test = 0.1
  [sweep]     retrain = true

Exit status: 0 success, 1 validation error, 2 I/O error.)";

struct Globals {
  std::uint64_t seed = 0;
  std::string config_path;
  std::string out;
};

struct DatasetArgs {
  std::string path;
  std::string schema = "generic";
  std::string labels;
  std::string mapping;
};

void add_dataset_options(CLI::App* cmd, DatasetArgs& d, const std::string& flag, const std::string& what) {
  cmd->add_option(flag, d.path, what)->required();
  cmd->add_option("--schema", d.schema, "Dataset schema: anli, piqa, socialiqa, pfqa or generic")
      ->capture_default_str();
  cmd->add_option("--labels", d.labels, "Separate label file, one label per line");
  cmd->add_option("--mapping", d.mapping, "Field mapping overrides (key = value lines)");
}

McqDataset load_dataset(const DatasetArgs& d) {
  auto tag = parse_schema_tag(d.schema);
  LoadMcqOptions opts;
  if (!d.labels.empty()) opts.labels = d.labels;
  if (!d.mapping.empty()) opts.mapping = SchemaMapping::defaults(tag).with_overrides(d.mapping);
  return load_mcq(d.path, tag, opts);
}

KeyValueConfig load_config(const Globals& g) {
  return g.config_path.empty() ? KeyValueConfig{} : KeyValueConfig::load(g.config_path);
}

void require_out(const Globals& g) {
  if (g.out.empty()) throw ValidationError("--out is required");
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + p.parent_path().string() + ": " + ec.message());
  }
}

void write_output(const fs::path& p, std::string_view bytes) {
  ensure_parent(p);
  io::write_file(p, bytes);
}

std::shared_ptr<const ExternalVectorStore> load_vectors(const std::string& path) {
  if (path.empty()) return nullptr;
  return std::make_shared<const ExternalVectorStore>(ExternalVectorStore::load(path));
}

std::string fingerprint(KeyValueConfig config, const Globals& g, const std::string& verb) {
  config.set("cli.seed", std::to_string(g.seed));
  config.set("cli.verb", verb);
  return config.fingerprint();
}

// ---------------------------------------------------------------- verbs

struct CorpusPrepArgs {
  std::string input;
  std::string format = "plain-lines";
};

void run_corpus_prep(const Globals& g, const CorpusPrepArgs& a) {
  require_out(g);
  auto cfg = load_config(g);
  auto corpus = load_corpus(a.input, parse_corpus_format(a.format), corpus_options_from(cfg, g.seed));
  write_output(g.out, serialize_corpus_jsonl(corpus));
  std::printf("sentences=%zu tokens=%zu\n", corpus.size(), corpus.token_count());
}

struct IndexBuildArgs {
  std::string corpus;
  std::string format = "corpus-jsonl";
};

void run_index_build(const Globals& g, const IndexBuildArgs& a) {
  require_out(g);
  auto cfg = load_config(g);
  auto corpus = load_corpus(a.corpus, parse_corpus_format(a.format), corpus_options_from(cfg, g.seed));
  auto index = InvertedIndex::build(corpus, bm25_params_from(cfg));
  ensure_parent(g.out);
  index.save(g.out);
  std::printf("docs=%zu terms=%zu avg_len=%.6f\n", index.n_docs(), index.all_postings().size(), index.avg_doc_len());
}

struct AttachArgs {
  std::string index;
  DatasetArgs data;
};

void run_attach(const Globals& g, const AttachArgs& a) {
  require_out(g);
  auto cfg = load_config(g);
  auto index = InvertedIndex::load(a.index);
  auto attached = attach_premises(load_dataset(a.data), index, attach_config_from(cfg));
  std::size_t empty = 0;
  for (const auto& it : attached.items) {
    for (const auto& p : *it.premises) empty += p.empty();
  }
  write_output(g.out, serialize_mcq_jsonl(attached));
  std::printf("items=%zu options_without_premises=%zu\n", attached.items.size(), empty);
}

struct PfqaArgs {
  std::string facts;
};

void run_pfqa_gen(const Globals& g, const PfqaArgs& a) {
  require_out(g);
  auto cfg = load_config(g);
  auto facts = pfqa::load_facts(a.facts);
  auto questions = pfqa::generate_questions(facts, g.seed);
  std::array<double, 3> ratios = {cfg.get_double("pfqa.train", 0.8), cfg.get_double("pfqa.dev", 0.1),
                                  cfg.get_double("pfqa.test", 0.1)};
  auto splits = pfqa::assign_splits(questions, ratios, g.seed + 1);
  fs::path dir(g.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  io::write_file(dir / "train.jsonl", pfqa::serialize_questions(splits.train, "pfqa-train"));
  io::write_file(dir / "dev.jsonl", pfqa::serialize_questions(splits.dev, "pfqa-dev"));
  io::write_file(dir / "test.jsonl", pfqa::serialize_questions(splits.test, "pfqa-test"));
  std::printf("questions=%zu train=%zu dev=%zu test=%zu\n", questions.size(), splits.train.size(), splits.dev.size(),
              splits.test.size());
}

struct ReviseArgs {
  std::string corpus;
  std::string encoder;
  std::vector<std::string> vocab_data;
};

void run_revise(const Globals& g, const ReviseArgs& a) {
  require_out(g);
  auto cfg = load_config(g);
  auto corpus = load_corpus(a.corpus, CorpusFormat::CorpusJsonl);
  EncoderModel model;
  if (!a.encoder.empty()) {
    model = EncoderModel::load(a.encoder);
  } else {
    std::vector<McqDataset> extra;
    for (const auto& p : a.vocab_data) extra.push_back(load_mcq(p, SchemaTag::Generic));
    std::vector<const McqDataset*> ptrs;
    for (const auto& d : extra) ptrs.push_back(&d);
    model = EncoderModel::create(Vocabulary::build(collect_texts(&corpus, ptrs)), encoder_config_from(cfg), g.seed);
  }
  RevisionLog log;
  auto revised = revision_train(model, corpus, train_config_from(cfg, "revise", g.seed + 1), &log);
  ensure_parent(g.out);
  revised.save(g.out);
  std::printf("epochs=%zu mlm_loss_first=%.6f mlm_loss_last=%.6f next_sentence=%s skipped_batches=%zu\n",
              log.mlm_loss.size(), log.mlm_loss.empty() ? 0.0 : log.mlm_loss.front(),
              log.mlm_loss.empty() ? 0.0 : log.mlm_loss.back(), log.next_sentence_used ? "on" : "off",
              log.skipped_batches);
}

struct TrainArgs {
  DatasetArgs data;
  std::string encoder;
  std::string vectors;
  std::string vocab_corpus;
};

void run_train(const Globals& g, const TrainArgs& a) {
  require_out(g);
  auto cfg = load_config(g);
  auto strategy = strategy_from(cfg);
  auto choice = head_choice_from(cfg, strategy);
  auto dataset = load_dataset(a.data);
  if (!strategy.openbook) dataset = without_premises(dataset);
  if (strategy.revision && a.encoder.empty()) throw ValidationError("strategy.revision = true needs --encoder");
  if (!a.encoder.empty() && !a.vectors.empty()) throw ValidationError("--encoder and --vectors are exclusive");

  std::optional<FusionModel> model;
  if (!a.vectors.empty()) {
    model = FusionModel::with_vectors(load_vectors(a.vectors), choice.head, choice.tied, g.seed);
  } else {
    EncoderModel enc;
    if (!a.encoder.empty()) {
      enc = EncoderModel::load(a.encoder);
    } else {
      std::optional<KnowledgeCorpus> corpus;
      if (!a.vocab_corpus.empty()) corpus = load_corpus(a.vocab_corpus, CorpusFormat::CorpusJsonl);
      const McqDataset* sets[] = {&dataset};
      enc = EncoderModel::create(Vocabulary::build(collect_texts(corpus ? &*corpus : nullptr, sets)),
                                 encoder_config_from(cfg), g.seed);
    }
    model = FusionModel::with_encoder(std::move(enc), choice.head, choice.tied, g.seed);
  }
  FusionTrainLog log;
  auto trained = train(std::move(*model), dataset, train_config_from(cfg, "train", g.seed + 1), &log);
  ensure_parent(g.out);
  trained.save(g.out);
  std::printf("head=%s tied=%s epochs=%zu loss_last=%.6f train_accuracy=%.6f\n",
              std::string(head_kind_name(trained.head())).c_str(), trained.tied() ? "true" : "false",
              log.epoch_loss.size(), log.epoch_loss.empty() ? 0.0 : log.epoch_loss.back(),
              log.epoch_accuracy.empty() ? 0.0 : log.epoch_accuracy.back());
}

struct EvalArgs {
  std::string model;
  DatasetArgs data;
  std::string vectors;
};

void run_eval(const Globals& g, const EvalArgs& a) {
  require_out(g);
  auto cfg = load_config(g);
  auto strategy = strategy_from(cfg);
  auto model = FusionModel::load(a.model, load_vectors(a.vectors));
  auto dataset = load_dataset(a.data);
  if (!strategy.openbook) dataset = without_premises(dataset);
  auto report = evaluate(model, dataset, fingerprint(cfg, g, "eval"));
  write_output(g.out, serialize_predictions(report));
  std::printf("accuracy=%.6f correct=%zu items=%zu fingerprint=%s\n", report.accuracy, report.correct, report.n_items,
              report.fingerprint.c_str());
}

struct SweepArgs {
  std::string index;
  DatasetArgs train_data;
  std::string eval_path;
  std::string m_values = "1,3,5,10";
  std::string model;
};

std::vector<std::size_t> parse_m_values(const std::string& s) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(',', start);
    if (end == std::string::npos) end = s.size();
    auto piece = s.substr(start, end - start);
    try {
      std::size_t used = 0;
      long long v = std::stoll(piece, &used);
      if (used != piece.size() || v <= 0) throw std::invalid_argument(piece);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ValidationError("--m expects comma separated positive integers, got '" + s + "'");
    }
    start = end + 1;
  }
  return out;
}

void run_sweep(const Globals& g, const SweepArgs& a) {
  require_out(g);
  auto cfg = load_config(g);
  auto index = InvertedIndex::load(a.index);
  auto train_set = load_dataset(a.train_data);
  DatasetArgs eval_args = a.train_data;
  eval_args.path = a.eval_path;
  eval_args.labels.clear();
  auto eval_set = load_dataset(eval_args);

  SweepConfig sc;
  sc.attach = attach_config_from(cfg);
  sc.train = train_config_from(cfg, "train", g.seed + 1);
  sc.encoder = encoder_config_from(cfg);
  auto choice = head_choice_from(cfg, strategy_from(cfg));
  sc.head = choice.head;
  sc.tied = choice.tied;
  sc.model_seed = g.seed;
  sc.retrain = cfg.get_bool("sweep.retrain", a.model.empty());
  std::optional<FusionModel> trained;
  if (!a.model.empty()) trained = FusionModel::load(a.model);
  auto m_values = parse_m_values(a.m_values);
  auto points = sweep_m(sc, index, train_set, eval_set, m_values, trained ? &*trained : nullptr);
  write_output(g.out, sweep_csv(points));
  for (const auto& p : points) std::printf("m=%zu accuracy=%.6f\n", p.m, p.accuracy);
}

struct WeightReportArgs {
  std::string model;
  DatasetArgs data;
  std::string vectors;
};

void run_weight_report(const Globals& g, const WeightReportArgs& a) {
  require_out(g);
  auto model = FusionModel::load(a.model, load_vectors(a.vectors));
  auto rows = weight_overlap_report(model, load_dataset(a.data));
  write_output(g.out, weight_overlap_csv(rows));
  std::printf("rows=%zu\n", rows.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kinfuse: knowledge infusion for multiple-choice question answering"};
  app.footer(kConfigHelp);
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Base random seed for every stochastic step")->capture_default_str();
  app.add_option("--config", g.config_path, "Key/value configuration file (see below)");
  app.add_option("--out", g.out, "Output file (output directory for pfqa-gen)");

  auto verb = [&](const char* name, const char* desc) {
    auto* cmd = app.add_subcommand(name, desc);
    cmd->fallthrough();
    return cmd;
  };

  CorpusPrepArgs cp;
  auto* c_prep = verb("corpus-prep", "Normalize a raw knowledge source into corpus JSON-lines");
  c_prep->add_option("--input", cp.input, "Raw corpus file")->required();
  c_prep->add_option("--format", cp.format, "plain-lines, titled-paragraphs, atomic-events or corpus-jsonl")
      ->capture_default_str();

  IndexBuildArgs ib;
  auto* c_index = verb("index-build", "Build a BM25 inverted index over a corpus");
  c_index->add_option("--corpus", ib.corpus, "Corpus file")->required();
  c_index->add_option("--format", ib.format, "Corpus file format")->capture_default_str();

  AttachArgs at;
  auto* c_attach = verb("attach", "Retrieve and re-rank premises for every option of a dataset");
  c_attach->add_option("--index", at.index, "Index file from index-build")->required();
  add_dataset_options(c_attach, at.data, "--dataset", "MCQ dataset (JSON-lines)");

  PfqaArgs pf;
  auto* c_pfqa = verb("pfqa-gen", "Generate parent/family questions and person-level splits from a facts TSV");
  c_pfqa->add_option("--facts", pf.facts, "child<TAB>parent facts file")->required();

  ReviseArgs rv;
  auto* c_revise = verb("revise", "Continue training an encoder on the knowledge corpus (masked tokens, next sentence)");
  c_revise->add_option("--corpus", rv.corpus, "Corpus JSON-lines from corpus-prep")->required();
  c_revise->add_option("--encoder", rv.encoder, "Start from this encoder instead of a fresh one");
  c_revise->add_option("--vocab-data", rv.vocab_data, "Datasets whose text joins a fresh encoder's vocabulary");

  TrainArgs tr;
  auto* c_train = verb("train", "Fine-tune a fusion model on a dataset with attached premises");
  add_dataset_options(c_train, tr.data, "--train", "Training dataset");
  c_train->add_option("--encoder", tr.encoder, "Encoder checkpoint, e.g. from revise");
  c_train->add_option("--vectors", tr.vectors, "External pooled vectors (JSON-lines); the encoder stays frozen");
  c_train->add_option("--vocab-corpus", tr.vocab_corpus, "Corpus whose text joins a fresh encoder's vocabulary");

  EvalArgs ev;
  auto* c_eval = verb("eval", "Score a dataset and write per-item predictions");
  c_eval->add_option("--model", ev.model, "Model checkpoint from train")->required();
  add_dataset_options(c_eval, ev.data, "--dataset", "Labelled dataset");
  c_eval->add_option("--vectors", ev.vectors, "External vectors used by the model");

  SweepArgs sw;
  auto* c_sweep = verb("sweep-m", "Accuracy as a function of the number of premises per option");
  c_sweep->add_option("--index", sw.index, "Index file")->required();
  add_dataset_options(c_sweep, sw.train_data, "--train", "Training dataset (premises are re-attached)");
  c_sweep->add_option("--eval", sw.eval_path, "Evaluation dataset, same schema as --train")->required();
  c_sweep->add_option("--m", sw.m_values, "Ascending comma separated premise counts")->capture_default_str();
  c_sweep->add_option("--model", sw.model, "Re-evaluate this model instead of retraining per m");

  WeightReportArgs wr;
  auto* c_weights = verb("weight-report", "Per-passage weights of a weighted-sum model against knowledge overlap");
  c_weights->add_option("--model", wr.model, "Weighted-sum model checkpoint")->required();
  add_dataset_options(c_weights, wr.data, "--dataset", "Dataset with attached premises");
  c_weights->add_option("--vectors", wr.vectors, "External vectors used by the model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*c_prep) run_corpus_prep(g, cp);
    else if (*c_index) run_index_build(g, ib);
    else if (*c_attach) run_attach(g, at);
    else if (*c_pfqa) run_pfqa_gen(g, pf);
    else if (*c_revise) run_revise(g, rv);
    else if (*c_train) run_train(g, tr);
    else if (*c_eval) run_eval(g, ev);
    else if (*c_sweep) run_sweep(g, sw);
    else if (*c_weights) run_weight_report(g, wr);
  } catch (const IoError& e) {
    std::cerr << "kinfuse: I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ValidationError& e) {
    std::cerr << "kinfuse: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "kinfuse: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}
