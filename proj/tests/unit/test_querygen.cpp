#include <doctest.h>

#include <filesystem>

#include "kinfuse/error.hpp"
#include "kinfuse/querygen.hpp"

using namespace kinfuse;
namespace fs = std::filesystem;

namespace {

McqItem item(std::optional<std::string> ctx, std::string q, std::vector<std::string> opts) {
  return McqItem{"i1", std::move(ctx), std::move(q), std::move(opts), std::nullopt, std::nullopt};
}

std::map<std::string, std::size_t> bag(std::initializer_list<std::pair<const std::string, std::size_t>> xs) {
  return std::map<std::string, std::size_t>(xs);
}

}  // namespace

TEST_CASE("stopword removal on the blankets example") {
  QueryConfig cfg;
  cfg.stopwords = {"can"};
  auto q = generate_query(item(std::nullopt, "Blankets", {"can cover lights", "x"}), 0, cfg);
  CHECK(q.terms == bag({{"blankets", 1}, {"cover", 1}, {"lights", 1}}));
  CHECK(q.item_id == "i1");
  CHECK(q.option_index == 0);
  CHECK(q.text() == "blankets cover lights");
}

TEST_CASE("default stopword list") {
  const auto& sw = default_stopwords();
  CHECK(sw.contains("the"));
  CHECK(sw.contains("can"));
  CHECK(sw.contains("don"));
  CHECK_FALSE(sw.contains("blankets"));
  CHECK(load_stopwords(fs::path(KINFUSE_REPO_DATA) / "stopwords_en.txt") == sw);
}

TEST_CASE("only stopwords raises empty query") {
  QueryConfig cfg;
  CHECK_THROWS_AS(generate_query(item("it is", "the", {"and of", "x"}), 0, cfg), EmptyQueryError);
  CHECK_THROWS_AS(generate_query(item("it is", "the", {"and of", "x"}), 2, cfg), ValidationError);
}

TEST_CASE("context, question and option are all used; duplicates are counted") {
  QueryConfig cfg;
  auto q = generate_query(item("Cats purr.", "Why do cats purr?", {"Contentment", "Hunger"}), 1, cfg);
  CHECK(q.terms == bag({{"cats", 2}, {"purr", 2}, {"hunger", 1}}));
  CHECK(q.bag() == std::vector<std::string>{"cats", "cats", "hunger", "purr", "purr"});
}

TEST_CASE("casing and whitespace invariance") {
  QueryConfig cfg;
  auto a = generate_query(item(std::nullopt, "Pack the SOFA", {"Wrap   it\tcarefully", "x"}), 0, cfg);
  auto b = generate_query(item(std::nullopt, "pack the sofa", {"wrap it carefully", "x"}), 0, cfg);
  CHECK(a.terms == b.terms);
  for (const auto& [t, n] : a.terms) CHECK_FALSE(cfg.stopwords.contains(t));
}

TEST_CASE("POS filter golden case over a 20-word input") {
  QueryConfig cfg;
  cfg.stopwords = {"how", "should", "you"};
  cfg.lexicon = PosLexicon::load(fs::path(KINFUSE_REPO_DATA) / "pos_lexicon.tsv");
  auto it = item(std::nullopt, "How should you carefully wrap the soft blankets around the heavy box",
                 {"and store it quickly into the large van", "x"});

  cfg.pos_filter = false;
  auto off = generate_query(it, 0, cfg);
  CHECK(off.terms == bag({{"and", 1}, {"around", 1}, {"blankets", 1}, {"box", 1}, {"carefully", 1},
                          {"heavy", 1}, {"into", 1}, {"it", 1}, {"large", 1}, {"quickly", 1}, {"soft", 1},
                          {"store", 1}, {"the", 3}, {"van", 1}, {"wrap", 1}}));

  cfg.pos_filter = true;
  auto on = generate_query(it, 0, cfg);
  // the/and/into are tagged OTHER only; around, it and van are unknown and kept
  CHECK(on.terms == bag({{"around", 1}, {"blankets", 1}, {"box", 1}, {"carefully", 1}, {"heavy", 1},
                         {"it", 1}, {"large", 1}, {"quickly", 1}, {"soft", 1}, {"store", 1}, {"van", 1},
                         {"wrap", 1}}));
}

TEST_CASE("lexicon lookup is case-insensitive and merges tags") {
  PosLexicon lex;
  lex.add("Cover", kPosVerb);
  lex.add("cover", kPosNoun);
  CHECK(lex.lookup("COVER") == std::optional<std::uint8_t>(kPosVerb | kPosNoun));
  CHECK_FALSE(lex.lookup("missing").has_value());
  CHECK(parse_pos_tag("adj") == kPosAdj);
  CHECK_THROWS_AS(parse_pos_tag("PRON"), ValidationError);

  QueryConfig cfg;
  cfg.stopwords = {};
  cfg.lexicon = PosLexicon();
  cfg.lexicon->add("of", kPosOther);
  cfg.pos_filter = true;
  CHECK_THROWS_AS(generate_query(item(std::nullopt, "of", {"of", "x"}), 0, cfg), EmptyQueryError);
}
