#include <doctest.h>

#include <filesystem>

#include <nlohmann/json.hpp>

#include "kinfuse/corpus.hpp"
#include "kinfuse/error.hpp"
#include "kinfuse/io.hpp"
#include "kinfuse/text.hpp"

using namespace kinfuse;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "kinfuse_test_corpus";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("split_sentences basic cases") {
  CHECK(split_sentences("A b. C d.") == std::vector<std::string>{"A b.", "C d."});
  CHECK(split_sentences("no terminator") == std::vector<std::string>{"no terminator"});
  CHECK(split_sentences("Mr. Smith left. He returned.") ==
        std::vector<std::string>{"Mr. Smith left.", "He returned."});
}

TEST_CASE("split_sentences matches the hand-labeled sample") {
  auto lines = io::split_lines(io::read_file(fs::path(KINFUSE_TEST_DATA) / "splitter_sample.jsonl"));
  REQUIRE(lines.size() == 50);
  for (const auto& line : lines) {
    auto j = nlohmann::json::parse(line);
    auto text = j["text"].get<std::string>();
    auto expected = j["sentences"].get<std::vector<std::string>>();
    CAPTURE(text);
    auto got = split_sentences(text);
    CHECK(got == expected);

    // no non-space character is lost or reordered
    std::string in_chars, out_chars;
    for (char c : text) {
      if (!std::isspace(static_cast<unsigned char>(c))) in_chars.push_back(c);
    }
    for (char c : text::join(got, " ")) {
      if (!std::isspace(static_cast<unsigned char>(c))) out_chars.push_back(c);
    }
    CHECK(in_chars == out_chars);
  }
}

TEST_CASE("prepare_titled prefixes every sentence with its title") {
  auto out = prepare_titled({{"How to Pack for Self Storage", "Stand sofas on end. Cover with blankets."}});
  REQUIRE(out.size() == 2);
  CHECK(out[0].text == "How to Pack for Self Storage. Stand sofas on end.");
  CHECK(out[1].text == "How to Pack for Self Storage. Cover with blankets.");
  CHECK(out[0].title == std::optional<std::string>("How to Pack for Self Storage"));
  CHECK(out[0].source_tag == "wikihow");
  CHECK(out[0].id != out[1].id);

  CHECK(prepare_titled({{"T", ""}}).empty());
  CHECK(prepare_titled({{"T", "Only one."}}).size() == 1);
  CHECK(prepare_titled({{"Done?", "Yes."}})[0].text == "Done? Yes.");
}

TEST_CASE("prepare_titled count equals total sentence count") {
  std::vector<TitledParagraph> ps = {{"A", "One. Two. Three."}, {"B", "Four!"}, {"C", ""}, {"D", "Five? Six."}};
  std::size_t total = 0;
  for (const auto& p : ps) total += split_sentences(p.body).size();
  CHECK(prepare_titled(ps).size() == total);
}

TEST_CASE("prepare_atomic substitutes names and wraps with the dimension template") {
  std::vector<AtomicEvent> ev = {{"PersonX takes PersonX's dog to the dog park", "xWant",
                                  "to socialize with other dog owners"}};
  auto out = prepare_atomic(ev, {"Jody"}, 7);
  REQUIRE(out.size() == 1);
  CHECK(out[0].text == "Jody takes Jody's dog to the dog park, as a result Jody wants to socialize with other dog owners.");
  CHECK(out[0].source_tag == "atomic");
}

TEST_CASE("prepare_atomic edge cases") {
  auto plain = prepare_atomic({{"It rains", "oReact", "wet"}}, default_name_pool(), 1);
  REQUIRE(plain.size() == 1);
  CHECK(plain[0].text == "It rains, as a result others feel wet.");

  auto skipped = prepare_atomic({{"PersonX eats ___", "xNeed", "food"},
                                 {"PersonX sleeps", "xIntent", "none"},
                                 {"PersonX sleeps", "xIntent", ""}},
                                default_name_pool(), 1);
  CHECK(skipped.empty());

  CHECK_THROWS_AS(prepare_atomic({{"PersonX runs", "xWant", "rest"}}, {}, 0), ValidationError);
  CHECK_THROWS_AS(prepare_atomic({{"PersonX runs", "bogus", "rest"}}, {"A"}, 0), ValidationError);
}

TEST_CASE("prepare_atomic gives PersonX and PersonY distinct names, deterministically") {
  std::vector<AtomicEvent> ev;
  for (int i = 0; i < 40; ++i) {
    ev.push_back({"PersonX helps PersonY with chore " + std::to_string(i), "oWant", "to thank them"});
  }
  const std::vector<std::string> pool = {"Ari", "Bo", "Cy"};
  auto a = prepare_atomic(ev, pool, 11);
  auto b = prepare_atomic(ev, pool, 11);
  auto c = prepare_atomic(ev, pool, 12);
  CHECK(a == b);
  CHECK(a.size() == c.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto words = text::split_whitespace(a[i].text);
    CHECK(words[0] != words[2]);
    any_diff |= a[i].text != c[i].text;
  }
  CHECK(any_diff);
}

TEST_CASE("load_corpus plain-lines") {
  auto p = scratch("three.txt");
  io::write_file(p, "first line\n\nsecond line\nthird line\n");
  auto c = load_corpus(p, CorpusFormat::PlainLines);
  CHECK(c.size() == 3);
  CHECK(c.sentences()[0].id == "plain-00000000");
  CHECK(c.token_count() == 6);

  auto empty = scratch("empty.txt");
  io::write_file(empty, "");
  try {
    (void)load_corpus(empty, CorpusFormat::PlainLines);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("empty corpus") != std::string::npos);
  }
  CHECK_THROWS_AS(load_corpus(scratch("does-not-exist"), CorpusFormat::PlainLines), IoError);
}

TEST_CASE("plain-lines load, serialize, load round-trips byte-identically") {
  auto p = scratch("rt.txt");
  io::write_file(p, "alpha beta\ngamma\ndelta epsilon\n");
  auto c1 = load_corpus(p, CorpusFormat::PlainLines);
  auto s1 = serialize_plain_lines(c1);
  auto p2 = scratch("rt2.txt");
  io::write_file(p2, s1);
  auto c2 = load_corpus(p2, CorpusFormat::PlainLines);
  CHECK(serialize_plain_lines(c2) == s1);
  CHECK(s1 == io::read_file(p));
}

TEST_CASE("load_corpus reports malformed records with line numbers") {
  auto p = scratch("bad.jsonl");
  io::write_file(p, "{\"title\": \"T\", \"text\": \"Fine.\"}\n{not json\n");
  try {
    (void)load_corpus(p, CorpusFormat::TitledParagraphs);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
  auto u = scratch("bad_utf8.txt");
  io::write_file(u, "ok\n\xFF\xFE\n");
  try {
    (void)load_corpus(u, CorpusFormat::PlainLines);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
}

TEST_CASE("titled, atomic and corpus-jsonl formats") {
  auto t = scratch("titled.jsonl");
  io::write_file(t, "{\"title\": \"How to Pack for Self Storage\", \"text\": \"Stand sofas on end. Cover with blankets.\"}\n");
  auto tc = load_corpus(t, CorpusFormat::TitledParagraphs);
  CHECK(tc.size() == 2);

  auto a = scratch("atomic.jsonl");
  io::write_file(a, "{\"event\": \"PersonX bakes bread\", \"dimension\": \"xAttr\", \"inference\": \"skilled\"}\n");
  auto ac = load_corpus(a, CorpusFormat::AtomicEvents);
  CHECK(ac.size() == 1);
  CHECK(ac.sentences()[0].text.find("PersonX") == std::string::npos);

  auto j = scratch("corpus.jsonl");
  io::write_file(j, serialize_corpus_jsonl(tc));
  auto jc = load_corpus(j, CorpusFormat::CorpusJsonl);
  CHECK(jc.sentences() == tc.sentences());
}

TEST_CASE("corpus invariants") {
  CHECK_THROWS_AS(KnowledgeCorpus({{"a", "x", "s", {}}, {"a", "y", "s", {}}}), ValidationError);
  CHECK_THROWS_AS(KnowledgeCorpus({{"a", "   ", "s", {}}}), ValidationError);
  KnowledgeCorpus c({{"a", "x y", "s", {}}, {"b", "z", "s", {}}});
  CHECK(c.find("b")->text == "z");
  CHECK(c.find("q") == nullptr);
  auto m = merge_corpora({c, KnowledgeCorpus({{"c", "w", "t", {}}})});
  CHECK(m.size() == 3);
}

TEST_CASE("shipped data files equal the built-in defaults") {
  auto templates = load_atomic_templates(fs::path(KINFUSE_REPO_DATA) / "atomic_templates.tsv");
  CHECK(templates == default_atomic_templates());
  CHECK(templates.size() == 8);
  auto names = load_word_list(fs::path(KINFUSE_REPO_DATA) / "neutral_names.txt");
  CHECK(names == default_name_pool());
}
