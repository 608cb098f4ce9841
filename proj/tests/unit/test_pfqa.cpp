#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "kinfuse/error.hpp"
#include "kinfuse/io.hpp"
#include "kinfuse/pfqa.hpp"
#include "oracles/oracles.hpp"

using namespace kinfuse;
using namespace kinfuse::pfqa;

namespace {

std::vector<std::string> name_pool() {
  return {"John", "Jon", "Johan", "Joan", "Robert", "Mary", "Marie", "Maria", "Mara", "Tom", "Tim", "Tam", "Kim",
          "Ann", "Anne", "Anna", "Ana", "Bob", "Rob", "Ben"};
}

}  // namespace

TEST_CASE("edit distance") {
  CHECK(edit_distance("John", "John") == 0);
  CHECK(edit_distance("John", "Jon") == 1);
  CHECK(edit_distance("John", "Johan") == 1);
  CHECK(edit_distance("", "abc") == 3);
  CHECK(edit_distance("kitten", "sitting") == 3);
  CHECK(edit_distance("john", "John") == 1);
}

TEST_CASE("edit distance matches the DP oracle on random pairs") {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> len(0, 10), ch(0, 3);
  for (int i = 0; i < 200; ++i) {
    std::string a, b;
    for (int k = len(rng); k > 0; --k) a.push_back(static_cast<char>('a' + ch(rng)));
    for (int k = len(rng); k > 0; --k) b.push_back(static_cast<char>('a' + ch(rng)));
    CHECK(edit_distance(a, b) == oracle::levenshtein(a, b));
  }
}

TEST_CASE("select_distractors prefers close names") {
  auto d = select_distractors("John", {"Jon", "Johan", "Joan", "Robert"}, 3, 1);
  CHECK(std::set<std::string>(d.begin(), d.end()) == std::set<std::string>{"Jon", "Johan", "Joan"});
  CHECK(select_distractors("John", name_pool(), 3, 5) == select_distractors("John", name_pool(), 3, 5));

  auto far = select_distractors("Zzzzzz", {"Zzzzzz", "Aaaa", "Bbbbbbbbbb", "Cc", "Ddd"}, 3, 2);
  CHECK(far.size() == 3);
  for (const auto& n : far) CHECK(n != "Zzzzzz");
  // nearest three by distance: Aaaa (6), Ddd (6), Cc (6) before Bbbbbbbbbb (10)
  CHECK(std::find(far.begin(), far.end(), "Bbbbbbbbbb") == far.end());

  CHECK_THROWS_AS(select_distractors("John", {"John", "Jon", "Joan"}, 3, 0), ValidationError);
  auto ex = select_distractors("John", {"Jon", "Johan", "Joan", "Robert"}, 3, 0, {"Jon"});
  CHECK(std::find(ex.begin(), ex.end(), "Jon") == ex.end());
}

TEST_CASE("grandparent question by composition") {
  std::vector<ParentFact> facts = {{"Amy Lee", "Bob Lee"}, {"Bob Lee", "Cyd Lee"}};
  std::vector<ParentFact> pad;
  for (const auto& n : name_pool()) pad.push_back({n + " Extra", "Root Person"});
  facts.insert(facts.end(), pad.begin(), pad.end());
  auto qs = generate_questions(facts, 4);
  const PfqaQuestion* gp = nullptr;
  for (const auto& q : qs) {
    if (q.person == "Amy Lee" && q.qtype == QuestionType::Grandparent) gp = &q;
  }
  REQUIRE(gp != nullptr);
  CHECK(gp->options[gp->gold] == "Cyd");
  CHECK(gp->question == "Who is the grandparent of Amy Lee?");
  CHECK(gp->knowledge ==
        std::vector<std::string>{"The parent of Amy Lee is Bob Lee.", "The parent of Bob Lee is Cyd Lee."});
}

TEST_CASE("sibling question by shared parent") {
  std::vector<ParentFact> facts = {{"Amy Lee", "Bob Lee"}, {"Dee Lee", "Bob Lee"}};
  for (const auto& n : name_pool()) facts.push_back({n + " Extra", "Root Person"});
  auto qs = generate_questions(facts, 4);
  const PfqaQuestion* sib = nullptr;
  for (const auto& q : qs) {
    if (q.person == "Amy Lee" && q.qtype == QuestionType::Sibling) sib = &q;
  }
  REQUIRE(sib != nullptr);
  CHECK(sib->options[sib->gold] == "Dee");
  CHECK(sib->knowledge ==
        std::vector<std::string>{"The parent of Amy Lee is Bob Lee.", "The parent of Dee Lee is Bob Lee."});
}

TEST_CASE("a person with one parent fact gets exactly one question") {
  std::vector<ParentFact> facts = {{"Solo Kid", "Some Parent"}};
  for (const auto& n : name_pool()) facts.push_back({n + " X", n + " Y"});
  auto qs = generate_questions(facts, 1);
  int n = 0;
  for (const auto& q : qs) n += q.person == "Solo Kid";
  CHECK(n == 1);
}

TEST_CASE("generated question invariants") {
  std::vector<ParentFact> facts;
  auto pool = name_pool();
  std::mt19937 rng(8);
  for (std::size_t i = 0; i < 40; ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, i == 0 ? 0 : i - 1);
    if (i == 0) continue;
    facts.push_back({pool[i % pool.size()] + " P" + std::to_string(i),
                     pool[pick(rng) % pool.size()] + " P" + std::to_string(pick(rng))});
  }
  for (auto& f : facts) {
    if (f.child == f.parent) f.parent += " Sr";
  }
  auto qs = generate_questions(facts, 11);
  REQUIRE(!qs.empty());
  for (const auto& q : qs) {
    CAPTURE(q.question);
    REQUIRE(q.options.size() == 4);
    CHECK(std::set<std::string>(q.options.begin(), q.options.end()).size() == 4);
    auto truth = oracle::derivable_answers(q.knowledge, q.person, std::string(question_type_name(q.qtype)));
    CHECK(truth.count(q.options[q.gold]) == 1);
    CHECK(q.options[q.gold] == first_name(q.gold_full_name));
  }
  CHECK(serialize_questions(qs, "pf") == serialize_questions(generate_questions(facts, 11), "pf"));
}

TEST_CASE("splits keep every person together and are deterministic") {
  std::vector<ParentFact> facts;
  auto pool = name_pool();
  for (std::size_t i = 0; i < pool.size(); ++i) {
    facts.push_back({pool[i] + " A", pool[(i + 1) % pool.size()] + " B"});
    facts.push_back({pool[(i + 1) % pool.size()] + " B", pool[(i + 3) % pool.size()] + " C"});
  }
  auto qs = generate_questions(facts, 2);
  auto s1 = assign_splits(qs, {0.8, 0.1, 0.1}, 3);
  auto s2 = assign_splits(qs, {0.8, 0.1, 0.1}, 3);
  CHECK(serialize_questions(s1.train, "t") == serialize_questions(s2.train, "t"));
  CHECK(s1.train.size() + s1.dev.size() + s1.test.size() == qs.size());
  std::map<std::string, int> where;
  auto mark = [&](const std::vector<PfqaQuestion>& v, int s) {
    for (const auto& q : v) {
      auto [it, fresh] = where.emplace(q.person, s);
      CHECK(it->second == s);
    }
  };
  mark(s1.train, 0);
  mark(s1.dev, 1);
  mark(s1.test, 2);
  CHECK_THROWS_AS(assign_splits(qs, {0.5, 0.1, 0.1}, 0), ValidationError);
}

TEST_CASE("facts TSV and MCQ export") {
  auto facts = parse_facts("Amy Lee\tBob Lee\n# comment\n\nBob Lee\tCyd Lee\n");
  CHECK(facts.size() == 2);
  CHECK_THROWS_AS(parse_facts("no tab here\n"), ValidationError);
  CHECK_THROWS_AS(parse_facts("Same\tSame\n"), ValidationError);

  PfqaQuestion q{"Amy Lee", QuestionType::Parent, "Who is the parent of Amy Lee?", {"Bob", "Rob", "Bo", "Bab"}, 0,
                 "Bob Lee", {"The parent of Amy Lee is Bob Lee."}};
  auto item = to_mcq_item(q, "pf-1");
  CHECK(item.gold == std::optional<std::size_t>(0));
  auto j = nlohmann::json::parse(serialize_questions({q}, "pf"));
  CHECK(j["qtype"] == "parent");
  CHECK(j["knowledge"].size() == 1);
  CHECK(j["id"] == "pf-00000000");
}
