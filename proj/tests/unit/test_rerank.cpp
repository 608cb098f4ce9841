#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "kinfuse/error.hpp"
#include "kinfuse/io.hpp"
#include "kinfuse/rerank.hpp"
#include "oracles/oracles.hpp"

using namespace kinfuse;

TEST_CASE("token_jaccard") {
  CHECK(token_jaccard("a b", "a b") == 1.0);
  CHECK(token_jaccard("a b", "c d") == 0.0);
  CHECK(token_jaccard("a b c", "b c d") == 0.5);
  CHECK(token_jaccard("", "") == 1.0);
  CHECK(token_jaccard("a", "") == 0.0);
  CHECK(token_jaccard("A, b!", "b a") == 1.0);
}

TEST_CASE("embedding_cosine") {
  EmbeddingTable t(3);
  t.add("x", {1, 0, 0});
  t.add("y", {0, 1, 0});
  t.add("z", {1, 1, 1});
  CHECK(embedding_cosine("x z", "x z", t) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(embedding_cosine("x", "y", t) == doctest::Approx(0.0));
  // mean("x y") = (.5,.5,0), mean("x z") = (1,.5,.5): dot .75, norms sqrt(.5) and sqrt(1.5)
  CHECK(embedding_cosine("x y", "x z", t) == doctest::Approx(0.75 / std::sqrt(0.5 * 1.5)).epsilon(1e-12));
  CHECK(embedding_cosine("x unknown", "x", t) == doctest::Approx(1.0));
  CHECK(embedding_cosine("nothing known", "x", t) == 0.0);
  CHECK_THROWS_AS(t.add("w", {1, 2}), ValidationError);
}

TEST_CASE("embedding table file") {
  auto p = std::filesystem::temp_directory_path() / "kinfuse_emb.txt";
  io::write_file(p, "cat 1 0\ndog 0.5 0.5\n");
  auto t = EmbeddingTable::load(p);
  CHECK(t.dim() == 2);
  CHECK(t.size() == 2);
  CHECK((*t.find("dog"))[1] == 0.5);
  io::write_file(p, "cat 1 0\ndog 0.5\n");
  CHECK_THROWS_AS(EmbeddingTable::load(p), ValidationError);
  std::filesystem::remove(p);
}

TEST_CASE("rerank degenerate configurations") {
  std::vector<std::string> c = {"red car", "blue car fast", "red red apple", "green tree"};
  RerankConfig cfg;
  cfg.m = 1;
  CHECK(rerank_order(c, "red apple", cfg) == std::vector<std::size_t>{2});

  cfg.m = 3;
  cfg.lambda = 0.0;
  // similarities to "car": .5, 1/3, 0, 0 -> stable sort by similarity
  CHECK(rerank_order(c, "car", cfg) == std::vector<std::size_t>{0, 1, 2});

  cfg.m = 10;
  auto all = rerank_order(c, "car", cfg);
  CHECK(all.size() == c.size());

  std::vector<std::string> none;
  CHECK_THROWS_AS(rerank_order(none, "q", cfg), ValidationError);
  cfg.m = 0;
  CHECK_THROWS_AS(rerank_order(c, "q", cfg), ValidationError);
}

TEST_CASE("six candidates, m=3, lambda=1 matches the naive oracle") {
  std::vector<std::string> c = {"cover the sofa with blankets", "blankets cover sofa", "wrap lamps in paper",
                                "cover lights with blankets", "the sofa stands on end", "paper covers lamps"};
  const std::string q = "blankets cover lights sofa";
  RerankConfig cfg;
  cfg.m = 3;
  cfg.lambda = 1.0;
  auto got = rerank_order(c, q, cfg);
  CHECK(got == oracle::rerank_naive(c, q, 3, 1.0));
  CHECK(got.size() == 3);
}

TEST_CASE("random instances match the naive oracle") {
  std::mt19937 rng(9);
  const std::vector<std::string> vocab = {"a", "b", "c", "d", "e", "f"};
  for (int round = 0; round < 200; ++round) {
    std::uniform_int_distribution<int> nc(1, 12), len(0, 5), w(0, 5), mm(1, 8);
    std::vector<std::string> c;
    for (int i = nc(rng); i > 0; --i) {
      std::string t;
      for (int k = len(rng); k > 0; --k) t += vocab[w(rng)] + " ";
      c.push_back(t);
    }
    std::string q;
    for (int k = len(rng) + 1; k > 0; --k) q += vocab[w(rng)] + " ";
    RerankConfig cfg;
    cfg.m = static_cast<std::size_t>(mm(rng));
    cfg.lambda = std::uniform_real_distribution<double>(0.0, 2.0)(rng);
    auto got = rerank_order(c, q, cfg);
    CHECK(got == oracle::rerank_naive(c, q, cfg.m, cfg.lambda));
    // first pick maximizes query similarity
    for (const auto& t : c) CHECK(token_jaccard(c[got[0]], q) >= token_jaccard(t, q));
  }
}

TEST_CASE("rerank over sentences keeps distinct candidates in pick order") {
  std::vector<KnowledgeSentence> c = {{"s1", "x y", "t", {}}, {"s2", "x y", "t", {}}, {"s3", "y z", "t", {}}};
  RerankConfig cfg;
  cfg.m = 2;
  auto out = rerank(c, "x y", cfg);
  REQUIRE(out.size() == 2);
  CHECK(out[0].id == "s1");
  // s2 duplicates s1 so its gain is 1 - 1 = 0; s3 gains 1/3 - 1/3 = 0 too; tie -> earlier
  CHECK(out[1].id == "s2");

  auto table = std::make_shared<EmbeddingTable>(2);
  table->add("x", {1, 0});
  table->add("z", {0, 1});
  cfg.similarity = SimilarityFn::cosine(table);
  cfg.m = 1;
  CHECK(rerank(c, "z", cfg)[0].id == "s3");
}
