#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "kinfuse/error.hpp"
#include "kinfuse/fusion.hpp"

using namespace kinfuse;
using ad::Matrix;

namespace {

const std::vector<HeadKind> kAllHeads = {HeadKind::Baseline, HeadKind::Concat, HeadKind::ParallelMax,
                                         HeadKind::SimpleSum, HeadKind::WeightedSum};

std::vector<KnowledgeSentence> sentences(const std::vector<std::string>& texts) {
  std::vector<KnowledgeSentence> out;
  for (const auto& t : texts) out.push_back({"kb-" + t, t, "kb", std::nullopt});
  return out;
}

McqItem item_with(std::vector<std::string> options, std::vector<std::vector<std::string>> premises,
                  std::optional<std::size_t> gold = 0, std::string id = "it") {
  McqItem it{std::move(id), std::string("some context"), "which one fits", std::move(options), gold, std::nullopt};
  std::vector<std::vector<KnowledgeSentence>> p;
  for (const auto& list : premises) p.push_back(sentences(list));
  it.premises = std::move(p);
  return it;
}

Vocabulary vocab() {
  std::vector<std::string> texts = {"some context which one fits red blue green apple tree stone river cloud x y z"};
  return Vocabulary::build(texts);
}

EncoderModel tiny_encoder(std::uint64_t seed, std::size_t dim = 4) {
  EncoderConfig cfg;
  cfg.dim = dim;
  return EncoderModel::create(vocab(), cfg, seed);
}

void set_col(ad::Parameter& p, std::initializer_list<double> xs) {
  Eigen::Index i = 0;
  for (double x : xs) p.value(i++, 0) = x;
}

std::shared_ptr<ExternalVectorStore> store_2d() {
  auto s = std::make_shared<ExternalVectorStore>();
  auto v = [](double a, double b) { return (Eigen::VectorXd(2) << a, b).finished(); };
  s->insert("h", 0, std::nullopt, v(1, 2));
  s->insert("h", 1, std::nullopt, v(3, -1));
  s->insert("h", 0, 0, v(1, 0));
  s->insert("h", 0, 1, v(0, 1));
  s->insert("h", 1, 0, v(2, 2));
  s->insert("h", 1, 1, v(-1, 3));
  return s;
}

McqItem hand_item() { return item_with({"red", "blue"}, {{"p00", "p01"}, {"p10", "p11"}}, 0, "h"); }

}  // namespace

TEST_CASE("head kind names") {
  for (auto h : kAllHeads) CHECK(parse_head_kind(head_kind_name(h)) == h);
  CHECK(parse_head_kind("max") == HeadKind::ParallelMax);
  CHECK_THROWS_AS(parse_head_kind("mean"), ValidationError);
}

TEST_CASE("baseline symmetry and constant bias") {
  auto m = FusionModel::with_encoder(tiny_encoder(1), HeadKind::Baseline, false, 1);
  auto it = item_with({"red apple", "red apple"}, {{}, {}});
  auto s = score_baseline(m, it);
  CHECK(s.scores[0] == s.scores[1]);
  CHECK(s.predicted == 0);
  CHECK_FALSE(s.weights.has_value());

  m.score_weight().value.setZero();
  m.score_bias().value(0, 0) = 0.75;
  auto z = score_baseline(m, item_with({"red", "blue", "tree"}, {{}, {}, {}}));
  for (double x : z.scores) CHECK(x == 0.75);
  CHECK_THROWS_AS(score_concat(m, it), ValidationError);
}

TEST_CASE("hand-set d=2 baseline") {
  auto m = FusionModel::with_vectors(store_2d(), HeadKind::Baseline, false, 0);
  set_col(m.score_weight(), {0.5, -1.0});
  m.score_bias().value(0, 0) = 0.25;
  auto s = m.score(hand_item());
  // (1,2).(0.5,-1) + 0.25 and (3,-1).(0.5,-1) + 0.25
  CHECK(s.scores[0] == doctest::Approx(-1.25));
  CHECK(s.scores[1] == doctest::Approx(2.75));
  CHECK(s.predicted == 1);
}

TEST_CASE("hand-set d=2 parallel-max score table") {
  auto m = FusionModel::with_vectors(store_2d(), HeadKind::ParallelMax, false, 0);
  set_col(m.score_weight(), {1.0, -2.0});
  m.score_bias().value(0, 0) = 0.5;
  // passage scores: option 0 -> 1.5, -1.5; option 1 -> -1.5, -6.5
  auto s = score_max(m, hand_item());
  CHECK(s.scores[0] == doctest::Approx(1.5));
  CHECK(s.scores[1] == doctest::Approx(-1.5));
  CHECK(s.predicted == 0);
}

TEST_CASE("hand-set d=2 simple-sum") {
  auto m = FusionModel::with_vectors(store_2d(), HeadKind::SimpleSum, false, 0);
  set_col(m.score_weight(), {1.0, -2.0});
  m.score_bias().value(0, 0) = 0.5;
  // sums (1,1) and (1,5)
  auto s = score_simple_sum(m, hand_item());
  CHECK(s.scores[0] == doctest::Approx(-0.5));
  CHECK(s.scores[1] == doctest::Approx(-8.5));
  // linearity: sum of per-passage linear terms plus one bias
  CHECK(s.scores[0] == doctest::Approx((1.5 - 0.5) + (-1.5 - 0.5) + 0.5).epsilon(1e-12));
}

TEST_CASE("hand-set d=2 tied weighted-sum") {
  auto m = FusionModel::with_vectors(store_2d(), HeadKind::WeightedSum, true, 0);
  set_col(m.weight_layer_weight(), {1.0, 2.0});
  m.weight_layer_bias().value(0, 0) = 0.0;
  auto s = score_weighted_sum(m, hand_item());
  REQUIRE(s.weights.has_value());
  // option 0: raw weights 1 and 2, softmax (1/(1+e), e/(1+e)); summary = weights; score = w1 + 2 w2
  const double e = std::exp(1.0);
  const double w1 = 1.0 / (1.0 + e), w2 = e / (1.0 + e);
  CHECK((*s.weights)[0][0] == doctest::Approx(w1).epsilon(1e-12));
  CHECK((*s.weights)[0][1] == doctest::Approx(w2).epsilon(1e-12));
  CHECK(s.scores[0] == doctest::Approx(w1 + 2 * w2).epsilon(1e-12));
  // option 1: raw 6 and 5
  const double u1 = 1.0 / (1.0 + std::exp(-1.0)), u2 = 1.0 - u1;
  CHECK((*s.weights)[1][0] == doctest::Approx(u1).epsilon(1e-12));
  CHECK(s.scores[1] == doctest::Approx(u1 * 6 + u2 * 5).epsilon(1e-12));
  CHECK(&m.score_weight() == &m.weight_layer_weight());
}

TEST_CASE("concat: empty premises reproduce the baseline exactly") {
  auto enc = tiny_encoder(2);
  auto concat = FusionModel::with_encoder(enc, HeadKind::Concat, false, 5);
  auto base = FusionModel::with_encoder(enc, HeadKind::Baseline, false, 5);
  std::mt19937 rng(1);
  const std::vector<std::string> words = {"red", "blue", "green", "apple", "tree", "stone"};
  for (int i = 0; i < 20; ++i) {
    auto a = words[rng() % words.size()], b = words[rng() % words.size()];
    auto it = item_with({a, b}, {{}, {}});
    CHECK(concat.option_sequences(it, 0) == base.option_sequences(it, 0));
    CHECK(concat.score(it).scores == base.score(it).scores);
  }
}

TEST_CASE("concat with one passage equals per-passage scoring") {
  auto enc = tiny_encoder(3);
  auto concat = FusionModel::with_encoder(enc, HeadKind::Concat, false, 5);
  auto mx = FusionModel::with_encoder(enc, HeadKind::ParallelMax, false, 5);
  auto it = item_with({"red", "blue"}, {{"apple tree"}, {"stone river"}});
  CHECK(concat.option_sequences(it, 0) == mx.option_sequences(it, 0));
  CHECK(concat.score(it).scores == mx.score(it).scores);
  auto two = item_with({"red", "blue"}, {{"apple tree", "cloud"}, {"stone", "river"}});
  CHECK(concat.option_sequences(two, 0).size() == 1);
  CHECK(mx.option_sequences(two, 0).size() == 2);
}

TEST_CASE("m=1 max and simple-sum agree; max ignores duplicates") {
  auto enc = tiny_encoder(4);
  auto mx = FusionModel::with_encoder(enc, HeadKind::ParallelMax, false, 8);
  auto ss = FusionModel::with_encoder(enc, HeadKind::SimpleSum, false, 8);
  auto it = item_with({"red", "blue"}, {{"apple tree"}, {"stone river"}});
  CHECK(mx.score(it).scores == ss.score(it).scores);
  auto dup = item_with({"red", "blue"}, {{"apple tree", "apple tree"}, {"stone river", "stone river"}});
  CHECK(mx.score(dup).scores == mx.score(it).scores);
}

TEST_CASE("weighted-sum special cases") {
  auto ws = FusionModel::with_encoder(tiny_encoder(5), HeadKind::WeightedSum, false, 9);
  auto one = ws.score(item_with({"red", "blue"}, {{"apple"}, {"tree"}}));
  CHECK((*one.weights)[0][0] == 1.0);
  auto same = ws.score(item_with({"red", "blue"}, {{"x", "x", "x"}, {"y", "y", "y"}}));
  for (const auto& w : *same.weights) {
    for (double x : w) CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  auto empty = ws.score(item_with({"red", "blue"}, {{}, {}}));
  CHECK((*empty.weights)[0].size() == 1);
}

TEST_CASE("passage permutation invariance and weight equivariance") {
  auto enc = tiny_encoder(6);
  auto it = item_with({"red", "blue"}, {{"apple", "tree", "stone"}, {"river", "cloud", "x"}});
  auto perm = item_with({"red", "blue"}, {{"stone", "apple", "tree"}, {"cloud", "x", "river"}});
  for (auto h : {HeadKind::ParallelMax, HeadKind::SimpleSum, HeadKind::WeightedSum}) {
    for (bool tied : {false, true}) {
      auto m = FusionModel::with_encoder(enc, h, tied, 11);
      auto a = m.score(it), b = m.score(perm);
      for (std::size_t i = 0; i < 2; ++i) CHECK(std::abs(a.scores[i] - b.scores[i]) < 1e-9);
      if (h == HeadKind::WeightedSum) {
        CHECK((*a.weights)[0][0] == doctest::Approx((*b.weights)[0][1]).epsilon(1e-12));
        CHECK((*a.weights)[1][2] == doctest::Approx((*b.weights)[1][1]).epsilon(1e-12));
        for (const auto& w : *a.weights) {
          double sum = 0;
          for (double x : w) sum += x;
          CHECK(std::abs(sum - 1.0) < 1e-9);
        }
      }
    }
  }
}

TEST_CASE("bias shift moves every score and keeps the argmax") {
  auto enc = tiny_encoder(7);
  auto it = item_with({"red", "blue", "green"}, {{"apple", "tree"}, {"stone"}, {"river", "cloud"}});
  for (auto h : kAllHeads) {
    auto m = FusionModel::with_encoder(enc, h, false, 12);
    auto before = m.score(it);
    m.score_bias().value(0, 0) += 3.5;
    auto after = m.score(it);
    CHECK(after.predicted == before.predicted);
    for (std::size_t i = 0; i < 3; ++i) CHECK(after.scores[i] - before.scores[i] == doctest::Approx(3.5));
  }
}

TEST_CASE("tied and untied agree when the final layer copies the weight layer") {
  auto enc = tiny_encoder(8);
  auto tied = FusionModel::with_encoder(enc, HeadKind::WeightedSum, true, 13);
  auto untied = FusionModel::with_encoder(enc, HeadKind::WeightedSum, false, 13);
  untied.untied_score_weight().value = untied.weight_layer_weight().value;
  untied.untied_score_bias().value = untied.weight_layer_bias().value;
  auto it = item_with({"red", "blue"}, {{"apple", "tree"}, {"stone", "cloud"}});
  CHECK(tied.score(it).scores == untied.score(it).scores);
}

TEST_CASE("gradient checks for every head") {
  auto it = item_with({"red", "blue"}, {{"apple tree", "stone"}, {"river", "cloud x"}}, 1);
  for (auto h : kAllHeads) {
    for (bool tied : {false, true}) {
      if (tied && h != HeadKind::WeightedSum) continue;
      auto m = FusionModel::with_encoder(tiny_encoder(21), h, tied, 22);
      auto r = grad_check(m, it);
      CAPTURE(head_kind_name(h));
      CAPTURE(tied);
      CAPTURE(r.worst_parameter);
      CHECK(r.max_relative_error < 1e-5);
      CHECK(r.entries_checked > 0);
    }
  }
}

TEST_CASE("tied gradient accumulates through both uses of the shared layer") {
  auto m = FusionModel::with_vectors(store_2d(), HeadKind::WeightedSum, true, 3);
  auto it = hand_item();
  auto r = grad_check(m, it);
  CHECK(r.max_relative_error < 1e-5);
  // gradient through the weight path alone differs from the full gradient
  ad::Tape t;
  auto s = m.score_var(t, it, false);
  const std::size_t target[] = {0};
  for (auto* p : m.parameters(false)) p->zero_grad();
  t.backward(t.cross_entropy(s, target));
  Matrix full = m.weight_layer_weight().grad;
  CHECK(full.norm() > 0);
}

TEST_CASE("symmetric options give a zero score-difference gradient") {
  auto m = FusionModel::with_encoder(tiny_encoder(30), HeadKind::SimpleSum, false, 31);
  auto it = item_with({"red tree", "red tree"}, {{"apple", "stone"}, {"apple", "stone"}});
  ad::Tape t;
  auto s = m.score_var(t, it, true);
  auto diff = t.matmul(s, t.constant((Matrix(2, 1) << 1.0, -1.0).finished()));
  for (auto* p : m.parameters(true)) p->zero_grad();
  t.backward(diff);
  for (auto* p : m.parameters(true)) CHECK(p->grad.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("training behaviour") {
  McqDataset ds;
  for (int i = 0; i < 6; ++i) {
    ds.items.push_back(item_with({"red", "blue"}, {{"apple"}, {"stone"}}, static_cast<std::size_t>(i % 2),
                                 "i" + std::to_string(i)));
  }
  auto m = FusionModel::with_encoder(tiny_encoder(40), HeadKind::SimpleSum, false, 41);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 0.0;
  auto same = train(m, ds, cfg);
  CHECK(same.serialize() == m.serialize());

  cfg.learning_rate = 0.05;
  CHECK(train(m, ds, cfg).serialize() == train(m, ds, cfg).serialize());

  auto nogold = ds;
  nogold.items[0].gold.reset();
  CHECK_THROWS_AS(train(m, nogold, cfg), ValidationError);

  auto ext = FusionModel::with_vectors(store_2d(), HeadKind::Baseline, false, 0);
  McqDataset hd;
  hd.items.push_back(hand_item());
  CHECK_THROWS_AS(train(ext, hd, cfg), ValidationError);
  cfg.freeze_encoder = true;
  FusionTrainLog log;
  auto ext_trained = train(ext, hd, cfg, &log);
  CHECK(log.epoch_loss.size() == 3);
  CHECK(log.epoch_loss.back() < log.epoch_loss.front());
}

TEST_CASE("separable toy task reaches high training accuracy for every head") {
  // the gold option's premise holds a token no other premise uses
  std::vector<std::string> texts = {"which one fits"};
  McqDataset ds;
  for (int i = 0; i < 50; ++i) {
    std::string a = "opt" + std::to_string(2 * i), b = "opt" + std::to_string(2 * i + 1);
    const std::size_t gold = static_cast<std::size_t>(i % 2);
    std::vector<std::vector<std::string>> prem = {{"plain note", "filler " + a}, {"plain note", "filler " + b}};
    prem[gold][0] = "marker " + (gold == 0 ? a : b);
    McqItem it{"t" + std::to_string(i), std::nullopt, "which one fits", {a, b}, gold, std::nullopt};
    std::vector<std::vector<KnowledgeSentence>> p;
    for (std::size_t o = 0; o < 2; ++o) {
      std::vector<KnowledgeSentence> l;
      for (std::size_t j = 0; j < 2; ++j) l.push_back({"k" + std::to_string(i) + std::to_string(o) + std::to_string(j), prem[o][j], "kb", {}});
      p.push_back(l);
    }
    it.premises = p;
    ds.items.push_back(it);
    texts.push_back(a + " " + b + " marker plain note filler");
  }
  auto v = Vocabulary::build(texts);
  for (auto h : {HeadKind::Concat, HeadKind::ParallelMax, HeadKind::SimpleSum, HeadKind::WeightedSum}) {
    EncoderConfig ecfg;
    ecfg.dim = 8;
    auto m = FusionModel::with_encoder(EncoderModel::create(v, ecfg, 1), h, false, 2);
    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.learning_rate = 0.05;
    cfg.batch_size = 10;
    FusionTrainLog log;
    auto trained = train(m, ds, cfg, &log);
    std::size_t correct = 0;
    for (const auto& it : ds.items) correct += trained.score(it).predicted == *it.gold;
    CAPTURE(head_kind_name(h));
    CHECK(static_cast<double>(correct) / 50.0 >= 0.95);
  }
}

TEST_CASE("fusion checkpoint round trip") {
  auto m = FusionModel::with_encoder(tiny_encoder(50), HeadKind::WeightedSum, true, 51);
  auto bytes = m.serialize();
  CHECK(bytes.substr(0, 4) == "KIFM");
  auto back = FusionModel::deserialize(bytes);
  CHECK(back.serialize() == bytes);
  CHECK(back.tied());
  auto it = item_with({"red", "blue"}, {{"apple"}, {"stone"}});
  CHECK(back.score(it).scores == m.score(it).scores);

  auto store = store_2d();
  auto ext = FusionModel::with_vectors(store, HeadKind::ParallelMax, false, 3);
  auto eb = ext.serialize();
  CHECK_THROWS_AS(FusionModel::deserialize(eb), ValidationError);
  auto eback = FusionModel::deserialize(eb, store);
  CHECK(eback.score(hand_item()).scores == ext.score(hand_item()).scores);
}

TEST_CASE("external vectors report missing keys") {
  auto m = FusionModel::with_vectors(store_2d(), HeadKind::SimpleSum, false, 0);
  auto it = item_with({"red", "blue"}, {{"p", "q", "r"}, {"s"}}, 0, "h");
  CHECK_THROWS_AS(m.score(it), ValidationError);
}
