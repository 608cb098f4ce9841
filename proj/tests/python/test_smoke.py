import json
import math
from pathlib import Path

import pytest

import kinfuse

DATA = Path(__file__).resolve().parents[1] / "data" / "cli"


@pytest.fixture(scope="module")
def corpus():
    return kinfuse.load_corpus(DATA / "kb.txt", "plain-lines")


@pytest.fixture(scope="module")
def index(corpus):
    return kinfuse.InvertedIndex.build(corpus)


def test_text_helpers():
    assert kinfuse.tokenize("Don't PANIC, ok?") == ["don", "t", "panic", "ok"]
    assert kinfuse.split_sentences("Mr. Smith left. He was late.") == ["Mr. Smith left.", "He was late."]
    assert kinfuse.token_jaccard("a b c", "b c d") == pytest.approx(0.5)


def test_index_search(corpus, index):
    assert len(corpus) == 40
    assert index.n_docs == 40
    hits = index.search(["kettle", "safe"], 3)
    assert hits[0].rank == 1
    assert "kettle" in index.corpus.sentences[hits[0].doc].text.lower()
    assert [h.score for h in hits] == sorted((h.score for h in hits), reverse=True)
    df = sum("kettle" in kinfuse.tokenize(s.text) for s in corpus.sentences)
    n = 40
    assert index.idf("kettle") == pytest.approx(math.log(1 + (n - df + 0.5) / (df + 0.5)))


def test_rerank_and_edit_distance():
    assert kinfuse.rerank_order(["a b", "a b", "c d"], "a b c d", 2, 1.0) == [0, 2]
    assert kinfuse.edit_distance("John", "Jon") == 1
    picks = kinfuse.select_distractors("John", ["Jon", "Johan", "Joan", "Robert"], 3, 7)
    assert set(picks) <= {"Jon", "Johan", "Joan"}


def test_attach_train_evaluate(index):
    train_set = kinfuse.load_mcq(DATA / "train.jsonl")
    dev_set = kinfuse.load_mcq(DATA / "dev.jsonl")
    cfg = {"rerank.m": "2", "attach.retrieve_k": "10"}
    train_att = kinfuse.attach_premises(train_set, index, cfg)
    dev_att = kinfuse.attach_premises(dev_set, index, cfg)
    assert all(len(p) == 2 for it in train_att.items for p in it.premises)

    texts = [s.text for s in index.corpus.sentences]
    texts += [o for it in train_set.items + dev_set.items for o in it.options + [it.question]]
    enc = kinfuse.EncoderModel.create(kinfuse.Vocabulary.build(texts), dim=8, seed=1)
    model = kinfuse.FusionModel.with_encoder(enc, "weighted-sum", seed=2)
    trained, losses = kinfuse.train(model, train_att, seed=3, config={"train.epochs": "3"})
    assert len(losses) == 3 and all(math.isfinite(x) for x in losses)
    acc, predictions = kinfuse.evaluate(trained, dev_att)
    rows = [json.loads(line) for line in predictions.splitlines()]
    assert len(rows) == len(dev_att)
    assert acc == pytest.approx(sum(r["predicted"] == r["gold"] for r in rows) / len(rows))
    scored = trained.score(dev_att.items[0])
    assert sum(scored["weights"][0]) == pytest.approx(1.0)
    csv = kinfuse.weight_report(trained, dev_att)
    assert csv.splitlines()[0] == "item,option,passage,weight,overlap"
    err, n = kinfuse.grad_check(model, train_att.items[0])
    assert n > 0 and err < 1e-5


def test_pfqa_questions():
    facts = [("Amy Lee", "Bob Lee"), ("Bob Lee", "Cyd Lee"), ("Dee Lee", "Bob Lee"),
             ("Amos Lee", "Bo Lee"), ("Bab Lee", "Rob Lee"), ("Rob Lee", "Cid Lee")]
    qs = kinfuse.generate_pfqa(facts, seed=1)
    gp = [q for q in qs if q["person"] == "Amy Lee" and q["qtype"] == "grandparent"]
    assert len(gp) == 1 and gp[0]["options"][gp[0]["gold"]] == "Cyd"
    assert all(len(set(q["options"])) == 4 for q in qs)


def test_errors_map_to_python_exceptions(tmp_path):
    with pytest.raises(kinfuse.IoError):
        kinfuse.load_corpus(tmp_path / "missing.txt")
    with pytest.raises(kinfuse.ValidationError):
        kinfuse.McqItem("x", "q", ["only"], 0)
    with pytest.raises(ValueError):
        kinfuse.FusionModel.with_encoder(
            kinfuse.EncoderModel.create(kinfuse.Vocabulary.build(["a"]), dim=4), "mean")
