from __future__ import annotations

import random

import pytest

from kgrag.evaluation import bleu, lcs_length, metric_tokens, rouge_l, rouge_n

from oracles import bleu_oracle, lcs_oracle, rouge_l_oracle, rouge_n_oracle


def random_pair(rng):
    vocab = [f"w{i}" for i in range(rng.randint(2, 8))]
    cand = [rng.choice(vocab) for _ in range(rng.randint(0, 15))]
    refs = [[rng.choice(vocab) for _ in range(rng.randint(1, 15))] for _ in range(rng.randint(1, 3))]
    return cand, refs


def test_bleu_examples():
    assert bleu("the ammonia converter yields ammonia", ["the ammonia converter yields ammonia"]) == pytest.approx(1.0)
    assert bleu("alpha beta", ["gamma delta"]) == 0.0
    assert bleu("", ["a b"]) == 0.0
    got = bleu("a b c d", ["a b c d e"])
    assert got == pytest.approx(bleu_oracle("a b c d".split(), ["a b c d e".split()]), abs=1e-12)
    with pytest.raises(ValueError):
        bleu("a", [])


def test_bleu_smoothing_rule():
    # unigrams match, no bigram does: p2..p4 take 1/(total+1)
    cand, ref = "b a".split(), "a b".split()
    p = [1.0, 1 / 2, 1 / 1, 1 / 1]
    expected = (p[0] * p[1] * p[2] * p[3]) ** 0.25
    assert bleu(cand, [ref]) == pytest.approx(expected, abs=1e-15)


def test_rouge_examples():
    assert rouge_n("a b c", "a b c", 2).f1 == 1.0
    assert rouge_n("a b", "c d", 1).f1 == 0.0
    short = rouge_n("a b c", "a", 2)
    assert short.f1 == 0.0 and not short.defined
    with pytest.raises(ValueError):
        rouge_n("a", "a", 0)
    lcs = rouge_l("a c d", "a b c d")
    assert lcs_length("a c d".split(), "a b c d".split()) == 3
    assert (lcs.precision, lcs.recall) == (1.0, 0.75)
    assert lcs.f1 == 6 / 7
    assert rouge_l("a b", "a b").f1 == 1.0
    assert rouge_l("", "a b").f1 == 0.0


def test_metric_tokens_lowercase_whitespace():
    assert metric_tokens("The  Ammonia, converter") == ["the", "ammonia,", "converter"]


def test_metrics_match_oracles():
    rng = random.Random(77)
    for _ in range(50):
        cand, refs = random_pair(rng)
        assert abs(bleu(cand, refs) - bleu_oracle(cand, refs)) <= 1e-9
        ref = refs[0]
        for n in (1, 2, 3):
            got = rouge_n(cand, ref, n)
            p, r, f = rouge_n_oracle(cand, ref, n)
            assert max(abs(got.precision - p), abs(got.recall - r), abs(got.f1 - f)) <= 1e-9
        got = rouge_l(cand, ref)
        p, r, f = rouge_l_oracle(cand, ref)
        assert max(abs(got.precision - p), abs(got.recall - r), abs(got.f1 - f)) <= 1e-9
        assert lcs_length(cand, ref) == lcs_oracle(tuple(cand), tuple(ref))


def test_rouge_swap_symmetry():
    rng = random.Random(5)
    for _ in range(100):
        cand, refs = random_pair(rng)
        if not cand:
            continue
        ref = refs[0]
        for n in (1, 2):
            a, b = rouge_n(cand, ref, n), rouge_n(ref, cand, n)
            if a.defined and b.defined:
                assert (a.precision, a.recall) == (b.recall, b.precision) and a.f1 == b.f1
        a, b = rouge_l(cand, ref), rouge_l(ref, cand)
        assert (a.precision, a.recall) == (b.recall, b.precision)
