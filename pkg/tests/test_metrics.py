import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alspeech.errors import MissingEntropiesError, ValidationError, ZeroVarianceError
from alspeech.metrics import (
    NormalizationConfig,
    cer,
    cmer,
    committee_uncertainty,
    edit_counts,
    entropy_uncertainty,
    normalize,
    pearson,
    score_committee,
    wer,
)
from alspeech.storage import CommitteeArtifact

from oracles import brute_force_distance

tokens = st.lists(st.integers(0, 9), min_size=0, max_size=12)


def test_normalize_basic():
    assert normalize("The  CAT.").words == ("the", "cat")
    assert normalize("").words == ()
    cfg = NormalizationConfig(strip_punctuation=False)
    assert normalize("a b", cfg).words == ("a", "b")


def test_normalize_keeps_punctuation_when_off():
    cfg = NormalizationConfig(strip_punctuation=False)
    assert normalize("cat.", cfg).words == ("cat.",)


def test_edit_counts_examples():
    c = edit_counts(["the", "cat"], ["the", "cat", "sat"])
    assert (c.substitutions, c.deletions, c.insertions, c.ref_len) == (0, 1, 0, 3)
    c = edit_counts(["a", "b"], ["a", "b"])
    assert c.distance == 0
    c = edit_counts(["x"], [])
    assert (c.substitutions, c.deletions, c.insertions, c.ref_len) == (0, 0, 1, 0)


def test_edit_counts_prefers_substitution():
    c = edit_counts(["dog"], ["cat"])
    assert (c.substitutions, c.deletions, c.insertions) == (1, 0, 0)


@given(tokens, tokens)
@settings(max_examples=300)
def test_edit_counts_matches_brute_force(hyp, ref):
    c = edit_counts(hyp, ref)
    assert c.distance == brute_force_distance(hyp, ref)
    assert c.substitutions + c.deletions <= len(ref)


@given(tokens, tokens)
def test_edit_distance_symmetric(a, b):
    assert edit_counts(a, b).distance == edit_counts(b, a).distance


@given(tokens, tokens, tokens)
@settings(max_examples=200)
def test_edit_distance_triangle(a, b, c):
    dab = edit_counts(a, b).distance
    dbc = edit_counts(b, c).distance
    dac = edit_counts(a, c).distance
    assert dac <= dab + dbc


def test_wer_examples():
    assert wer("the cat", "the cat sat") == pytest.approx(1 / 3)
    assert wer("same text", "same text") == 0.0
    assert wer("a b c", "") == 3.0
    assert wer("", "") == 0.0


def test_wer_can_exceed_one():
    assert wer("a b c d e f", "x") > 1.0


def test_wer_asymmetric_rate():
    a, b = "one two three four", "one"
    assert wer(a, b) != wer(b, a)


def test_cer_and_cmer():
    assert cer("cat", "cut") == pytest.approx(1 / 3)
    assert cer("same", "same") == 0.0
    assert cer("", "ab") == 1.0
    assert cmer("cat", "cut") == cer("cat", "cut")


def _artifact(ref, hyps, entropies=None, sid="x"):
    return CommitteeArtifact(
        sample_id=sid, reference=ref, hypotheses=hyps, token_entropies=entropies
    )


def test_committee_uncertainty_zero_when_identical():
    a = _artifact("hello world", ["hello world"] * 5)
    assert committee_uncertainty(a).value == 0.0


def test_committee_uncertainty_mean():
    a = _artifact("a b c d", ["a b c d", "a b c x"])
    score = committee_uncertainty(a)
    assert score.value == pytest.approx(0.125)
    assert score.per_hypothesis_wer == [0.0, 0.25]


def test_committee_uncertainty_order_invariant():
    hyps = ["a b", "a x", "y b", "a b c"]
    a = committee_uncertainty(_artifact("a b", hyps))
    b = committee_uncertainty(_artifact("a b", list(reversed(hyps))))
    assert a.value == pytest.approx(b.value)


def test_committee_uncertainty_nonnegative_random():
    import random

    rng = random.Random(7)
    vocab = [f"w{i}" for i in range(10)]
    for _ in range(200):
        ref = " ".join(rng.choices(vocab, k=rng.randint(0, 6)))
        hyps = [
            " ".join(rng.choices(vocab, k=rng.randint(0, 6))) for _ in range(4)
        ]
        score = committee_uncertainty(_artifact(ref, hyps))
        assert score.value >= 0
        identical = all(normalize(h).words == normalize(ref).words for h in hyps)
        assert (score.value == 0) == identical


def test_score_committee_worker_invariance():
    arts = {
        f"s{i}": _artifact("a b c", ["a b c", f"a w{i} c"], sid=f"s{i}")
        for i in range(30)
    }
    base = {k: v.value for k, v in score_committee(arts, workers=1).items()}
    for workers in (4, 16):
        got = {k: v.value for k, v in score_committee(arts, workers=workers).items()}
        assert got == base


def test_entropy_uncertainty():
    assert entropy_uncertainty(_artifact("r", ["h"], [0.0, 0.0, 0.0])) == 0.0
    assert entropy_uncertainty(_artifact("r", ["h"], [1.0, 3.0])) == 2.0
    with pytest.raises(MissingEntropiesError):
        entropy_uncertainty(_artifact("r", ["h"], None))


def test_pearson():
    xs = [1.0, 2.0, 3.0, 4.0]
    assert pearson(xs, [2 * x + 1 for x in xs]) == pytest.approx(1.0)
    assert pearson(xs, [-x for x in xs]) == pytest.approx(-1.0)
    with pytest.raises(ZeroVarianceError):
        pearson([1.0, 1.0, 1.0], xs[:3])
    with pytest.raises(ValidationError):
        pearson([1.0], [2.0])
    with pytest.raises(ValidationError):
        pearson([1.0, 2.0], [1.0, 2.0, 3.0])
