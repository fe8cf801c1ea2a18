"""Edit-rate metrics (WER/CER/CMER), committee disagreement scoring and the
correlation diagnostic.

Committee uncertainty for a sample is the mean word error rate of its T
stochastic hypotheses against the no-dropout reference transcription, one
alignment per hypothesis (linear in T, no pairwise comparisons).
"""

from __future__ import annotations

import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from alspeech.errors import (
    MissingEntropiesError,
    ValidationError,
    ZeroVarianceError,
)
from alspeech.kernels import edit_counts_ids


@dataclass(frozen=True)
class NormalizationConfig:
    lowercase: bool = True
    strip_punctuation: bool = True
    nfc: bool = True

    def to_dict(self):
        return {
            "lowercase": self.lowercase,
            "strip_punctuation": self.strip_punctuation,
            "nfc": self.nfc,
        }


DEFAULT_NORMALIZATION = NormalizationConfig()


@dataclass(frozen=True)
class TokenizedText:
    raw: str
    words: tuple
    chars: tuple


def normalize(text, config=DEFAULT_NORMALIZATION):
    """NFC + lowercase + optional punctuation stripping + whitespace split."""
    s = text
    if config.nfc:
        s = unicodedata.normalize("NFC", s)
    if config.lowercase:
        s = s.lower()
    if config.strip_punctuation:
        s = "".join(
            c for c in s if not unicodedata.category(c).startswith("P")
        )
    words = tuple(s.split())
    chars = tuple(" ".join(words))
    return TokenizedText(raw=text, words=words, chars=chars)


@dataclass(frozen=True)
class EditCounts:
    substitutions: int
    deletions: int
    insertions: int
    ref_len: int

    @property
    def distance(self):
        return self.substitutions + self.deletions + self.insertions


def edit_counts(hyp_tokens, ref_tokens):
    """Minimal-cost unit alignment of hyp onto ref, deterministic counts."""
    vocab = {}
    hyp_ids = [vocab.setdefault(t, len(vocab)) for t in hyp_tokens]
    ref_ids = [vocab.setdefault(t, len(vocab)) for t in ref_tokens]
    s, d, i = edit_counts_ids(hyp_ids, ref_ids)
    return EditCounts(
        substitutions=s, deletions=d, insertions=i, ref_len=len(ref_tokens)
    )


def _rate(counts):
    # Empty-reference rule: identical empties score 0, otherwise the
    # insertion count stands in for the rate (divisor treated as 1).
    if counts.ref_len == 0:
        return float(counts.insertions)
    return counts.distance / counts.ref_len


def wer(hyp, ref, config=DEFAULT_NORMALIZATION):
    """(S + D + I) / N on word tokens; may exceed 1."""
    h = normalize(hyp, config)
    r = normalize(ref, config)
    return _rate(edit_counts(h.words, r.words))


def cer(hyp, ref, config=DEFAULT_NORMALIZATION):
    h = normalize(hyp, config)
    r = normalize(ref, config)
    return _rate(edit_counts(h.chars, r.chars))


def cmer(hyp, ref, config=DEFAULT_NORMALIZATION):
    """Character matching error rate, implemented as character edit rate."""
    return cer(hyp, ref, config)


@dataclass
class UncertaintyScore:
    sample_id: str
    value: float
    per_hypothesis_wer: list = field(default_factory=list)


def committee_uncertainty(artifact, config=DEFAULT_NORMALIZATION):
    """Mean WER of the T stochastic hypotheses against the reference."""
    if not artifact.hypotheses:
        raise ValidationError(
            f"committee artifact {artifact.sample_id!r} has no hypotheses"
        )
    ref = normalize(artifact.reference, config)
    wers = []
    for hyp in artifact.hypotheses:
        h = normalize(hyp, config)
        wers.append(_rate(edit_counts(h.words, ref.words)))
    return UncertaintyScore(
        sample_id=artifact.sample_id,
        value=sum(wers) / len(wers),
        per_hypothesis_wer=wers,
    )


def entropy_uncertainty(artifact):
    """Mean per-token softmax entropy; the entropy-baseline acquisition."""
    ent = artifact.token_entropies
    if not ent:
        raise MissingEntropiesError(
            f"artifact {artifact.sample_id!r} carries no token entropies"
        )
    return sum(ent) / len(ent)


def score_committee(artifacts, config=DEFAULT_NORMALIZATION, workers=1):
    """Score a set of committee artifacts, optionally fanned out to threads.

    Result is keyed by sample id and independent of worker count.
    """
    items = sorted(artifacts.items())
    if workers <= 1:
        return {sid: committee_uncertainty(a, config) for sid, a in items}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        scored = pool.map(lambda kv: committee_uncertainty(kv[1], config), items)
        return {sid: score for (sid, _), score in zip(items, scored)}


def pearson(xs, ys):
    """Sample Pearson correlation; raises on length mismatch / zero variance."""
    if len(xs) != len(ys):
        raise ValidationError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise ValidationError("need at least two points")
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    xd = x - x.mean()
    yd = y - y.mean()
    sx = float(np.sqrt((xd * xd).sum()))
    sy = float(np.sqrt((yd * yd).sum()))
    if sx == 0.0 or sy == 0.0:
        raise ZeroVarianceError("correlation undefined for zero-variance input")
    return float((xd * yd).sum() / (sx * sy))
