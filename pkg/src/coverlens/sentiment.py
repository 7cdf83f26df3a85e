"""Lexicon-based comment scoring on a 0-100 scale.

Token valences are summed into ``s``, squashed to a compound score
``c = s / sqrt(s^2 + 15)`` in (-1, 1), and mapped to ``(c + 1) * 50``.
A negator among the three tokens before a sentiment word multiplies its
valence by -0.74; a booster right before it pushes the valence further from
zero by the booster's amount.
"""
from __future__ import annotations

import csv
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

from coverlens.errors import DatasetError

NORMALIZATION_ALPHA = 15.0
NEGATION_SCALAR = -0.74
NEGATION_WINDOW = 3
LEXICON_ENV = "COVERLENS_LEXICON"
BUNDLED_LEXICON = Path(__file__).with_name("data") / "lexicon.tsv"

DEFAULT_NEGATORS = frozenset(
    "not no never nothing nobody neither nor without dont don't isnt isn't wasnt wasn't "
    "cant can't cannot doesnt doesn't didnt didn't aint ain't wont won't".split()
)
_INCR, _DECR = 0.293, -0.293
DEFAULT_BOOSTERS = MappingProxyType({
    **dict.fromkeys(
        "absolutely completely extremely incredibly really so such super totally truly very most".split(), _INCR
    ),
    **dict.fromkeys("barely hardly slightly somewhat kinda".split(), _DECR),
})

_TOKEN_RE = re.compile(r"[a-z0-9']+")


@dataclass(frozen=True)
class SentimentLexicon:
    valences: Mapping[str, float]
    negators: frozenset = DEFAULT_NEGATORS
    boosters: Mapping[str, float] = field(default_factory=lambda: DEFAULT_BOOSTERS)

    def __post_init__(self):
        if not self.valences:
            raise ValueError("lexicon is empty")
        for tok, val in self.valences.items():
            if not math.isfinite(val):
                raise ValueError(f"valence of {tok!r} is not finite")
        object.__setattr__(self, "valences", MappingProxyType(dict(self.valences)))

    def __reduce__(self):
        # mapping proxies don't pickle; rebuild from plain dicts in worker processes
        return (SentimentLexicon, (dict(self.valences), self.negators, dict(self.boosters)))


def load_lexicon(path=None) -> SentimentLexicon:
    """Read a ``token<TAB>valence`` file.

    Without ``path`` the ``COVERLENS_LEXICON`` environment variable is
    consulted, then the bundled lexicon.
    """
    if path is None:
        path = os.environ.get(LEXICON_ENV) or BUNDLED_LEXICON
    valences = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: expected token<TAB>valence")
            valences[parts[0].strip().lower()] = float(parts[1])
    return SentimentLexicon(valences)


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def raw_sum(text: str, lexicon: SentimentLexicon) -> float:
    tokens = tokenize(text)
    total = 0.0
    for i, tok in enumerate(tokens):
        v = lexicon.valences.get(tok)
        if not v:
            continue
        if i > 0 and tokens[i - 1] in lexicon.boosters:
            boost = lexicon.boosters[tokens[i - 1]]
            v += boost if v > 0 else -boost
        for prev in tokens[max(0, i - NEGATION_WINDOW):i]:
            if prev in lexicon.negators:
                v *= NEGATION_SCALAR
        total += v
    return total


def compound(s: float, alpha: float = NORMALIZATION_ALPHA) -> float:
    if math.isinf(s):
        return math.copysign(1.0, s)
    return s / math.sqrt(s * s + alpha)


def compound_to_score(c: float) -> float:
    return (c + 1.0) * 50.0


def score_comment(text: str, lexicon: SentimentLexicon) -> float:
    """Sentiment of one comment: 0 most negative, 50 neutral, 100 most positive."""
    return compound_to_score(compound(raw_sum(text, lexicon)))


def aggregate_scores(scores) -> float:
    scores = list(scores)
    if not scores:
        raise DatasetError("cannot aggregate an empty list of scores")
    return math.fsum(scores) / len(scores)


@dataclass(frozen=True)
class LabeledComment:
    pair_id: str
    text: str
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 100.0:
            raise ValueError(f"score {self.score} outside [0, 100]")


def read_comments(path) -> list[tuple[str, str]]:
    """Rows of a ``pair_id,comment`` CSV as (pair_id, text) tuples."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"pair_id", "comment"} <= set(reader.fieldnames):
            raise DatasetError(f"{path}: expected header 'pair_id,comment'")
        return [(row["pair_id"], row["comment"] or "") for row in reader]


def score_comments(rows, lexicon: SentimentLexicon) -> list[LabeledComment]:
    return [LabeledComment(pid, text, score_comment(text, lexicon)) for pid, text in rows]


def labels_by_pair(comments) -> dict[str, float]:
    """Mean score per pair id, in first-seen order."""
    grouped: dict[str, list[float]] = {}
    for c in comments:
        grouped.setdefault(c.pair_id, []).append(c.score)
    return {pid: aggregate_scores(scores) for pid, scores in grouped.items()}
