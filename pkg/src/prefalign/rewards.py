"""Rule-based rewards for the two response shapes.

Rating responses earn three binary scores: format validity, answer accuracy
against the ground-truth level, and reasoning consistency (the evidence must
support the answered level).  An invalid format gates the other two to zero.
Comparison response pairs earn a scaffold score, a per-dimension block score,
and a verdict-correctness score; the three are summed into the total.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .errors import FormatError
from .grammar import (
    ParsedRating,
    block_score,
    parse_rating,
    rating_format_score,
    scaffold_score,
)
from .tokens import Verdict, Vocab


@dataclass(frozen=True)
class RatingReward:
    format: int
    accuracy: int
    consistency: int

    @property
    def total(self) -> int:
        return self.format + self.accuracy + self.consistency


@dataclass(frozen=True)
class PairReward:
    scaffold: int
    blocks: float
    verdict: int

    @property
    def total(self) -> float:
        return self.scaffold + self.blocks + self.verdict


def accuracy_score(parsed: ParsedRating, label: int) -> int:
    """1 iff the answered level equals the ground-truth label (no partial credit)."""
    return 1 if parsed.answer == label else 0


def implied_level(parsed: ParsedRating) -> int:
    """Level the evidence points to: the mode of evidence values, ties to the
    lowest level.  Order-free and unaffected by fillers (already dropped)."""
    counts = Counter(parsed.evidence)
    best = max(counts.values())
    return min(k for k, c in counts.items() if c == best)


def consistency_score(parsed: ParsedRating) -> int:
    """1 iff the evidence-implied level matches the answered level."""
    return 1 if implied_level(parsed) == parsed.answer else 0


def rating_reward(tokens, label: int, vocab: Vocab) -> RatingReward:
    """Score a rating response; an unparseable response scores (0, 0, 0)."""
    try:
        parsed = parse_rating(tokens, vocab)
    except FormatError:
        return RatingReward(0, 0, 0)
    return RatingReward(1, accuracy_score(parsed, label), consistency_score(parsed))


def comparison_score(y_star, y_gt) -> int:
    """1 iff the predicted verdict matches the ground truth.

    Predictions are meaningful only as A or B; a TIE ground truth is therefore
    never matched, and a TIE (or missing, passed as None) prediction scores 0.
    """
    if y_star not in (Verdict.A, Verdict.B):
        return 0
    return 1 if y_star == y_gt else 0


def pair_reward(tokens_a, tokens_b, y_star, y_gt, vocab: Vocab) -> PairReward:
    """Score a comparison response pair.

    The scaffold score is the minimum over the two responses (the pair's
    hierarchical structure is only as good as its weaker side); the block
    score is their mean; the verdict score compares the extracted final
    prediction with the ground-truth label.
    """
    scaffold = min(scaffold_score(tokens_a, vocab), scaffold_score(tokens_b, vocab))
    blocks = (block_score(tokens_a, vocab) + block_score(tokens_b, vocab)) / 2.0
    return PairReward(scaffold, blocks, comparison_score(y_star, y_gt))


def extract_verdict(tokens_a, tokens_b, vocab: Vocab):
    """Final preference prediction of a response pair: the last PREFER token
    emitted across the two responses (the second response is generated after
    the first, so its verdict stands).  None when neither emitted one."""
    for tokens in (tokens_b, tokens_a):
        for tid in reversed(tokens):
            if vocab.kind(tid).name == "PREFER":
                return vocab.value(tid)
    return None


def extract_rating(tokens, vocab: Vocab):
    """Format-free answer extraction: the last RATE token's level, if any.

    Used by the no-reasoning training ablation, which rewards accuracy without
    enforcing the response grammar.
    """
    for tid in reversed(tokens):
        if vocab.kind(tid).name == "RATE":
            return vocab.value(tid)
    return None
