from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prefalign.grammar import ParsedRating, parse_rating
from prefalign.rewards import (
    PairReward,
    RatingReward,
    accuracy_score,
    comparison_score,
    consistency_score,
    extract_rating,
    extract_verdict,
    implied_level,
    pair_reward,
    rating_reward,
)
from prefalign.tokens import Verdict, Vocab

VOCAB = Vocab()
DATA = Path(__file__).parent / "data"


def ids(text):
    return VOCAB.from_text(text)


# --- component scores ------------------------------------------------------------


def test_accuracy_exact_match_only():
    parsed = ParsedRating(evidence=(3,), answer=3)
    assert accuracy_score(parsed, 3) == 1
    assert accuracy_score(parsed, 2) == 0
    assert accuracy_score(ParsedRating(evidence=(4,), answer=4), 3) == 0  # off-by-one: no credit


def test_consistency_mode_rule():
    assert consistency_score(ParsedRating(evidence=(3, 3), answer=3)) == 1
    assert consistency_score(ParsedRating(evidence=(2,), answer=4)) == 0
    # tie in the mode breaks to the lowest level
    assert consistency_score(ParsedRating(evidence=(2, 4), answer=2)) == 1
    assert consistency_score(ParsedRating(evidence=(2, 4), answer=4)) == 0


def test_implied_level_enumerated():
    # brute-force cross-check of the mode/tie-break rule on all pairs
    for e1 in range(1, 6):
        for e2 in range(1, 6):
            expect = e1 if e1 == e2 else min(e1, e2)
            assert implied_level(ParsedRating(evidence=(e1, e2), answer=1)) == expect


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(1, 5), min_size=1, max_size=6), st.randoms())
def test_consistency_order_free(values, rnd):
    shuffled = list(values)
    rnd.shuffle(shuffled)
    a = implied_level(ParsedRating(evidence=tuple(values), answer=1))
    b = implied_level(ParsedRating(evidence=tuple(shuffled), answer=1))
    assert a == b


def test_consistency_filler_invariant():
    with_filler = parse_rating(ids("<think> FILLER_0 EVID_2 FILLER_1 EVID_4 </think> <answer> RATE_2 </answer>"), VOCAB)
    without = parse_rating(ids("<think> EVID_2 EVID_4 </think> <answer> RATE_2 </answer>"), VOCAB)
    assert consistency_score(with_filler) == consistency_score(without) == 1


# --- rating reward (gating + composition) ----------------------------------------------


def test_rating_reward_max():
    r = rating_reward(ids("<think> EVID_3 </think> <answer> RATE_3 </answer>"), 3, VOCAB)
    assert r == RatingReward(1, 1, 1)
    assert r.total == 3


def test_rating_reward_wrong_but_consistent():
    r = rating_reward(ids("<think> EVID_2 </think> <answer> RATE_2 </answer>"), 3, VOCAB)
    assert (r.format, r.accuracy, r.consistency) == (1, 0, 1)
    assert r.total == 2


def test_rating_reward_gating():
    r = rating_reward(ids("<answer> RATE_3 </answer>"), 3, VOCAB)
    assert r == RatingReward(0, 0, 0)
    assert r.total == 0


def test_rating_reward_range():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(0, 10))
        seq = [int(rng.integers(0, VOCAB.size)) for _ in range(n)]
        total = rating_reward(seq, int(rng.integers(1, 6)), VOCAB).total
        assert total in (0, 1, 2, 3)


# --- comparison score ---------------------------------------------------------------------


def test_comparison_score_basic():
    assert comparison_score(Verdict.A, Verdict.A) == 1
    assert comparison_score(Verdict.A, Verdict.B) == 0
    assert comparison_score(Verdict.A, Verdict.TIE) == 0
    assert comparison_score(Verdict.TIE, Verdict.TIE) == 0  # predictions live in {A, B}
    assert comparison_score(None, Verdict.A) == 0


def test_comparison_score_relabeling_symmetry():
    for y_star in (Verdict.A, Verdict.B):
        for y_gt in Verdict:
            assert comparison_score(y_star, y_gt) == comparison_score(y_star.swapped(), y_gt.swapped())


# --- pair reward ------------------------------------------------------------------------

FULL_A = (
    "<dim> DIM_0 EVID_3 RATE_3 </dim> <dim> DIM_1 EVID_2 RATE_2 </dim> "
    "<dim> DIM_2 EVID_4 RATE_4 </dim> <dim> DIM_3 EVID_1 RATE_1 </dim> "
    "<dim> DIM_4 EVID_5 RATE_5 </dim> PREFER_A"
)


def test_pair_reward_max():
    r = pair_reward(ids(FULL_A), ids(FULL_A), Verdict.A, Verdict.A, VOCAB)
    assert r == PairReward(1, 1.0, 1)
    assert r.total == 3.0


def test_pair_reward_wrong_verdict():
    r = pair_reward(ids(FULL_A), ids(FULL_A), Verdict.B, Verdict.A, VOCAB)
    assert r.total == 2.0


def test_pair_reward_min_scaffold_mean_blocks():
    broken = ids("<dim> DIM_0 EVID_3 RATE_3 </dim>")  # no verdict: scaffold 0, one valid block
    r = pair_reward(broken, ids(FULL_A), Verdict.A, Verdict.A, VOCAB)
    assert r.scaffold == 0
    assert r.blocks == pytest.approx(0.6)
    assert r.verdict == 1


def test_pair_reward_total_range():
    rng = np.random.default_rng(1)
    for _ in range(100):
        seq_a = [int(rng.integers(0, VOCAB.size)) for _ in range(int(rng.integers(0, 16)))]
        seq_b = [int(rng.integers(0, VOCAB.size)) for _ in range(int(rng.integers(0, 16)))]
        r = pair_reward(seq_a, seq_b, Verdict.A, Verdict.B, VOCAB)
        assert 0.0 <= r.total <= 3.0


# --- extraction helpers ------------------------------------------------------------------


def test_extract_verdict_prefers_second_response():
    a = ids("PREFER_A")
    b = ids("<dim> DIM_0 EVID_1 RATE_1 </dim> PREFER_B")
    assert extract_verdict(a, b, VOCAB) is Verdict.B
    assert extract_verdict(a, [], VOCAB) is Verdict.A
    assert extract_verdict([], [], VOCAB) is None


def test_extract_rating_last_rate_wins():
    assert extract_rating(ids("RATE_2 EVID_3 RATE_4"), VOCAB) == 4
    assert extract_rating(ids("<think> EVID_3 </think>"), VOCAB) is None


# --- golden fixtures ------------------------------------------------------------------------


def _parse_fields(line):
    return [f.strip() for f in line.split("|")]


def test_rating_golden_corpus():
    lines = [l for l in (DATA / "rating_golden.txt").read_text().splitlines() if l.strip() and not l.startswith("#")]
    assert len(lines) >= 20
    for line in lines:
        seq_text, label, expect = _parse_fields(line)
        f, a, c = (int(x) for x in expect.split(","))
        r = rating_reward(VOCAB.from_text(seq_text), int(label), VOCAB)
        assert (r.format, r.accuracy, r.consistency) == (f, a, c), line


def test_pair_golden_corpus():
    lines = [l for l in (DATA / "pair_golden.txt").read_text().splitlines() if l.strip() and not l.startswith("#")]
    assert len(lines) >= 10
    for line in lines:
        seq_a, seq_b, y_star, y_gt, expect = _parse_fields(line)
        scaffold, blocks, verdict = expect.split(",")
        y_star_v = None if y_star == "NONE" else Verdict(y_star)
        r = pair_reward(VOCAB.from_text(seq_a), VOCAB.from_text(seq_b), y_star_v, Verdict(y_gt), VOCAB)
        assert r.scaffold == int(scaffold), line
        assert r.blocks == pytest.approx(float(blocks)), line
        assert r.verdict == int(verdict), line


def test_golden_corpus_spans_thirty_sequences():
    n = 0
    for name in ("rating_golden.txt", "pair_golden.txt"):
        for line in (DATA / name).read_text().splitlines():
            if line.strip() and not line.startswith("#"):
                n += 2 if name == "pair_golden.txt" else 1
    assert n >= 30
