"""Finite state space and transition tables for the tabular response policy.

The policy is a logit table over (state, token).  A state encodes where the
response stands structurally (a small automaton over the response grammar)
plus, where content matters, a coarse bucket of the input: rating slots carry
(dimension, feature bucket); the final-verdict slot of a comparison response
carries a bucketed summary of the judgments the two responses themselves
emitted.  Both tasks' automata index into one shared table, and the
first-evidence states are literally shared between the two tasks: that is the
skill a rating-trained table transfers to comparison training.

Transitions are static int tables per task; the handful of transitions that
depend on the instance (which bucket a dimension mark leads to) or on the
trajectory (duplicate dimension marks, block counting, verdict context) are
encoded as sentinel codes resolved by the sampling kernel at runtime.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .tokens import DEFAULT_MAX_LEN, Verdict, Vocab
from .world import DEFAULT_MOTION_FLAGS

# Transition sentinels (resolved by the sampling kernel).
DEAD = -1  # token breaks the grammar beyond repair; sequence truncates after it
STOP = -2  # natural end of the response
THINK_ENTRY = -3  # jump to the instance's first-evidence state
ANSWER_ENTRY = -4  # jump to the instance's answer state
DIM_JUMP = -5  # jump to the marked dimension's first-evidence state (dup -> dead)
BLOCK_CLOSE = -6  # count the finished block; after the last one, enter the verdict slot

# Indices into the int64 meta vector consumed by the sampling kernels.
META_EV_OPEN_BASE = 0
META_N_BUCKETS = 1
META_PAIR_NEXT_BASE = 2
META_VERDICT_BASE = 3
META_N_DIMS = 4
META_SPAN = 5
META_MID = 6
META_DIM_TOKEN_BASE = 7
META_COEF_SELF = 8
META_BASE_M = 9
META_BASE_S = 10
META_MAX_LEN = 11
META_THINK_ENTRY = 12
META_ANSWER_ENTRY = 13
META_START_STATE = 14
META_GREEDY = 15
META_VERDICT_OVERRIDE = 16
META_SIZE = 17


@dataclass(frozen=True)
class PolicySpec:
    """Dimensions of the state space and its id layout."""

    n_dims: int = 5
    rating_levels: int = 5
    n_buckets: int = 10
    n_fillers: int = 4
    max_len: int = DEFAULT_MAX_LEN
    verdict_span: int = 8
    motion_flags: tuple[bool, ...] = DEFAULT_MOTION_FLAGS
    vocab: Vocab = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.motion_flags) != self.n_dims:
            raise ConfigurationError("motion_flags must have one entry per dimension")
        if self.n_buckets < self.rating_levels:
            raise ConfigurationError("need at least one feature bucket per rating level")
        if self.verdict_span < 1:
            raise ConfigurationError("verdict_span must be >= 1")
        object.__setattr__(self, "vocab", Vocab(self.n_dims, self.rating_levels, self.n_fillers))
        # longest policy-emittable comparison response: D blocks of six tokens
        # plus the verdict; anything the policy can emit must fit the cap
        min_len = 6 * self.n_dims + 1
        if self.max_len < min_len:
            raise ConfigurationError(
                f"max_len {self.max_len} cannot fit a full comparison response ({min_len} tokens)"
            )

    # --- state id layout ---------------------------------------------------

    @property
    def rating_begin(self) -> int:
        return 0

    @property
    def rating_pre_answer(self) -> int:
        return 1

    @property
    def rating_pre_close(self) -> int:
        return 2

    @property
    def pair_begin(self) -> int:
        return 3

    def pair_open(self, blocks_done: int) -> int:
        return 4 + blocks_done

    def pair_after_rate(self, d: int) -> int:
        return 4 + self.n_dims + d

    def pair_next(self, blocks_done: int) -> int:
        # defined for 1 <= blocks_done <= n_dims - 1
        return 4 + 2 * self.n_dims + (blocks_done - 1)

    @property
    def _content_base(self) -> int:
        return 4 + 3 * self.n_dims - 1

    def ev_open(self, d: int, b: int) -> int:
        return self._content_base + d * self.n_buckets + b

    def think_run(self, d: int, b: int, pos: int) -> int:
        # pos is 1 or 2: evidence runs are position-coded so a run can hold at
        # most two further EVID tokens and greedy decoding always terminates
        return self._content_base + pos * self.n_dims * self.n_buckets + d * self.n_buckets + b

    def answer(self, d: int, b: int) -> int:
        return self._content_base + 3 * self.n_dims * self.n_buckets + d * self.n_buckets + b

    def pair_run(self, d: int, b: int, pos: int) -> int:
        return self._content_base + (3 + pos) * self.n_dims * self.n_buckets + d * self.n_buckets + b

    @property
    def first_verdict(self) -> int:
        # the first response of a pair rates its video before the second one
        # exists, so its (format-required) verdict gets one shared slot and
        # never trains the pair-comparison grid
        return self._content_base + 6 * self.n_dims * self.n_buckets

    @property
    def verdict_base(self) -> int:
        return self.first_verdict + 1

    @property
    def verdict_grid(self) -> int:
        return 2 * self.verdict_span + 1

    def verdict(self, c: int) -> int:
        return self.verdict_base + c

    @property
    def n_states(self) -> int:
        return self.verdict_base + self.verdict_grid**2

    # --- content encoding ----------------------------------------------------

    def feature_bucket(self, feature: float) -> int:
        return min(int(feature * self.n_buckets), self.n_buckets - 1)

    def buckets(self, features) -> np.ndarray:
        return np.array([self.feature_bucket(float(f)) for f in features], dtype=np.int32)

    @property
    def mid_level(self) -> int:
        return (self.rating_levels + 1) // 2

    @property
    def n_motion(self) -> int:
        return sum(self.motion_flags)

    @property
    def n_static(self) -> int:
        return self.n_dims - self.n_motion

    @property
    def neutral_motion_sum(self) -> int:
        return self.mid_level * self.n_motion

    @property
    def neutral_static_sum(self) -> int:
        return self.mid_level * self.n_static

    def verdict_context(self, dm: int, ds: int) -> int:
        """Context cell for clipped judgment-sum differences (first video minus
        second; positive favors the first video)."""
        span = self.verdict_span
        cm = min(max(dm, -span), span) + span
        cs = min(max(ds, -span), span) + span
        return cm * self.verdict_grid + cs

    # --- kernel helper arrays -------------------------------------------------

    def state_ev_dim(self) -> np.ndarray:
        """Dimension index for first-evidence states, -1 elsewhere."""
        arr = np.full(self.n_states, -1, dtype=np.int32)
        for d in range(self.n_dims):
            for b in range(self.n_buckets):
                arr[self.ev_open(d, b)] = d
        return arr

    def token_evid_value(self) -> np.ndarray:
        """Evidence level of EVID tokens, 0 elsewhere."""
        arr = np.zeros(self.vocab.size, dtype=np.int32)
        for k in range(1, self.rating_levels + 1):
            arr[self.vocab.evid(k)] = k
        return arr

    def dim_motion(self) -> np.ndarray:
        return np.array([1 if m else 0 for m in self.motion_flags], dtype=np.int32)


# --- transition tables ---------------------------------------------------------


def build_rating_transitions(spec: PolicySpec) -> np.ndarray:
    """Static transition table for the rating task (rows for foreign states
    stay all-DEAD; they are unreachable here)."""
    vocab = spec.vocab
    trans = np.full((spec.n_states, vocab.size), DEAD, dtype=np.int32)

    trans[spec.rating_begin, vocab.open_think] = THINK_ENTRY
    for d in range(spec.n_dims):
        for b in range(spec.n_buckets):
            ev = spec.ev_open(d, b)
            run1, run2 = spec.think_run(d, b, 1), spec.think_run(d, b, 2)
            for k in range(1, spec.rating_levels + 1):
                trans[ev, vocab.evid(k)] = run1
                trans[run1, vocab.evid(k)] = run2
            for j in range(spec.n_fillers):
                trans[ev, vocab.filler(j)] = ev
                trans[run1, vocab.filler(j)] = run1
                trans[run2, vocab.filler(j)] = run2
            trans[run1, vocab.close_think] = spec.rating_pre_answer
            trans[run2, vocab.close_think] = spec.rating_pre_answer
            ans = spec.answer(d, b)
            for k in range(1, spec.rating_levels + 1):
                trans[ans, vocab.rate(k)] = spec.rating_pre_close
    trans[spec.rating_pre_answer, vocab.open_answer] = ANSWER_ENTRY
    trans[spec.rating_pre_close, vocab.close_answer] = STOP
    return trans


def build_pair_transitions(spec: PolicySpec) -> np.ndarray:
    """Static transition table for the comparison task."""
    vocab = spec.vocab
    trans = np.full((spec.n_states, vocab.size), DEAD, dtype=np.int32)

    trans[spec.pair_begin, vocab.open_dim] = spec.pair_open(0)
    for i in range(spec.n_dims):
        for d in range(spec.n_dims):
            trans[spec.pair_open(i), vocab.dim_mark(d)] = DIM_JUMP
    for d in range(spec.n_dims):
        for b in range(spec.n_buckets):
            ev = spec.ev_open(d, b)
            run1, run2 = spec.pair_run(d, b, 1), spec.pair_run(d, b, 2)
            for k in range(1, spec.rating_levels + 1):
                trans[ev, vocab.evid(k)] = run1
                trans[run1, vocab.evid(k)] = run2
                trans[run1, vocab.rate(k)] = spec.pair_after_rate(d)
                trans[run2, vocab.rate(k)] = spec.pair_after_rate(d)
        trans[spec.pair_after_rate(d), vocab.close_dim] = BLOCK_CLOSE
    for i in range(1, spec.n_dims):
        nxt = spec.pair_next(i)
        trans[nxt, vocab.open_dim] = spec.pair_open(i)
        for v in Verdict:
            trans[nxt, vocab.prefer(v)] = STOP
    for v in Verdict:
        trans[spec.first_verdict, vocab.prefer(v)] = STOP
    for c in range(spec.verdict_grid**2):
        for v in Verdict:
            trans[spec.verdict(c), vocab.prefer(v)] = STOP
    return trans


# --- initial logits ------------------------------------------------------------


def primed_logits(
    spec: PolicySpec,
    prime: float = 10.0,
    tiebreak: float = 0.1,
    continue_bonus: float = 4.5,
    dim_order_bonus: float = 4.5,
    tie_deprime: float = 1.0,
) -> np.ndarray:
    """Format-competent, content-agnostic initial logit table.

    Stands in for the pretrained backbone a rule-reward pipeline starts from:
    grammar-legal tokens at each state get a logit boost (the diverse-content
    choices equally, so answers start at chance); run-closing tokens get a
    tiny tiebreak so untrained greedy decoding terminates; the block-continue
    move and the canonical next dimension mark get real bonuses so sampled
    comparison responses mostly walk all dimensions in prompt order instead
    of stopping after one block or dying on a duplicate mark.  Verdict slots
    start with TIE slightly discouraged, the way an instruction-following
    judge rarely volunteers "tie".  Fillers stay unprimed.
    """
    vocab = spec.vocab
    table = np.zeros((spec.n_states, vocab.size))
    table[spec.rating_begin, vocab.open_think] = prime
    table[spec.rating_pre_answer, vocab.open_answer] = prime
    table[spec.rating_pre_close, vocab.close_answer] = prime
    table[spec.pair_begin, vocab.open_dim] = prime
    for d in range(spec.n_dims):
        for b in range(spec.n_buckets):
            for k in range(1, spec.rating_levels + 1):
                table[spec.ev_open(d, b), vocab.evid(k)] = prime
                table[spec.think_run(d, b, 1), vocab.evid(k)] = prime
                table[spec.answer(d, b), vocab.rate(k)] = prime
                table[spec.pair_run(d, b, 1), vocab.evid(k)] = prime
                table[spec.pair_run(d, b, 1), vocab.rate(k)] = prime + tiebreak
                table[spec.pair_run(d, b, 2), vocab.rate(k)] = prime
            table[spec.think_run(d, b, 1), vocab.close_think] = prime + tiebreak
            table[spec.think_run(d, b, 2), vocab.close_think] = prime
        table[spec.pair_after_rate(d), vocab.close_dim] = prime
    for i in range(spec.n_dims):
        row = spec.pair_open(i)
        for d in range(spec.n_dims):
            table[row, vocab.dim_mark(d)] = prime
        table[row, vocab.dim_mark(i)] = prime + dim_order_bonus
    for i in range(1, spec.n_dims):
        nxt = spec.pair_next(i)
        table[nxt, vocab.open_dim] = prime + continue_bonus
        for v in Verdict:
            table[nxt, vocab.prefer(v)] = prime
        table[nxt, vocab.prefer(Verdict.TIE)] = prime - tie_deprime
    for v in Verdict:
        table[spec.first_verdict, vocab.prefer(v)] = prime
    table[spec.first_verdict, vocab.prefer(Verdict.TIE)] = prime - tie_deprime
    for c in range(spec.verdict_grid**2):
        for v in Verdict:
            table[spec.verdict(c), vocab.prefer(v)] = prime
        table[spec.verdict(c), vocab.prefer(Verdict.TIE)] = prime - tie_deprime
    return table


def build_meta(
    spec: PolicySpec,
    *,
    start_state: int,
    greedy: bool = False,
    think_entry: int = -1,
    answer_entry: int = -1,
    coef_self: int = 1,
    base_m: int = 0,
    base_s: int = 0,
    max_len: int | None = None,
    verdict_override: int = -1,
) -> np.ndarray:
    meta = np.zeros(META_SIZE, dtype=np.int64)
    meta[META_EV_OPEN_BASE] = spec.ev_open(0, 0)
    meta[META_N_BUCKETS] = spec.n_buckets
    meta[META_PAIR_NEXT_BASE] = spec.pair_next(1)
    meta[META_VERDICT_BASE] = spec.verdict_base
    meta[META_N_DIMS] = spec.n_dims
    meta[META_SPAN] = spec.verdict_span
    meta[META_MID] = spec.mid_level
    meta[META_DIM_TOKEN_BASE] = spec.vocab.dim_mark(0)
    meta[META_COEF_SELF] = coef_self
    meta[META_BASE_M] = base_m
    meta[META_BASE_S] = base_s
    meta[META_MAX_LEN] = spec.max_len if max_len is None else max_len
    meta[META_THINK_ENTRY] = think_entry
    meta[META_ANSWER_ENTRY] = answer_entry
    meta[META_START_STATE] = start_state
    meta[META_GREEDY] = 1 if greedy else 0
    meta[META_VERDICT_OVERRIDE] = verdict_override
    return meta
