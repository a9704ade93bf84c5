"""Token vocabulary for the structured response language.

Responses are short sequences over a small closed vocabulary: scaffold tags
(``<think>``, ``<answer>``, ``<dim>`` and their closers), dimension marks,
evidence and rating tokens carrying an ordinal value, pairwise verdict
tokens, and a handful of inert filler tokens.  Sequences are plain lists of
integer token ids; a :class:`Vocab` instance interprets them.

The stable text encoding (used by fixtures and logs) is whitespace-separated
token names, e.g. ``<think> EVID_3 </think> <answer> RATE_3 </answer>``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import InputError

#: Default cap on response length, in tokens.
DEFAULT_MAX_LEN = 32


class Verdict(str, enum.Enum):
    """Pairwise preference verdict."""

    A = "A"
    B = "B"
    TIE = "TIE"

    def swapped(self) -> "Verdict":
        if self is Verdict.A:
            return Verdict.B
        if self is Verdict.B:
            return Verdict.A
        return Verdict.TIE


class TokenKind(enum.Enum):
    OPEN_THINK = "open_think"
    CLOSE_THINK = "close_think"
    OPEN_ANSWER = "open_answer"
    CLOSE_ANSWER = "close_answer"
    OPEN_DIM = "open_dim"
    CLOSE_DIM = "close_dim"
    DIM_MARK = "dim_mark"
    EVID = "evid"
    RATE = "rate"
    PREFER = "prefer"
    FILLER = "filler"


_VERDICT_ORDER = (Verdict.A, Verdict.B, Verdict.TIE)


@dataclass(frozen=True)
class Vocab:
    """Closed token vocabulary for a world with ``n_dims`` dimensions and
    ``rating_levels`` ordinal levels."""

    n_dims: int = 5
    rating_levels: int = 5
    n_fillers: int = 4
    _names: tuple[str, ...] = field(init=False, repr=False)
    _ids: dict = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_dims < 1 or self.rating_levels < 2 or self.n_fillers < 1:
            raise InputError("vocab sizes out of range")
        names = ["<think>", "</think>", "<answer>", "</answer>", "<dim>", "</dim>"]
        names += [f"DIM_{d}" for d in range(self.n_dims)]
        names += [f"EVID_{k}" for k in range(1, self.rating_levels + 1)]
        names += [f"RATE_{k}" for k in range(1, self.rating_levels + 1)]
        names += ["PREFER_A", "PREFER_B", "PREFER_TIE"]
        names += [f"FILLER_{j}" for j in range(self.n_fillers)]
        object.__setattr__(self, "_names", tuple(names))
        object.__setattr__(self, "_ids", {n: i for i, n in enumerate(names)})

    # --- id layout -------------------------------------------------------

    @property
    def size(self) -> int:
        return len(self._names)

    @property
    def open_think(self) -> int:
        return 0

    @property
    def close_think(self) -> int:
        return 1

    @property
    def open_answer(self) -> int:
        return 2

    @property
    def close_answer(self) -> int:
        return 3

    @property
    def open_dim(self) -> int:
        return 4

    @property
    def close_dim(self) -> int:
        return 5

    def dim_mark(self, d: int) -> int:
        if not 0 <= d < self.n_dims:
            raise InputError(f"dimension index {d} out of range")
        return 6 + d

    def evid(self, k: int) -> int:
        self._check_level(k)
        return 6 + self.n_dims + (k - 1)

    def rate(self, k: int) -> int:
        self._check_level(k)
        return 6 + self.n_dims + self.rating_levels + (k - 1)

    def prefer(self, v: Verdict) -> int:
        return 6 + self.n_dims + 2 * self.rating_levels + _VERDICT_ORDER.index(v)

    def filler(self, j: int) -> int:
        if not 0 <= j < self.n_fillers:
            raise InputError(f"filler index {j} out of range")
        return 6 + self.n_dims + 2 * self.rating_levels + 3 + j

    def _check_level(self, k: int):
        if not 1 <= k <= self.rating_levels:
            raise InputError(f"rating level {k} out of range")

    # --- interpretation --------------------------------------------------

    def kind(self, tid: int) -> TokenKind:
        if tid == 0:
            return TokenKind.OPEN_THINK
        if tid == 1:
            return TokenKind.CLOSE_THINK
        if tid == 2:
            return TokenKind.OPEN_ANSWER
        if tid == 3:
            return TokenKind.CLOSE_ANSWER
        if tid == 4:
            return TokenKind.OPEN_DIM
        if tid == 5:
            return TokenKind.CLOSE_DIM
        i = tid - 6
        if i < self.n_dims:
            return TokenKind.DIM_MARK
        i -= self.n_dims
        if i < self.rating_levels:
            return TokenKind.EVID
        i -= self.rating_levels
        if i < self.rating_levels:
            return TokenKind.RATE
        i -= self.rating_levels
        if i < 3:
            return TokenKind.PREFER
        i -= 3
        if i < self.n_fillers:
            return TokenKind.FILLER
        raise InputError(f"token id {tid} out of range")

    def value(self, tid: int):
        """Payload of a content token: level for EVID/RATE, dim index for
        DIM marks, Verdict for PREFER, filler index for FILLER, else None."""
        kind = self.kind(tid)
        if kind is TokenKind.DIM_MARK:
            return tid - 6
        if kind is TokenKind.EVID:
            return tid - 6 - self.n_dims + 1
        if kind is TokenKind.RATE:
            return tid - 6 - self.n_dims - self.rating_levels + 1
        if kind is TokenKind.PREFER:
            return _VERDICT_ORDER[tid - 6 - self.n_dims - 2 * self.rating_levels]
        if kind is TokenKind.FILLER:
            return tid - 6 - self.n_dims - 2 * self.rating_levels - 3
        return None

    def name(self, tid: int) -> str:
        return self._names[tid]

    # --- text encoding ---------------------------------------------------

    def to_text(self, tokens) -> str:
        return " ".join(self._names[t] for t in tokens)

    def from_text(self, text: str) -> list[int]:
        out = []
        for word in text.split():
            tid = self._ids.get(word)
            if tid is None:
                raise InputError(f"unknown token name {word!r}")
            out.append(tid)
        return out
