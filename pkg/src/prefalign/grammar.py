"""Parsers and format scores for the two response shapes.

A *rating* response assesses one dimension of one video:

    <think> (EVID_k | FILLER_j)+ </think> <answer> RATE_k </answer>

with at least one EVID token inside the think span and nothing outside the
two spans.  A *comparison* response assesses one video of a pair across
dimensions and ends with an overall verdict:

    ( <dim> DIM_d EVID_k+ RATE_k </dim> ){1..D} PREFER_x

with distinct dimension marks across blocks and no fillers.  Both grammars
are strict: any extra or misplaced token rejects.

The format scores are total functions (malformed input scores 0, never
raises).  ``scaffold_score`` checks only the block/verdict skeleton of a
comparison response; ``block_score`` gives 1/D credit per internally
well-formed block, so the two degrade independently.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import FormatError
from .tokens import TokenKind, Verdict, Vocab


@dataclass(frozen=True)
class ParsedRating:
    """Evidence levels (in emission order) and the answered level."""

    evidence: tuple[int, ...]
    answer: int


@dataclass(frozen=True)
class Block:
    dim: int
    evidence: tuple[int, ...]
    rating: int


@dataclass(frozen=True)
class ParsedComparison:
    blocks: tuple[Block, ...]
    verdict: Verdict


# --- rating responses ------------------------------------------------------


def parse_rating(tokens, vocab: Vocab) -> ParsedRating:
    """Parse a rating response, raising FormatError on any deviation."""
    n = len(tokens)
    if n == 0:
        raise FormatError(0, "empty sequence")
    if tokens[0] != vocab.open_think:
        raise FormatError(0, "expected <think>")
    evidence = []
    i = 1
    while i < n and tokens[i] != vocab.close_think:
        kind = vocab.kind(tokens[i])
        if kind is TokenKind.EVID:
            evidence.append(vocab.value(tokens[i]))
        elif kind is not TokenKind.FILLER:
            raise FormatError(i, "only EVID/FILLER allowed inside <think>")
        i += 1
    if i == n:
        raise FormatError(n, "missing </think>")
    if not evidence:
        raise FormatError(i, "no evidence inside <think>")
    i += 1
    if i == n or tokens[i] != vocab.open_answer:
        raise FormatError(i, "expected <answer>")
    i += 1
    if i == n or vocab.kind(tokens[i]) is not TokenKind.RATE:
        raise FormatError(i, "expected RATE")
    answer = vocab.value(tokens[i])
    i += 1
    if i == n or tokens[i] != vocab.close_answer:
        raise FormatError(i, "expected </answer>")
    i += 1
    if i != n:
        raise FormatError(i, "trailing tokens after </answer>")
    return ParsedRating(evidence=tuple(evidence), answer=answer)


def rating_format_score(tokens, vocab: Vocab) -> int:
    """1 iff the sequence parses as a rating response."""
    try:
        parse_rating(tokens, vocab)
    except FormatError:
        return 0
    return 1


# --- comparison responses ---------------------------------------------------


def _parse_block(tokens, i: int, vocab: Vocab) -> tuple[Block, int]:
    """Parse one strict block starting at the <dim> token at index i."""
    n = len(tokens)
    if tokens[i] != vocab.open_dim:
        raise FormatError(i, "expected <dim>")
    i += 1
    if i == n or vocab.kind(tokens[i]) is not TokenKind.DIM_MARK:
        raise FormatError(i, "expected DIM mark")
    dim = vocab.value(tokens[i])
    i += 1
    evidence = []
    while i < n and vocab.kind(tokens[i]) is TokenKind.EVID:
        evidence.append(vocab.value(tokens[i]))
        i += 1
    if not evidence:
        raise FormatError(i, "block has no evidence")
    if i == n or vocab.kind(tokens[i]) is not TokenKind.RATE:
        raise FormatError(i, "expected RATE to close the evidence run")
    rating = vocab.value(tokens[i])
    i += 1
    if i == n or tokens[i] != vocab.close_dim:
        raise FormatError(i, "expected </dim>")
    return Block(dim=dim, evidence=tuple(evidence), rating=rating), i + 1


def parse_comparison(tokens, vocab: Vocab) -> ParsedComparison:
    """Parse a comparison response, raising FormatError on any deviation."""
    n = len(tokens)
    if n == 0:
        raise FormatError(0, "empty sequence")
    blocks = []
    seen = set()
    i = 0
    while i < n and tokens[i] == vocab.open_dim:
        block, i = _parse_block(tokens, i, vocab)
        if block.dim in seen:
            raise FormatError(i - 1, f"duplicate block for dimension {block.dim}")
        seen.add(block.dim)
        if len(blocks) == vocab.n_dims:
            raise FormatError(i - 1, "more blocks than dimensions")
        blocks.append(block)
    if not blocks:
        raise FormatError(0, "expected <dim>")
    if i == n or vocab.kind(tokens[i]) is not TokenKind.PREFER:
        raise FormatError(i, "expected PREFER verdict")
    verdict = vocab.value(tokens[i])
    i += 1
    if i != n:
        raise FormatError(i, "trailing tokens after verdict")
    return ParsedComparison(blocks=tuple(blocks), verdict=verdict)


def scaffold_score(tokens, vocab: Vocab) -> int:
    """1 iff the block/verdict skeleton is intact.

    The skeleton requires: one to D segments, each ``<dim> DIM_d ... </dim>``
    with distinct marks and no nested ``<dim>``/stray verdicts inside, no
    tokens between segments, and a single final PREFER.  Block interiors are
    otherwise unconstrained (their form is ``block_score``'s concern).
    """
    n = len(tokens)
    seen = set()
    i = 0
    while i < n and tokens[i] == vocab.open_dim:
        i += 1
        if i == n or vocab.kind(tokens[i]) is not TokenKind.DIM_MARK:
            return 0
        dim = vocab.value(tokens[i])
        if dim in seen or len(seen) == vocab.n_dims:
            return 0
        seen.add(dim)
        i += 1
        while i < n and tokens[i] != vocab.close_dim:
            if tokens[i] == vocab.open_dim or vocab.kind(tokens[i]) is TokenKind.PREFER:
                return 0
            i += 1
        if i == n:
            return 0
        i += 1
    if not seen:
        return 0
    if i == n or vocab.kind(tokens[i]) is not TokenKind.PREFER:
        return 0
    return 1 if i + 1 == n else 0


def block_score(tokens, vocab: Vocab, n_dims: int | None = None) -> float:
    """Fraction of dimensions whose block exists and is internally well-formed.

    Blocks are located by scanning for ``<dim> ... </dim>`` segments anywhere
    in the sequence (a nested ``<dim>`` abandons the outer segment); only the
    first segment per dimension counts.  Always a multiple of 1/D.
    """
    if n_dims is None:
        n_dims = vocab.n_dims
    n = len(tokens)
    good: set[int] = set()
    i = 0
    while i < n:
        if tokens[i] != vocab.open_dim:
            i += 1
            continue
        start = i
        i += 1
        while i < n and tokens[i] != vocab.close_dim and tokens[i] != vocab.open_dim:
            i += 1
        if i == n:
            break
        if tokens[i] == vocab.open_dim:
            continue  # nested open: abandon this segment, rescan from the inner one
        try:
            block, _ = _parse_block(tokens[start : i + 1], 0, vocab)
        except FormatError:
            block = None
        if block is not None and block.dim not in good:
            good.add(block.dim)
        i += 1
    return len(good) / n_dims


# --- rendering ---------------------------------------------------------------


def render_rating(parsed: ParsedRating, vocab: Vocab) -> list[int]:
    """Canonical token sequence for a parsed rating (fillers are dropped)."""
    out = [vocab.open_think]
    out += [vocab.evid(k) for k in parsed.evidence]
    out += [vocab.close_think, vocab.open_answer, vocab.rate(parsed.answer), vocab.close_answer]
    return out


def render_comparison(parsed: ParsedComparison, vocab: Vocab) -> list[int]:
    out = []
    for block in parsed.blocks:
        out.append(vocab.open_dim)
        out.append(vocab.dim_mark(block.dim))
        out += [vocab.evid(k) for k in block.evidence]
        out.append(vocab.rate(block.rating))
        out.append(vocab.close_dim)
    out.append(vocab.prefer(parsed.verdict))
    return out
