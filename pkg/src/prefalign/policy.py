"""Tabular response policy: sampling, greedy decoding, and checkpoints.

The policy is a dense logit table over (state, token) shared by the rating
and comparison tasks (see :mod:`prefalign.states`).  Sampling draws a fixed
block of uniforms per response from the caller's generator, so trajectories
are a pure function of (table, instance, rng state) on every backend.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import FormatError, InputError
from .grammar import parse_rating
from .states import PolicySpec, build_meta, build_pair_transitions, build_rating_transitions
from .tokens import Verdict
from .world import SyntheticVideo

CHECKPOINT_VERSION = 1


@dataclass
class Episode:
    """One sampled response (or response pair, concatenated) plus everything
    the objective needs to revisit it."""

    tokens: np.ndarray
    states: np.ndarray
    old_logps: np.ndarray
    reward: float = 0.0
    ended: int = 1  # 0 = grammar death, 1 = natural stop, 2 = length cap
    blocks: int = 0  # completed comparison blocks (kernel-counted)

    def __post_init__(self):
        if not (len(self.tokens) == len(self.states) == len(self.old_logps)):
            raise InputError("episode arrays must have equal length")


@dataclass
class RolloutGroup:
    """G sampled responses for one input, with their rewards."""

    episodes: list[Episode]

    def __post_init__(self):
        if len(self.episodes) < 2:
            raise InputError("a rollout group needs at least 2 responses")

    @property
    def rewards(self) -> np.ndarray:
        return np.array([ep.reward for ep in self.episodes])


@dataclass
class TablePolicy:
    spec: PolicySpec
    logits: np.ndarray

    def copy(self) -> "TablePolicy":
        return TablePolicy(self.spec, self.logits.copy())


class Runtime:
    """Precomputed static tables for one PolicySpec, plus the kernel backend."""

    def __init__(self, spec: PolicySpec, backend=None):
        self.spec = spec
        self.backend = backend or kernels
        self.trans_rating = build_rating_transitions(spec)
        self.trans_pair = build_pair_transitions(spec)
        self.state_ev_dim = spec.state_ev_dim()
        self.token_evid_value = spec.token_evid_value()
        self.dim_motion = spec.dim_motion()
        self._zero_buckets = np.zeros(spec.n_dims, dtype=np.int32)


def _uniforms(rng, max_len: int, greedy: bool) -> np.ndarray:
    # always draw the full block so rng consumption is independent of length
    if greedy:
        return np.zeros(max_len)
    return rng.random(max_len)


def sample_rating_response(rt: Runtime, logits: np.ndarray, dim: int, bucket: int, rng=None, *, greedy: bool = False) -> Episode:
    """Sample one rating response for the (dimension, feature-bucket) instance."""
    spec = rt.spec
    meta = build_meta(
        spec,
        start_state=spec.rating_begin,
        greedy=greedy,
        think_entry=spec.ev_open(dim, bucket),
        answer_entry=spec.answer(dim, bucket),
    )
    tokens, states, logps, _, _, ended, _ = rt.backend.sample_episode(
        logits,
        rt.trans_rating,
        meta,
        _uniforms(rng, spec.max_len, greedy),
        rt._zero_buckets,
        rt.state_ev_dim,
        rt.token_evid_value,
        rt.dim_motion,
    )
    return Episode(tokens=tokens, states=states, old_logps=logps, ended=ended)


def sample_pair_responses(
    rt: Runtime,
    logits: np.ndarray,
    buckets_a: np.ndarray,
    buckets_b: np.ndarray,
    rng=None,
    *,
    greedy: bool = False,
) -> tuple[Episode, Episode]:
    """Sample the two comparison responses for a video pair.

    The first response judges video A against a neutral baseline; the second
    judges video B with the first response's emitted judgments as context, so
    its final-verdict slot sees the pair comparison (positive context cells
    mean "first video ahead").
    """
    spec = rt.spec
    meta_a = build_meta(
        spec,
        start_state=spec.pair_begin,
        greedy=greedy,
        verdict_override=spec.first_verdict,
    )
    tok_a, st_a, lp_a, jm_a, js_a, end_a, blocks_a = rt.backend.sample_episode(
        logits, rt.trans_pair, meta_a, _uniforms(rng, spec.max_len, greedy), buckets_a, rt.state_ev_dim, rt.token_evid_value, rt.dim_motion
    )
    meta_b = build_meta(
        spec,
        start_state=spec.pair_begin,
        greedy=greedy,
        coef_self=-1,
        base_m=jm_a,
        base_s=js_a,
    )
    tok_b, st_b, lp_b, _, _, end_b, blocks_b = rt.backend.sample_episode(
        logits, rt.trans_pair, meta_b, _uniforms(rng, spec.max_len, greedy), buckets_b, rt.state_ev_dim, rt.token_evid_value, rt.dim_motion
    )
    return (
        Episode(tokens=tok_a, states=st_a, old_logps=lp_a, ended=end_a, blocks=blocks_a),
        Episode(tokens=tok_b, states=st_b, old_logps=lp_b, ended=end_b, blocks=blocks_b),
    )


def sample_rating_group(rt: Runtime, logits: np.ndarray, dim: int, bucket: int, group_size: int, rng) -> RolloutGroup:
    """Sample a rollout group of i.i.d. rating responses for one instance."""
    return RolloutGroup([sample_rating_response(rt, logits, dim, bucket, rng) for _ in range(group_size)])


def concat_episodes(ep_a: Episode, ep_b: Episode) -> Episode:
    return Episode(
        tokens=np.concatenate([ep_a.tokens, ep_b.tokens]),
        states=np.concatenate([ep_a.states, ep_b.states]),
        old_logps=np.concatenate([ep_a.old_logps, ep_b.old_logps]),
    )


# --- greedy predictions -----------------------------------------------------------


def predict_rating(rt: Runtime, logits: np.ndarray, video: SyntheticVideo, dim: int):
    """Greedy rating prediction for one (video, dimension); None when the
    decoded response does not parse."""
    bucket = rt.spec.feature_bucket(float(video.features[dim]))
    ep = sample_rating_response(rt, logits, dim, bucket, greedy=True)
    try:
        return parse_rating(ep.tokens.tolist(), rt.spec.vocab).answer
    except FormatError:
        return None


def predict_preference(rt: Runtime, logits: np.ndarray, video_a: SyntheticVideo, video_b: SyntheticVideo) -> Verdict:
    """Greedy pairwise prediction; a missing verdict counts as TIE."""
    from .rewards import extract_verdict

    spec = rt.spec
    ep_a, ep_b = sample_pair_responses(
        rt, logits, spec.buckets(video_a.features), spec.buckets(video_b.features), greedy=True
    )
    verdict = extract_verdict(ep_a.tokens.tolist(), ep_b.tokens.tolist(), spec.vocab)
    return verdict if verdict is not None else Verdict.TIE


# --- checkpoints --------------------------------------------------------------------


def save_checkpoint(path, policy: TablePolicy, *, optimizer_state=None, rng_state=None, step: int = 0, config_hash: str = ""):
    """Versioned policy checkpoint: logit table, optimizer moments, rng state."""
    spec = policy.spec
    meta = {
        "version": CHECKPOINT_VERSION,
        "step": step,
        "config_hash": config_hash,
        "spec": {
            "n_dims": spec.n_dims,
            "rating_levels": spec.rating_levels,
            "n_buckets": spec.n_buckets,
            "n_fillers": spec.n_fillers,
            "max_len": spec.max_len,
            "verdict_span": spec.verdict_span,
            "motion_flags": list(spec.motion_flags),
        },
        "rng_state": rng_state,
    }
    arrays = {"logits": policy.logits, "meta_json": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)}
    if optimizer_state is not None:
        arrays["adam_m"] = optimizer_state.m
        arrays["adam_v"] = optimizer_state.v
        arrays["adam_step"] = np.array([optimizer_state.step])
    np.savez(path, **arrays)


def load_checkpoint(path):
    """Returns (TablePolicy, optimizer_state or None, meta dict)."""
    from .grpo import AdamState

    with np.load(path) as data:
        meta = json.loads(bytes(data["meta_json"]).decode())
        if meta.get("version") != CHECKPOINT_VERSION:
            raise InputError(f"unsupported checkpoint version in {path}")
        s = meta["spec"]
        spec = PolicySpec(
            n_dims=s["n_dims"],
            rating_levels=s["rating_levels"],
            n_buckets=s["n_buckets"],
            n_fillers=s["n_fillers"],
            max_len=s["max_len"],
            verdict_span=s["verdict_span"],
            motion_flags=tuple(s["motion_flags"]),
        )
        policy = TablePolicy(spec, data["logits"].copy())
        opt = None
        if "adam_m" in data:
            opt = AdamState(m=data["adam_m"].copy(), v=data["adam_v"].copy(), step=int(data["adam_step"][0]))
    return policy, opt, meta
