"""GRPO training loops for the two reward-model stages.

Stage 1 trains single-dimension rating: each step samples a small batch of
(video, dimension, label) instances, rolls out a group of responses per
instance, scores them with the format/accuracy/consistency rubric, and takes
one (or more) clipped-surrogate steps against the sampling-time snapshot.
Stage 2 trains pairwise comparison the same way with the scaffold/block/
verdict rubric; warm starts simply reuse the stage-1 table, whose shared
first-evidence states carry the per-dimension judgment skill over.

Everything is stateless per step: batch composition and rollout noise are
derived from (seed, step), so a run resumed from a checkpoint reproduces the
original step-for-step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .grpo import AdamState, GRPOConfig, grpo_step
from .policy import (
    Episode,
    RolloutGroup,
    Runtime,
    TablePolicy,
    concat_episodes,
    predict_preference,
    predict_rating,
    sample_pair_responses,
    sample_rating_response,
)
from .rewards import comparison_score, extract_rating, extract_verdict, rating_reward
from .states import primed_logits
from .tokens import Verdict
from .world import DimInstance, WorldConfig, oracle_preference

# stream tags for per-step seeded rng derivation
_TAG_BATCH = 3
_TAG_ROLLOUT = 4
_TAG_SPLIT = 5


@dataclass
class PairInstance:
    video_a: object
    video_b: object
    label: Verdict
    buckets_a: np.ndarray
    buckets_b: np.ndarray


@dataclass
class StageResult:
    logits: np.ndarray
    opt_state: AdamState
    steps: list[dict] = field(default_factory=list)
    evals: list[dict] = field(default_factory=list)

    def final_eval(self, key: str):
        return self.evals[-1][key] if self.evals else None

    def first_step_reaching(self, key: str, target: float):
        """Step index of the first evaluation at or above target, else None."""
        for rec in self.evals:
            if rec[key] >= target:
                return rec["step"]
        return None


def split_by_key(items, key_fn, heldout_fraction: float, seed: int):
    """Deterministic train/held-out split grouped by key (no key straddles)."""
    keys = sorted({key_fn(it) for it in items})
    rng = np.random.default_rng(np.random.SeedSequence([seed, _TAG_SPLIT]))
    rng.shuffle(keys)
    n_held = max(1, int(len(keys) * heldout_fraction))
    held = set(keys[:n_held])
    train = [it for it in items if key_fn(it) not in held]
    heldout = [it for it in items if key_fn(it) in held]
    return train, heldout


def build_pair_instances(corpus, world: WorldConfig, spec) -> list[PairInstance]:
    """All same-prompt video pairs with oracle verdicts and policy buckets."""
    by_prompt: dict[str, list] = {}
    for v in corpus:
        by_prompt.setdefault(v.prompt_id, []).append(v)
    pairs = []
    for prompt_id in sorted(by_prompt):
        vids = by_prompt[prompt_id]
        for i in range(len(vids)):
            for j in range(i + 1, len(vids)):
                a, b = vids[i], vids[j]
                pairs.append(
                    PairInstance(
                        video_a=a,
                        video_b=b,
                        label=oracle_preference(a, b, world),
                        buckets_a=spec.buckets(a.features),
                        buckets_b=spec.buckets(b.features),
                    )
                )
    return pairs


def _step_rng(seed: int, tag: int, step: int):
    return np.random.default_rng(np.random.SeedSequence([seed, tag, step]))


def _batch_indices(seed: int, step: int, n: int, batch_size: int) -> np.ndarray:
    return _step_rng(seed, _TAG_BATCH, step).integers(0, n, size=batch_size)


# --- stage 1: single-dimension rating ---------------------------------------------


def evaluate_rating(rt: Runtime, logits: np.ndarray, instances) -> float:
    """Greedy held-out accuracy; unparseable responses count as wrong."""
    if not instances:
        raise InputError("no evaluation instances")
    hits = 0
    for inst in instances:
        pred = predict_rating(rt, logits, inst.video, inst.dim)
        hits += int(pred == inst.label)
    return hits / len(instances)


def train_rating_stage(
    rt: Runtime,
    train_instances: list[DimInstance],
    heldout_instances: list[DimInstance],
    config: GRPOConfig,
    *,
    seed: int,
    logits: np.ndarray | None = None,
    opt_state: AdamState | None = None,
    start_step: int = 0,
    reward_mode: str = "full",
) -> StageResult:
    """Run (or resume) stage-1 GRPO training.

    ``reward_mode`` is "full" for the format+accuracy+consistency rubric or
    "accuracy_only" for the no-reasoning ablation (the answer is whatever RATE
    token appears last; the grammar is not enforced or rewarded).
    """
    if reward_mode not in ("full", "accuracy_only"):
        raise InputError(f"unknown reward_mode {reward_mode!r}")
    if not train_instances:
        raise InputError("no training instances")
    spec = rt.spec
    if logits is None:
        logits = primed_logits(spec)
    logits = logits.copy()
    if opt_state is None:
        opt_state = AdamState.zeros_like(logits)
    result = StageResult(logits=logits, opt_state=opt_state)

    def run_eval(step):
        if heldout_instances:
            result.evals.append({"step": step, "accuracy": evaluate_rating(rt, logits, heldout_instances)})

    if start_step == 0:
        run_eval(0)
    for step in range(start_step, config.steps):
        idx = _batch_indices(seed, step, len(train_instances), config.batch_size)
        rng = _step_rng(seed, _TAG_ROLLOUT, step)
        groups = []
        for i in idx:
            inst = train_instances[int(i)]
            bucket = spec.feature_bucket(float(inst.video.features[inst.dim]))
            episodes = []
            for _ in range(config.group_size):
                ep = sample_rating_response(rt, logits, inst.dim, bucket, rng)
                tokens = ep.tokens.tolist()
                if reward_mode == "full":
                    ep.reward = float(rating_reward(tokens, inst.label, spec.vocab).total)
                else:
                    ep.reward = float(extract_rating(tokens, spec.vocab) == inst.label)
                episodes.append(ep)
            groups.append(RolloutGroup(episodes))
        ref = logits.copy()
        stats = {}
        for _ in range(config.epochs):
            logits, stats = grpo_step(
                logits, ref, groups, config, opt_state, step=step, total_steps=config.steps, backend=rt.backend
            )
        mean_reward = float(np.mean([g.rewards.mean() for g in groups]))
        result.steps.append(
            {
                "step": step,
                "mean_reward": mean_reward,
                "loss": stats["loss"],
                "kl": stats["kl"],
                "grad_norm": stats["grad_norm"],
            }
        )
        if (step + 1) % config.eval_every == 0 or step + 1 == config.steps:
            result.logits = logits
            run_eval(step + 1)
    result.logits = logits
    result.opt_state = opt_state
    return result


# --- stage 2: pairwise comparison ----------------------------------------------------


def evaluate_pairs(rt: Runtime, logits: np.ndarray, pairs: list[PairInstance]):
    """Greedy held-out predictions as (prediction, label) records."""
    from .metrics import PrefRecord

    return [
        PrefRecord(prediction=predict_preference(rt, logits, p.video_a, p.video_b), label=p.label)
        for p in pairs
    ]


def evaluate_pair_accuracy(rt: Runtime, logits: np.ndarray, pairs) -> float:
    from .metrics import preference_accuracy

    return preference_accuracy(evaluate_pairs(rt, logits, pairs), "tau")


def fast_pair_reward(ep_a, ep_b, y_star, label, n_dims: int) -> float:
    """Pair reward computed from the sampler's own bookkeeping.

    Exactly equivalent to scoring the token sequences with the rubric (the
    sampler can only finish a response through a grammar-valid path, so a
    natural stop is a valid scaffold and its block counter counts well-formed
    blocks); verified against ``pair_reward`` by a property test.
    """
    scaffold = 1 if (ep_a.ended == 1 and ep_b.ended == 1) else 0
    blocks = (ep_a.blocks + ep_b.blocks) / (2.0 * n_dims)
    return scaffold + blocks + comparison_score(y_star, label)


def train_comparison_stage(
    rt: Runtime,
    train_pairs: list[PairInstance],
    heldout_pairs: list[PairInstance],
    config: GRPOConfig,
    *,
    seed: int,
    logits: np.ndarray | None = None,
    opt_state: AdamState | None = None,
    start_step: int = 0,
) -> StageResult:
    """Run (or resume) stage-2 GRPO training.

    ``logits=None`` starts from the primed table (the from-scratch ablation);
    passing a stage-1 table warm-starts the shared judgment states.
    """
    if not train_pairs:
        raise InputError("no training pairs")
    spec = rt.spec
    if logits is None:
        logits = primed_logits(spec)
    logits = logits.copy()
    if opt_state is None:
        opt_state = AdamState.zeros_like(logits)
    result = StageResult(logits=logits, opt_state=opt_state)

    def run_eval(step):
        if heldout_pairs:
            result.evals.append({"step": step, "tau": evaluate_pair_accuracy(rt, logits, heldout_pairs)})

    if start_step == 0:
        run_eval(0)
    for step in range(start_step, config.steps):
        idx = _batch_indices(seed, step, len(train_pairs), config.batch_size)
        rng = _step_rng(seed, _TAG_ROLLOUT, step)
        groups = []
        for i in idx:
            pair = train_pairs[int(i)]
            episodes = []
            for _ in range(config.group_size):
                ep_a, ep_b = sample_pair_responses(rt, logits, pair.buckets_a, pair.buckets_b, rng)
                y_star = extract_verdict(ep_a.tokens.tolist(), ep_b.tokens.tolist(), spec.vocab)
                reward = fast_pair_reward(ep_a, ep_b, y_star, pair.label, spec.n_dims)
                ep = concat_episodes(ep_a, ep_b)
                ep.reward = float(reward)
                episodes.append(ep)
            groups.append(RolloutGroup(episodes))
        ref = logits.copy()
        stats = {}
        for _ in range(config.epochs):
            logits, stats = grpo_step(
                logits, ref, groups, config, opt_state, step=step, total_steps=config.steps, backend=rt.backend
            )
        mean_reward = float(np.mean([g.rewards.mean() for g in groups]))
        result.steps.append(
            {
                "step": step,
                "mean_reward": mean_reward,
                "loss": stats["loss"],
                "kl": stats["kl"],
                "grad_norm": stats["grad_norm"],
            }
        )
        if (step + 1) % config.eval_every == 0 or step + 1 == config.steps:
            result.logits = logits
            run_eval(step + 1)
    result.logits = logits
    result.opt_state = opt_state
    return result
