"""Preference alignment of the toy generator from reward-model-scored pairs.

Candidates are sampled per prompt from the frozen initial generator, scored,
and the best/worst become a preference pair.  Alignment minimizes the
log-sigmoid contrast of reconstruction-error rewards against the frozen
reference; in the motion-weighted mode each pair's sides are reweighted by a
sigmoid of the winner-loser motion-score difference, which damps the pull
toward low-motion winners.  A plain regression-to-winners mode ships as the
SFT comparison baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InputError
from .generator import ToyGenerator, dynamic_degree
from .grpo import AdamState
from .world import SyntheticVideo, WorldConfig, quantize_level

ALIGN_MODES = ("mcdpo", "dpo", "sft")


@dataclass(frozen=True)
class RMScores:
    """Overall preference score plus per-dimension scores on a [0, 1] scale."""

    overall: float
    per_dim: np.ndarray

    def motion_scores(self, motion_idx=(0, 1)) -> tuple[float, float]:
        return float(self.per_dim[motion_idx[0]]), float(self.per_dim[motion_idx[1]])


@dataclass(frozen=True)
class PreferencePair:
    prompt_id: str
    video_w: SyntheticVideo
    video_l: SyntheticVideo
    scores_w: RMScores
    scores_l: RMScores

    def __post_init__(self):
        if not self.scores_w.overall > self.scores_l.overall:
            raise InputError("winner must strictly outscore loser")


# --- scorers -----------------------------------------------------------------------


class OracleScorer:
    """Ground-truth scorer: overall = weights . features (oracle utility by
    default), per-dim = quantized level / rating_levels."""

    def __init__(self, world: WorldConfig, overall_weights=None):
        self.world = world
        if overall_weights is None:
            overall_weights = world.oracle_weights
        self.overall_weights = np.asarray(overall_weights, dtype=np.float64)
        if self.overall_weights.shape != (world.n_dims,):
            raise ConfigurationError("overall_weights must have one entry per dimension")

    def score(self, video: SyntheticVideo) -> RMScores:
        levels = self.world.rating_levels
        per_dim = np.array(
            [quantize_level(float(f), levels) / levels for f in video.features]
        )
        return RMScores(overall=float(self.overall_weights @ video.features), per_dim=per_dim)


def static_biased_weights(world: WorldConfig, static_share: float = 0.9) -> np.ndarray:
    """Overall-score weights dominated by the static dimensions."""
    motion = world.motion_mask()
    n_motion = int(motion.sum())
    n_static = world.n_dims - n_motion
    return np.where(motion, (1.0 - static_share) / n_motion, static_share / n_static)


class PolicyScorer:
    """Scores videos with the trained reward policy: per-dim greedy ratings
    normalized by the level count, aggregated by ``agg_weights`` (uniform by
    default) into the overall score."""

    def __init__(self, rt, logits, world: WorldConfig, agg_weights=None):
        self.rt = rt
        self.logits = logits
        self.world = world
        if agg_weights is None:
            agg_weights = np.full(world.n_dims, 1.0 / world.n_dims)
        self.agg_weights = np.asarray(agg_weights, dtype=np.float64)

    def score(self, video: SyntheticVideo) -> RMScores:
        from .policy import predict_rating

        levels = self.world.rating_levels
        per_dim = np.empty(self.world.n_dims)
        for d in range(self.world.n_dims):
            pred = predict_rating(self.rt, self.logits, video, d)
            per_dim[d] = (pred if pred is not None else 0) / levels
        return RMScores(overall=float(self.agg_weights @ per_dim), per_dim=per_dim)


def score_videos(scorer, videos) -> list[RMScores]:
    return [scorer.score(v) for v in videos]


# --- pair construction ----------------------------------------------------------------


def construct_pair(prompt_id: str, candidates, scores) -> PreferencePair | None:
    """Best-vs-worst pair by overall score (ties break to the lowest index);
    None when the pool is score-flat and no preference margin exists."""
    if len(candidates) < 2:
        raise InputError("need at least 2 candidates")
    if len(candidates) != len(scores):
        raise InputError("candidates and scores differ in length")
    overall = np.array([s.overall for s in scores])
    iw = int(np.argmax(overall))
    il = int(np.argmin(overall))
    if overall[iw] == overall[il]:
        return None
    return PreferencePair(
        prompt_id=prompt_id,
        video_w=candidates[iw],
        video_l=candidates[il],
        scores_w=scores[iw],
        scores_l=scores[il],
    )


# --- pair dataset persistence ----------------------------------------------------------


def save_pairs(path, pairs, motion_idx=(0, 1)):
    """Line-delimited pair dataset: ids, overall scores, and the four motion
    scores that feed the reweighting rule (floats via repr, round-trip safe)."""
    with open(path, "w") as fh:
        fh.write("prompt_id,video_id_w,video_id_l,s_w,s_l,s_w_om,s_l_om,s_w_cm,s_l_cm\n")
        for p in pairs:
            s_w_om, s_w_cm = p.scores_w.motion_scores(motion_idx)
            s_l_om, s_l_cm = p.scores_l.motion_scores(motion_idx)
            fields = [p.prompt_id, p.video_w.video_id, p.video_l.video_id]
            fields += [repr(float(x)) for x in (p.scores_w.overall, p.scores_l.overall, s_w_om, s_l_om, s_w_cm, s_l_cm)]
            fh.write(",".join(fields) + "\n")


def load_pairs(path) -> list[dict]:
    """Read a pair dataset back as records (the generated candidate videos
    themselves are not persisted, only ids and scores)."""
    header = "prompt_id,video_id_w,video_id_l,s_w,s_l,s_w_om,s_l_om,s_w_cm,s_l_cm"
    rows = []
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        if first != header:
            raise InputError(f"unrecognized pair-dataset header in {path}")
        for line_no, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != 9:
                raise InputError(f"{path}:{line_no}: expected 9 fields")
            rows.append(
                {
                    "prompt_id": parts[0],
                    "video_id_w": parts[1],
                    "video_id_l": parts[2],
                    "s_w": float(parts[3]),
                    "s_l": float(parts[4]),
                    "s_w_om": float(parts[5]),
                    "s_l_om": float(parts[6]),
                    "s_w_cm": float(parts[7]),
                    "s_l_cm": float(parts[8]),
                }
            )
    return rows


# --- rewards, weights, loss --------------------------------------------------------------


def dpo_reward(gen: ToyGenerator, ref: ToyGenerator, emb: np.ndarray, target: np.ndarray) -> float:
    """Reconstruction-error difference against the frozen reference (negative
    when the trained generator fits the target better than the reference)."""
    pred = gen.predict(emb)
    pred_ref = ref.predict(emb)
    return float(((target - pred) ** 2).sum() - ((target - pred_ref) ** 2).sum())


def _sigmoid(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _softplus(x: float) -> float:
    # stable for |x| up to 1e6 and beyond
    if x > 0.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def motion_weights(s_w_om: float, s_l_om: float, s_w_cm: float, s_l_cm: float) -> tuple[float, float]:
    """Per-pair reweighting from motion-score differences.

    The winner weight is 0.5 + sigmoid(sum of object- and camera-motion score
    differences); the loser weight is its mirror about 1, so the two always
    sum to 2.  A winner with less motion than its loser is down-weighted.
    """
    for v in (s_w_om, s_l_om, s_w_cm, s_l_cm):
        if not math.isfinite(v):
            raise InputError("motion scores must be finite")
    w_w = 0.5 + _sigmoid((s_w_om - s_l_om) + (s_w_cm - s_l_cm))
    return w_w, 2.0 - w_w


def mcdpo_loss(
    pair: PreferencePair,
    gen: ToyGenerator,
    ref: ToyGenerator,
    beta2: float,
    *,
    use_motion_weights: bool = True,
    motion_idx=(0, 1),
):
    """Loss and analytic parameter gradient for one preference pair.

    Returns ``(loss, grad, aux)`` with grad in the generator's flat-parameter
    layout and aux carrying the pair weights and side rewards.  With equal
    motion scores (or ``use_motion_weights=False``) this is exactly the plain
    DPO loss.
    """
    emb = gen.embed(pair.prompt_id)
    if use_motion_weights:
        s_w_om, s_w_cm = pair.scores_w.motion_scores(motion_idx)
        s_l_om, s_l_cm = pair.scores_l.motion_scores(motion_idx)
        w_w, w_l = motion_weights(s_w_om, s_l_om, s_w_cm, s_l_cm)
    else:
        w_w, w_l = 1.0, 1.0
    r_w = dpo_reward(gen, ref, emb, pair.video_w.features)
    r_l = dpo_reward(gen, ref, emb, pair.video_l.features)
    z = beta2 * (w_w * r_w - w_l * r_l)
    if not math.isfinite(z):
        raise ConfigurationError("non-finite intermediate in the alignment loss")
    loss = _softplus(z)
    pred = gen.predict(emb)
    # dz/dpred = -2 [w_w (o_w - pred) - w_l (o_l - pred)]
    dz_dpred = -2.0 * (w_w * (pair.video_w.features - pred) - w_l * (pair.video_l.features - pred))
    dloss_dpred = _sigmoid(z) * beta2 * dz_dpred
    grad = np.concatenate([np.outer(dloss_dpred, emb).ravel(), dloss_dpred])
    return loss, grad, {"w_w": w_w, "w_l": w_l, "r_w": r_w, "r_l": r_l}


def sft_loss(pair: PreferencePair, gen: ToyGenerator):
    """Regression to the winner's features (the SFT comparison mode)."""
    emb = gen.embed(pair.prompt_id)
    pred = gen.predict(emb)
    err = pred - pair.video_w.features
    loss = float((err**2).sum())
    grad = np.concatenate([np.outer(2.0 * err, emb).ravel(), 2.0 * err])
    return loss, grad, {"w_w": 1.0, "w_l": 1.0}


# --- alignment run ------------------------------------------------------------------------


@dataclass(frozen=True)
class AlignConfig:
    mode: str = "mcdpo"
    beta2: float = 5.0
    learning_rate: float = 0.05
    epochs: int = 30
    batch_size: int = 64
    n_candidates: int = 4
    max_pairs: int = 0  # 0 = use every constructible pair
    dd_samples: int = 8  # per-prompt draws for the in-training dynamic degree
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.mode not in ALIGN_MODES:
            raise ConfigurationError(f"unknown alignment mode {self.mode!r}")
        if self.n_candidates < 2:
            raise ConfigurationError("n_candidates must be >= 2")


def build_preference_pairs(gen: ToyGenerator, prompt_ids, scorer, config: AlignConfig, seed: int) -> list[PreferencePair]:
    """Sample candidate pools from the (frozen) generator and keep best-vs-worst
    pairs; prompts with score-flat pools are skipped."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 11]))
    pairs = []
    for i, pid in enumerate(prompt_ids):
        emb = gen.embed(pid)
        candidates = []
        for j in range(config.n_candidates):
            feats = gen.sample_features(emb, rng)
            candidates.append(SyntheticVideo(video_id=f"{pid}_cand{j}", prompt_id=pid, features=feats))
        pair = construct_pair(pid, candidates, score_videos(scorer, candidates))
        if pair is not None:
            pairs.append(pair)
        if config.max_pairs and len(pairs) >= config.max_pairs:
            break
    return pairs


def align_run(
    gen: ToyGenerator,
    prompt_ids,
    scorer,
    config: AlignConfig,
    *,
    seed: int,
    motion_idx=(0, 1),
):
    """Full alignment run.  Returns (trained generator, per-step history).

    The reference generator is frozen at entry; pairs are built once from it
    (offline preference data) and then iterated in seeded shuffled minibatches.
    History rows carry loss, mean winner weight, dynamic degree, and the mean
    overall score of the generator's (noise-free) predictions.
    """
    gen = gen.copy()
    ref = gen.copy()
    pairs = build_preference_pairs(ref, prompt_ids, scorer, config, seed)
    if not pairs:
        raise ConfigurationError("every candidate pool was score-flat; no pairs to align on")
    params = gen.get_params()
    opt = AdamState.zeros_like(params)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 12]))
    history = []
    step = 0
    eval_prompts = list(prompt_ids)[: min(len(prompt_ids), 64)]

    def record(step_idx):
        dd_rng = np.random.default_rng(np.random.SeedSequence([seed, 13, step_idx]))
        dd = dynamic_degree(gen, eval_prompts, config.dd_samples, dd_rng, motion_idx=motion_idx)
        mean_overall = float(
            np.mean(
                [
                    scorer.score(
                        SyntheticVideo(
                            video_id=f"eval_{pid}",
                            prompt_id=pid,
                            features=np.clip(gen.predict(gen.embed(pid)), 0.0, 1.0),
                        )
                    ).overall
                    for pid in eval_prompts
                ]
            )
        )
        history.append(
            {
                "step": step_idx,
                "loss": float(np.mean(losses)) if losses else math.log(2.0),
                "w_w_mean": float(np.mean(wws)) if wws else 1.0,
                "dynamic_degree": dd,
                "overall_score_mean": mean_overall,
            }
        )

    losses: list[float] = []
    wws: list[float] = []
    record(0)
    order = np.arange(len(pairs))
    for _ in range(config.epochs):
        rng.shuffle(order)
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            grad = np.zeros_like(params)
            losses, wws = [], []
            for i in batch:
                pair = pairs[int(i)]
                if config.mode == "sft":
                    loss, g, aux = sft_loss(pair, gen)
                else:
                    loss, g, aux = mcdpo_loss(
                        pair,
                        gen,
                        ref,
                        config.beta2,
                        use_motion_weights=(config.mode == "mcdpo"),
                        motion_idx=motion_idx,
                    )
                grad += g
                losses.append(loss)
                wws.append(aux["w_w"])
            grad /= len(batch)
            step += 1
            opt.step += 1
            b1, b2 = config.adam_beta1, config.adam_beta2
            opt.m = b1 * opt.m + (1.0 - b1) * grad
            opt.v = b2 * opt.v + (1.0 - b2) * grad * grad
            m_hat = opt.m / (1.0 - b1**opt.step)
            v_hat = opt.v / (1.0 - b2**opt.step)
            params = params - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
            gen.set_params(params)
            record(step)
    return gen, history
