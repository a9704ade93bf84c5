"""Group-relative policy optimization over the tabular policy.

Rewards inside a rollout group are normalized to zero-mean, unit population
std advantages (all zeros when the group is reward-flat, which silently skips
the group).  The objective is the token-level clipped surrogate, averaged
1/G over responses and 1/|o| over tokens, with the group advantage broadcast
to every token of its response, minus an exact categorical KL penalty toward
the sampling-time reference table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigurationError, InputError, TrainingError
from .policy import RolloutGroup


@dataclass(frozen=True)
class GRPOConfig:
    group_size: int = 8
    clip_delta: float = 0.2
    kl_coef: float = 0.07
    learning_rate: float = 1e-2
    batch_size: int = 4
    steps: int = 1500
    epochs: int = 1
    schedule: str = "linear"  # or "constant"
    optimizer: str = "adamw"  # or "sgd" (plain gradient step)
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    eval_every: int = 100

    def __post_init__(self):
        if self.group_size < 2:
            raise ConfigurationError("group_size must be >= 2")
        if not 0.0 < self.clip_delta < 1.0:
            raise ConfigurationError("clip_delta must lie in (0, 1)")
        if self.kl_coef < 0.0:
            raise ConfigurationError("kl_coef must be >= 0")
        if self.schedule not in ("linear", "constant"):
            raise ConfigurationError(f"unknown schedule {self.schedule!r}")
        if self.optimizer not in ("adamw", "sgd"):
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")


def compute_advantages(rewards) -> np.ndarray:
    """Normalize a group's rewards to zero mean and unit population std.

    A reward-flat group (zero std) maps to all-zero advantages rather than
    dividing by zero.  Shift- and positive-scale-invariant by construction.
    """
    r = np.asarray(rewards, dtype=np.float64)
    if r.ndim != 1 or len(r) < 2:
        raise InputError("need a flat list of at least 2 rewards")
    if not np.all(np.isfinite(r)):
        raise InputError("rewards must be finite")
    mean = r.mean()
    std = r.std()  # population std
    if std == 0.0:
        return np.zeros_like(r)
    return (r - mean) / std


def grpo_objective(logits: np.ndarray, ref_logits: np.ndarray, groups: list[RolloutGroup], config: GRPOConfig, *, backend=None):
    """Loss and analytic gradient of the clipped surrogate plus KL penalty.

    Returns ``(loss, grad, stats)`` where stats carries the surrogate and KL
    components.  ``loss = -surrogate + kl_coef * kl`` and the gradient is with
    respect to the policy logit table (the reference table is a constant).
    """
    impl = backend or kernels
    if logits.shape != ref_logits.shape:
        raise InputError("policy and reference tables differ in shape")
    n_states, n_vocab = logits.shape
    flat_states, flat_tokens, flat_old = [], [], []
    offsets = [0]
    weights, advs = [], []
    n_groups = len(groups)
    if n_groups == 0:
        raise InputError("empty batch")
    for group in groups:
        g = len(group.episodes)
        adv = compute_advantages(group.rewards)
        for ep, a in zip(group.episodes, adv):
            n = len(ep.tokens)
            if n == 0:
                raise InputError("empty episode in batch")
            if ep.states.min() < 0 or ep.states.max() >= n_states:
                raise InputError("episode state out of range for this policy")
            if ep.tokens.min() < 0 or ep.tokens.max() >= n_vocab:
                raise InputError("episode token out of range for this policy")
            flat_states.append(ep.states)
            flat_tokens.append(ep.tokens)
            flat_old.append(ep.old_logps)
            offsets.append(offsets[-1] + n)
            weights.append(1.0 / (n_groups * g * n))
            advs.append(a)
    loss, surr, kl, grad = impl.objective(
        logits,
        ref_logits,
        np.concatenate(flat_states),
        np.concatenate(flat_tokens),
        np.concatenate(flat_old),
        np.array(offsets, dtype=np.int64),
        np.array(weights),
        np.array(advs),
        config.clip_delta,
        config.kl_coef,
    )
    return loss, grad, {"surrogate": surr, "kl": kl}


# --- optimizer -------------------------------------------------------------------


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros_like(cls, params: np.ndarray) -> "AdamState":
        return cls(m=np.zeros_like(params), v=np.zeros_like(params), step=0)


def schedule_lr(config: GRPOConfig, step: int, total_steps: int) -> float:
    if config.schedule == "constant" or total_steps <= 0:
        return config.learning_rate
    frac = 1.0 - step / total_steps
    return config.learning_rate * max(frac, 0.0)


def apply_update(logits: np.ndarray, grad: np.ndarray, config: GRPOConfig, state: AdamState, lr: float) -> np.ndarray:
    """One descent step on the loss (decoupled weight decay for adamw)."""
    if not np.all(np.isfinite(grad)):
        raise TrainingError("non-finite gradient; step aborted")
    if config.optimizer == "sgd":
        out = logits - lr * grad
    else:
        state.step += 1
        b1, b2 = config.adam_beta1, config.adam_beta2
        state.m = b1 * state.m + (1.0 - b1) * grad
        state.v = b2 * state.v + (1.0 - b2) * grad * grad
        m_hat = state.m / (1.0 - b1**state.step)
        v_hat = state.v / (1.0 - b2**state.step)
        out = logits - lr * (m_hat / (np.sqrt(v_hat) + config.adam_eps) + config.weight_decay * logits)
    if not np.all(np.isfinite(out)):
        raise TrainingError("non-finite parameters after update; step aborted")
    return out


def grpo_step(
    logits: np.ndarray,
    ref_logits: np.ndarray,
    groups: list[RolloutGroup],
    config: GRPOConfig,
    state: AdamState,
    *,
    step: int = 0,
    total_steps: int = 0,
    backend=None,
):
    """One GRPO update.  Returns (new_logits, stats)."""
    loss, grad, stats = grpo_objective(logits, ref_logits, groups, config, backend=backend)
    lr = schedule_lr(config, step, total_steps)
    new_logits = apply_update(logits, grad, config, state, lr)
    stats = dict(stats)
    stats["loss"] = loss
    stats["grad_norm"] = float(np.linalg.norm(grad))
    stats["lr"] = lr
    return new_logits, stats
