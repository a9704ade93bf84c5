"""Run configuration: flat key-value files, named profiles, CLI overrides.

The canonical form is a flat mapping of dotted keys to scalars; files carry
one ``key = value`` pair per line (``#`` comments allowed).  The ``desk``
profile is the calibrated laptop-scale setup; ``paper`` mirrors the reference
pipeline's published hyperparameters (shipped as a preset, not expected to
converge at this scale).
"""

from __future__ import annotations

import ast
import hashlib
from dataclasses import dataclass

import numpy as np

from .align import AlignConfig
from .errors import ConfigurationError
from .grpo import GRPOConfig
from .states import PolicySpec
from .world import WorldConfig

DESK_DEFAULTS: dict = {
    "seed": 0,
    "out_dir": "runs/default",
    "heldout_fraction": 0.15,
    # world
    "world.n_dims": 5,
    "world.motion_quality_corr": -0.6,
    "world.label_noise": 0.0,
    "world.tie_epsilon": 0.002,
    "world.rating_levels": 5,
    # corpus
    "corpus.n_prompts": 400,
    "corpus.videos_per_prompt": 4,
    # policy table
    "policy.n_buckets": 10,
    "policy.n_fillers": 4,
    "policy.max_len": 32,
    "policy.verdict_span": 8,
    # stage 1 (single-dimension rating)
    "rating.group_size": 8,
    "rating.clip_delta": 0.2,
    "rating.kl_coef": 0.07,
    "rating.learning_rate": 1e-2,
    "rating.batch_size": 4,
    "rating.steps": 2000,
    "rating.epochs": 1,
    "rating.schedule": "constant",
    "rating.optimizer": "adamw",
    "rating.eval_every": 100,
    "rating.heldout_max": 400,
    # stage 2 (pairwise comparison)
    "pair.group_size": 8,
    "pair.clip_delta": 0.2,
    "pair.kl_coef": 0.07,
    "pair.learning_rate": 1e-2,
    "pair.batch_size": 4,
    "pair.steps": 2200,
    "pair.epochs": 1,
    "pair.schedule": "constant",
    "pair.optimizer": "adamw",
    "pair.eval_every": 100,
    "pair.heldout_max": 250,
    # stage 3 (alignment)
    "align.mode": "mcdpo",
    "align.beta2": 5.0,
    "align.learning_rate": 0.05,
    "align.epochs": 30,
    "align.batch_size": 64,
    "align.n_candidates": 4,
    "align.max_pairs": 0,
    "align.n_prompts": 600,
    "align.noise_scale": 0.18,
    "align.scorer": "static",  # oracle | static | rm
    "align.static_share": 0.9,
    "align.embed_dim": 8,
}

PAPER_OVERRIDES: dict = {
    # reference-pipeline presets (reward model: AdamW 1e-6 linear decay,
    # rollout 8, KL coefficient 0.07, batch 16, 2 epochs; alignment: AdamW
    # 6e-6, beta2 2500, batch 8, 20 epochs, 4 candidates, 10k pairs)
    "rating.learning_rate": 1e-6,
    "rating.batch_size": 16,
    "rating.epochs": 2,
    "pair.learning_rate": 1e-6,
    "pair.batch_size": 16,
    "pair.epochs": 2,
    "align.beta2": 2500.0,
    "align.learning_rate": 6e-6,
    "align.batch_size": 64,
    "align.epochs": 20,
    "align.n_prompts": 10000,
    "corpus.n_prompts": 30000,
}

PROFILES = {"desk": {}, "paper": PAPER_OVERRIDES}


def parse_value(text: str):
    text = text.strip()
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def load_config_file(path) -> dict:
    flat = {}
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{line_no}: expected 'key = value'")
            key, value = line.split("=", 1)
            flat[key.strip()] = parse_value(value)
    return flat


def save_config_file(path, flat: dict):
    with open(path, "w") as fh:
        for key in sorted(flat):
            fh.write(f"{key} = {flat[key]!r}\n")


def resolve_flat(profile: str = "desk", config_file=None, overrides=None, seed=None, out_dir=None) -> dict:
    """Defaults <- profile <- config file <- --set overrides <- --seed/--out."""
    if profile not in PROFILES:
        raise ConfigurationError(f"unknown profile {profile!r} (have {sorted(PROFILES)})")
    flat = dict(DESK_DEFAULTS)
    flat.update(PROFILES[profile])
    if config_file is not None:
        flat.update(load_config_file(config_file))
    for key, value in (overrides or {}).items():
        if key not in DESK_DEFAULTS:
            raise ConfigurationError(f"unknown config key {key!r}")
        flat[key] = value
    if seed is not None:
        flat["seed"] = int(seed)
    if out_dir is not None:
        flat["out_dir"] = str(out_dir)
    unknown = set(flat) - set(DESK_DEFAULTS)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    return flat


def config_hash(flat: dict) -> str:
    canon = "\n".join(f"{k}={flat[k]!r}" for k in sorted(flat))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def derive_seed(master: int, tag: int) -> int:
    return int(np.random.SeedSequence([master, tag]).generate_state(1)[0])


@dataclass(frozen=True)
class RunConfig:
    flat: dict
    world: WorldConfig
    spec: PolicySpec
    rating: GRPOConfig
    pair: GRPOConfig
    align: AlignConfig

    @property
    def seed(self) -> int:
        return int(self.flat["seed"])

    @property
    def out_dir(self) -> str:
        return str(self.flat["out_dir"])

    @property
    def hash(self) -> str:
        return config_hash(self.flat)

    @classmethod
    def from_flat(cls, flat: dict) -> "RunConfig":
        world = WorldConfig(
            n_dims=int(flat["world.n_dims"]),
            motion_quality_corr=float(flat["world.motion_quality_corr"]),
            label_noise=float(flat["world.label_noise"]),
            tie_epsilon=float(flat["world.tie_epsilon"]),
            rating_levels=int(flat["world.rating_levels"]),
            seed=int(flat["seed"]),
        )
        spec = PolicySpec(
            n_dims=world.n_dims,
            rating_levels=world.rating_levels,
            n_buckets=int(flat["policy.n_buckets"]),
            n_fillers=int(flat["policy.n_fillers"]),
            max_len=int(flat["policy.max_len"]),
            verdict_span=int(flat["policy.verdict_span"]),
            motion_flags=tuple(bool(f) for f in world.motion_mask()),
        )

        def grpo(prefix: str) -> GRPOConfig:
            return GRPOConfig(
                group_size=int(flat[f"{prefix}.group_size"]),
                clip_delta=float(flat[f"{prefix}.clip_delta"]),
                kl_coef=float(flat[f"{prefix}.kl_coef"]),
                learning_rate=float(flat[f"{prefix}.learning_rate"]),
                batch_size=int(flat[f"{prefix}.batch_size"]),
                steps=int(flat[f"{prefix}.steps"]),
                epochs=int(flat[f"{prefix}.epochs"]),
                schedule=str(flat[f"{prefix}.schedule"]),
                optimizer=str(flat[f"{prefix}.optimizer"]),
                eval_every=int(flat[f"{prefix}.eval_every"]),
            )

        align = AlignConfig(
            mode=str(flat["align.mode"]),
            beta2=float(flat["align.beta2"]),
            learning_rate=float(flat["align.learning_rate"]),
            epochs=int(flat["align.epochs"]),
            batch_size=int(flat["align.batch_size"]),
            n_candidates=int(flat["align.n_candidates"]),
            max_pairs=int(flat["align.max_pairs"]),
        )
        return cls(flat=dict(flat), world=world, spec=spec, rating=grpo("rating"), pair=grpo("pair"), align=align)
