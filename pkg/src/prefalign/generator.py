"""Toy video generator: a linear map from prompt embeddings to feature targets.

The generator predicts a D-vector of quality features per prompt; sampling
adds correlated noise (inherited from the world it was "pretrained" on, which
is what couples motion and static quality in its candidate pools) and clamps
into [0, 1].  Losses always use the unclamped prediction.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .world import WorldConfig


def prompt_embedding(prompt_id: str, dim: int, seed: int) -> np.ndarray:
    """Fixed pseudo-embedding for an opaque prompt id (stable across runs)."""
    digest = hashlib.blake2s(f"{seed}:{prompt_id}".encode()).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    return rng.standard_normal(dim) / np.sqrt(dim)


@dataclass
class ToyGenerator:
    weight: np.ndarray  # (n_dims, embed_dim)
    bias: np.ndarray  # (n_dims,)
    noise_scale: float
    noise_chol: np.ndarray  # (n_dims, n_dims) Cholesky factor of the sampling noise
    embed_dim: int
    embed_seed: int
    _embed_cache: dict = None  # type: ignore[assignment]

    @classmethod
    def pretrained(cls, world: WorldConfig, *, embed_dim: int = 8, noise_scale: float = 0.18, embed_seed: int = 0) -> "ToyGenerator":
        """A generator matched to the world: mid-range predictions, sampling
        noise with the world's motion-static coupling."""
        chol = np.linalg.cholesky(world.latent_correlation())
        return cls(
            weight=np.zeros((world.n_dims, embed_dim)),
            bias=np.full(world.n_dims, 0.5),
            noise_scale=noise_scale,
            noise_chol=chol,
            embed_dim=embed_dim,
            embed_seed=embed_seed,
        )

    def copy(self) -> "ToyGenerator":
        return ToyGenerator(
            weight=self.weight.copy(),
            bias=self.bias.copy(),
            noise_scale=self.noise_scale,
            noise_chol=self.noise_chol,
            embed_dim=self.embed_dim,
            embed_seed=self.embed_seed,
            _embed_cache=self._embed_cache,  # embeddings are parameter-free
        )

    def embed(self, prompt_id: str) -> np.ndarray:
        if self._embed_cache is None:
            object.__setattr__(self, "_embed_cache", {})
        emb = self._embed_cache.get(prompt_id)
        if emb is None:
            emb = prompt_embedding(prompt_id, self.embed_dim, self.embed_seed)
            self._embed_cache[prompt_id] = emb
        return emb

    def predict(self, emb: np.ndarray) -> np.ndarray:
        """Unclamped feature prediction."""
        return self.weight @ emb + self.bias

    def sample_features(self, emb: np.ndarray, rng) -> np.ndarray:
        """One sampled feature vector (clamped into [0, 1])."""
        noise = self.noise_scale * (self.noise_chol @ rng.standard_normal(len(self.bias)))
        return np.clip(self.predict(emb) + noise, 0.0, 1.0)

    # --- flat parameter view (for the optimizer) -------------------------------

    def get_params(self) -> np.ndarray:
        return np.concatenate([self.weight.ravel(), self.bias])

    def set_params(self, params: np.ndarray):
        n = self.weight.size
        self.weight = params[:n].reshape(self.weight.shape).copy()
        self.bias = params[n:].copy()


def dynamic_degree(gen: ToyGenerator, prompt_ids, n_samples: int, rng, *, motion_idx=(0, 1)) -> float:
    """Mean motion-feature intensity of generated samples.

    Averages the motion components over ``n_samples`` draws per prompt; with
    zero noise this is exactly the clamped prediction's motion mean.
    """
    if n_samples < 1:
        raise InputError("n_samples must be >= 1")
    prompt_ids = list(prompt_ids)
    embs = np.stack([gen.embed(pid) for pid in prompt_ids])
    preds = embs @ gen.weight.T + gen.bias  # (P, D)
    noise = rng.standard_normal((len(prompt_ids), n_samples, len(gen.bias)))
    noise = noise @ (gen.noise_scale * gen.noise_chol).T
    feats = np.clip(preds[:, None, :] + noise, 0.0, 1.0)
    return float(feats[:, :, list(motion_idx)].mean())


def save_generator(path, gen: ToyGenerator):
    np.savez(
        path,
        weight=gen.weight,
        bias=gen.bias,
        noise_scale=np.array([gen.noise_scale]),
        noise_chol=gen.noise_chol,
        embed_dim=np.array([gen.embed_dim]),
        embed_seed=np.array([gen.embed_seed]),
    )


def load_generator(path) -> ToyGenerator:
    with np.load(path) as data:
        return ToyGenerator(
            weight=data["weight"].copy(),
            bias=data["bias"].copy(),
            noise_scale=float(data["noise_scale"][0]),
            noise_chol=data["noise_chol"].copy(),
            embed_dim=int(data["embed_dim"][0]),
            embed_seed=int(data["embed_seed"][0]),
        )
