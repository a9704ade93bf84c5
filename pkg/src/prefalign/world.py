"""Synthetic video world: feature space, preference oracle, corpus generation.

A "video" is a point in a D-dimensional quality-feature space (features in
[0, 1]).  Two dimensions are motion-related (object and camera motion), the
rest are static quality dimensions.  Corpora are drawn from a Gaussian copula
whose latent correlation couples every motion dimension to every static
dimension with a configurable (typically negative) coefficient, then squashed
through the normal CDF so marginals are uniform on [0, 1].

The ground-truth preference oracle scores a video by a fixed weighted sum of
its features; per-dimension ordinal labels come from equal-width quantization
of the single feature, optionally perturbed by one level of label noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import ConfigurationError, InputError
from .tokens import Verdict

DEFAULT_DIMENSION_NAMES = (
    "object_motion",
    "camera_motion",
    "visual_quality",
    "semantic_alignment",
    "temporal_consistency",
)
DEFAULT_MOTION_FLAGS = (True, True, False, False, False)


@dataclass(frozen=True)
class Dimension:
    index: int
    name: str
    motion: bool


def default_dimensions(n_dims: int = 5) -> tuple[Dimension, ...]:
    """The standard dimension set; beyond five, extra static dims are synthesized."""
    dims = []
    for i in range(n_dims):
        if i < len(DEFAULT_DIMENSION_NAMES):
            dims.append(Dimension(i, DEFAULT_DIMENSION_NAMES[i], DEFAULT_MOTION_FLAGS[i]))
        else:
            dims.append(Dimension(i, f"static_extra_{i}", False))
    return tuple(dims)


def default_oracle_weights(dimensions) -> np.ndarray:
    """Motion dims share half the oracle's mass, static dims the other half."""
    motion = np.array([d.motion for d in dimensions])
    n_motion = int(motion.sum())
    n_static = len(dimensions) - n_motion
    if n_motion == 0 or n_static == 0:
        raise ConfigurationError("need at least one motion and one static dimension")
    w = np.where(motion, 0.5 / n_motion, 0.5 / n_static)
    return w


@dataclass(frozen=True)
class SyntheticVideo:
    video_id: str
    prompt_id: str
    features: np.ndarray

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if not np.all(np.isfinite(feats)):
            raise InputError(f"non-finite features for video {self.video_id}")
        if feats.min() < 0.0 or feats.max() > 1.0:
            raise InputError(f"features outside [0, 1] for video {self.video_id}")
        object.__setattr__(self, "features", feats)


@dataclass(frozen=True)
class DimInstance:
    """A single-dimension rating instance: one video, one dimension, one label."""

    video: SyntheticVideo
    dim: int
    label: int


@dataclass(frozen=True)
class WorldConfig:
    n_dims: int = 5
    motion_quality_corr: float = -0.6
    label_noise: float = 0.0
    tie_epsilon: float = 0.002
    oracle_weights: np.ndarray | None = None
    rating_levels: int = 5
    seed: int = 0
    latent_corr: np.ndarray | None = None
    dimensions: tuple[Dimension, ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.dimensions is None:
            object.__setattr__(self, "dimensions", default_dimensions(self.n_dims))
        if len(self.dimensions) != self.n_dims:
            raise ConfigurationError("dimensions do not match n_dims")
        names = [d.name for d in self.dimensions]
        if len(set(names)) != len(names):
            raise ConfigurationError("dimension names must be unique")
        if not -1.0 < self.motion_quality_corr <= 0.0:
            raise ConfigurationError("motion_quality_corr must lie in (-1, 0]")
        if self.label_noise < 0.0:
            raise ConfigurationError("label_noise must be >= 0")
        if self.tie_epsilon <= 0.0:
            raise ConfigurationError("tie_epsilon must be > 0")
        if self.rating_levels < 2:
            raise ConfigurationError("rating_levels must be >= 2")
        if self.oracle_weights is None:
            object.__setattr__(self, "oracle_weights", default_oracle_weights(self.dimensions))
        w = np.asarray(self.oracle_weights, dtype=np.float64)
        object.__setattr__(self, "oracle_weights", w)
        if w.shape != (self.n_dims,):
            raise ConfigurationError("oracle_weights must have one entry per dimension")
        if abs(float(w.sum()) - 1.0) > 1e-9:
            raise ConfigurationError("oracle_weights must sum to 1")
        motion_mass = float(w[self.motion_mask()].sum())
        if motion_mass <= 0.0:
            raise ConfigurationError("oracle_weights must put positive weight on motion dims")
        # Validate the implied latent correlation matrix once, up front.
        sigma = self.latent_correlation()
        eig = np.linalg.eigvalsh(sigma)
        if eig.min() < -1e-9:
            raise ConfigurationError(
                f"latent correlation matrix is not positive semi-definite (min eigenvalue {eig.min():.3g})"
            )

    def motion_mask(self) -> np.ndarray:
        return np.array([d.motion for d in self.dimensions])

    def latent_correlation(self) -> np.ndarray:
        """Implied latent Gaussian correlation matrix.

        Built from a single shared factor with loadings ±sqrt(|corr|), which
        makes every motion-static pair correlate at ``motion_quality_corr``
        and every within-group pair at ``|motion_quality_corr|``.  A custom
        matrix can be supplied via ``latent_corr`` (validated here).
        """
        if self.latent_corr is not None:
            sigma = np.asarray(self.latent_corr, dtype=np.float64)
            if sigma.shape != (self.n_dims, self.n_dims):
                raise ConfigurationError("latent_corr has the wrong shape")
            if not np.allclose(sigma, sigma.T, atol=1e-12):
                raise ConfigurationError("latent_corr must be symmetric")
            if not np.allclose(np.diag(sigma), 1.0, atol=1e-12):
                raise ConfigurationError("latent_corr must have a unit diagonal")
            return sigma
        s = math.sqrt(abs(self.motion_quality_corr))
        loadings = np.where(self.motion_mask(), -s, s)
        sigma = np.outer(loadings, loadings)
        np.fill_diagonal(sigma, 1.0)
        return sigma


# --- corpus generation -------------------------------------------------------


def generate_corpus(config: WorldConfig, n_prompts: int, videos_per_prompt: int) -> list[SyntheticVideo]:
    """Draw a corpus of prompts x videos with the configured latent coupling.

    Deterministic given ``config.seed``: latent draws come from a correlated
    Gaussian, then the normal CDF maps each coordinate into [0, 1].
    """
    if n_prompts < 1 or videos_per_prompt < 1:
        raise InputError("counts must be >= 1")
    sigma = config.latent_correlation()
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError(f"latent correlation is not usable: {exc}") from exc
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0xC0]))
    n = n_prompts * videos_per_prompt
    z = rng.standard_normal((n, config.n_dims)) @ chol.T
    feats = ndtr(z)
    corpus = []
    row = 0
    for p in range(n_prompts):
        prompt_id = f"p{p:05d}"
        for j in range(videos_per_prompt):
            corpus.append(
                SyntheticVideo(
                    video_id=f"v{p:05d}_{j}",
                    prompt_id=prompt_id,
                    features=feats[row],
                )
            )
            row += 1
    return corpus


# --- oracle -------------------------------------------------------------------


def quantize_level(feature: float, rating_levels: int) -> int:
    """Equal-width bin of a [0, 1] feature, as a 1-based ordinal level."""
    return 1 + min(int(feature * rating_levels), rating_levels - 1)


def oracle_dim_score(video: SyntheticVideo, dim: int, config: WorldConfig, rng=None) -> int:
    """Ground-truth ordinal label for one dimension of one video.

    With ``label_noise`` > 0 the level is perturbed by one step (direction
    uniform) with that probability, clamped into range; an rng is then
    required.  Noise-free calls consume no randomness.
    """
    if not 0 <= dim < config.n_dims:
        raise InputError(f"dimension index {dim} out of range")
    label = quantize_level(float(video.features[dim]), config.rating_levels)
    if config.label_noise > 0.0:
        if rng is None:
            raise InputError("label_noise > 0 requires an rng")
        if rng.random() < config.label_noise:
            step = 1 if rng.random() < 0.5 else -1
            label = min(max(label + step, 1), config.rating_levels)
    return label


def oracle_utility(video: SyntheticVideo, config: WorldConfig) -> float:
    return float(config.oracle_weights @ video.features)


def oracle_preference(a: SyntheticVideo, b: SyntheticVideo, config: WorldConfig) -> Verdict:
    """Ground-truth pairwise verdict; TIE within ``tie_epsilon`` of utility."""
    if a.prompt_id != b.prompt_id:
        raise InputError(f"prompt mismatch: {a.prompt_id} vs {b.prompt_id}")
    du = oracle_utility(a, config) - oracle_utility(b, config)
    if abs(du) < config.tie_epsilon:
        return Verdict.TIE
    return Verdict.A if du > 0 else Verdict.B


def factorize(corpus, config: WorldConfig) -> list[DimInstance]:
    """Decompose a corpus into per-dimension rating instances.

    Emits exactly ``len(corpus) * n_dims`` instances, labels drawn from the
    oracle with a label-noise stream seeded from the world seed (video-major,
    dimension-minor order, so a replay with the same seed reproduces labels).
    """
    if not corpus:
        raise InputError("corpus is empty")
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0xFA]))
    out = []
    for video in corpus:
        for d in range(config.n_dims):
            out.append(DimInstance(video=video, dim=d, label=oracle_dim_score(video, d, config, rng)))
    return out


# --- statistics ----------------------------------------------------------------


def correlation_matrix(corpus) -> np.ndarray:
    """Pearson correlation of features across the corpus.

    Zero-variance dimensions get NaN as an explicit undefined marker on their
    whole row and column (including the diagonal); no divide warnings leak.
    """
    if len(corpus) < 3:
        raise InputError("need at least 3 videos")
    feats = np.stack([v.features for v in corpus])
    centered = feats - feats.mean(axis=0)
    std = centered.std(axis=0)
    defined = std > 0.0
    cov = centered.T @ centered / len(corpus)
    denom = np.outer(std, std)
    corr = np.full((feats.shape[1], feats.shape[1]), np.nan)
    idx = np.where(defined)[0]
    if idx.size:
        sub = cov[np.ix_(idx, idx)] / denom[np.ix_(idx, idx)]
        corr[np.ix_(idx, idx)] = np.clip(sub, -1.0, 1.0)
    return corr


def motion_static_correlation(corpus, config: WorldConfig) -> float:
    """Mean correlation over all motion-static dimension pairs."""
    corr = correlation_matrix(corpus)
    motion = np.where(config.motion_mask())[0]
    static = np.where(~config.motion_mask())[0]
    vals = [corr[i, j] for i in motion for j in static]
    return float(np.mean(vals))


# --- persistence ----------------------------------------------------------------


def save_corpus(path, corpus, config: WorldConfig):
    """Line-delimited corpus: header naming dimensions, then one video per line
    with fields ``video_id,prompt_id,f_0..f_{D-1}`` (floats via repr, so a
    round-trip is bit-exact)."""
    names = ",".join(d.name for d in config.dimensions)
    with open(path, "w") as fh:
        fh.write(f"video_id,prompt_id,{names}\n")
        for v in corpus:
            feats = ",".join(repr(float(x)) for x in v.features)
            fh.write(f"{v.video_id},{v.prompt_id},{feats}\n")


def load_corpus(path) -> list[SyntheticVideo]:
    corpus = []
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split(",")
        if header[:2] != ["video_id", "prompt_id"]:
            raise InputError(f"unrecognized corpus header in {path}")
        n_dims = len(header) - 2
        for line_no, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != n_dims + 2:
                raise InputError(f"{path}:{line_no}: expected {n_dims + 2} fields")
            feats = np.array([float(x) for x in parts[2:]])
            corpus.append(SyntheticVideo(video_id=parts[0], prompt_id=parts[1], features=feats))
    return corpus


def save_instances(path, instances):
    """Factorized instances: ``video_id,dim,label`` per line with a header."""
    with open(path, "w") as fh:
        fh.write("video_id,dim,label\n")
        for inst in instances:
            fh.write(f"{inst.video.video_id},{inst.dim},{inst.label}\n")


def load_instances(path, corpus) -> list[DimInstance]:
    by_id = {v.video_id: v for v in corpus}
    out = []
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != "video_id,dim,label":
            raise InputError(f"unrecognized instance header in {path}")
        for line_no, line in enumerate(fh, start=2):
            vid, dim, label = line.rstrip("\n").split(",")
            if vid not in by_id:
                raise InputError(f"{path}:{line_no}: unknown video {vid}")
            out.append(DimInstance(video=by_id[vid], dim=int(dim), label=int(label)))
    return out
