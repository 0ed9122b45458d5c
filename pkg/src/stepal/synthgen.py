"""Synthetic multi-step "surgical video" pools.

Each video walks a canonical step order, skipping steps at random and
holding each kept step for a random number of clips.  A clip's feature is
its step prototype, plus a fraction of a confusable partner's prototype,
plus a per-video style offset, plus isotropic Gaussian noise.

Styles model recording conditions (site, device, surgeon): every video
belongs to one style, and a style shifts the appearance of each step by a
fixed offset.  Rare styles and rare steps are what make some videos worth
more labels than others.
"""

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from .exceptions import InvalidConfig
from .pool import DatasetPool, PoolState, VideoRecord


@dataclass(frozen=True)
class GenConfig:
    n_videos: int = 120
    steps: int = 8
    feature_dim: int = 32
    canonical_order: Optional[Tuple[int, ...]] = None
    skip_prob: object = 0.15  # float or one value per step
    segment_len_range: Tuple[int, int] = (3, 10)
    noise_sigma: float = 0.6
    confusable_pairs: Tuple[Tuple[int, int, float], ...] = ()
    seed: int = 0
    prototype_scale: float = 1.0
    n_styles: int = 0
    style_shift: float = 0.0
    style_weights: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        for name in ("canonical_order", "segment_len_range", "style_weights"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, tuple(value))
        object.__setattr__(self, "confusable_pairs", tuple(tuple(p) for p in self.confusable_pairs))
        if not isinstance(self.skip_prob, (int, float)):
            object.__setattr__(self, "skip_prob", tuple(float(s) for s in self.skip_prob))
        self.validate()

    @property
    def order(self):
        return self.canonical_order if self.canonical_order is not None else tuple(range(self.steps))

    @property
    def skip_probs(self):
        if isinstance(self.skip_prob, tuple):
            return np.array(self.skip_prob, dtype=np.float64)
        return np.full(self.steps, float(self.skip_prob))

    def validate(self):
        if self.n_videos < 1:
            raise InvalidConfig("n_videos must be >= 1")
        if self.steps < 2:
            raise InvalidConfig("steps must be >= 2")
        if self.feature_dim < 1:
            raise InvalidConfig("feature_dim must be >= 1")
        if sorted(self.order) != list(range(self.steps)):
            raise InvalidConfig("canonical_order must be a permutation of the steps")
        skips = self.skip_probs
        if skips.shape != (self.steps,) or np.any(skips < 0) or np.any(skips >= 1):
            raise InvalidConfig("skip_prob must lie in [0, 1) for every step")
        lo, hi = self.segment_len_range
        if lo < 1 or hi < lo:
            raise InvalidConfig("segment_len_range must satisfy 1 <= min <= max")
        if self.noise_sigma < 0:
            raise InvalidConfig("noise_sigma must be non-negative")
        if self.prototype_scale <= 0:
            raise InvalidConfig("prototype_scale must be positive")
        for a, b, mix in self.confusable_pairs:
            if not (0 <= a < self.steps and 0 <= b < self.steps) or a == b:
                raise InvalidConfig(f"confusable pair ({a}, {b}) is not two distinct steps")
            if not 0 <= mix < 0.5:
                raise InvalidConfig("confusable mix must lie in [0, 0.5)")
        if self.n_styles < 0 or self.style_shift < 0:
            raise InvalidConfig("n_styles and style_shift must be non-negative")
        if self.style_weights is not None:
            if len(self.style_weights) != self.n_styles or min(self.style_weights) < 0 or sum(self.style_weights) <= 0:
                raise InvalidConfig("style_weights needs one non-negative weight per style")

    def to_dict(self):
        d = asdict(self)
        d["confusable_pairs"] = [list(p) for p in self.confusable_pairs]
        for key in ("canonical_order", "segment_len_range", "style_weights"):
            if d[key] is not None:
                d[key] = list(d[key])
        if isinstance(d["skip_prob"], tuple):
            d["skip_prob"] = list(d["skip_prob"])
        return d


@dataclass(frozen=True, eq=False)
class StepPrototypeBank:
    prototypes: np.ndarray  # (C, D)
    style_offsets: np.ndarray  # (n_styles, C, D)
    min_distance: float = field(init=False)

    def __post_init__(self):
        P = self.prototypes
        d = np.sqrt(((P[:, None, :] - P[None, :, :]) ** 2).sum(-1))
        off = d[~np.eye(P.shape[0], dtype=bool)]
        object.__setattr__(self, "min_distance", float(off.min()) if off.size else math.inf)

    def separable(self, noise_sigma):
        """Diagnostic only: min prototype gap against ``4 * sigma / sqrt(D)``."""
        return self.min_distance > 4 * noise_sigma / math.sqrt(self.prototypes.shape[1])


def _orthonormal_rows(rng, n, dim):
    draws = rng.standard_normal((dim, n))
    if dim >= n:
        q, r = np.linalg.qr(draws)
        # Sign fix so the factorisation is unique.
        return (q * np.sign(np.diag(r))).T
    rows = draws.T
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def make_bank(cfg: GenConfig, rng) -> StepPrototypeBank:
    protos = cfg.prototype_scale * _orthonormal_rows(rng, cfg.steps, cfg.feature_dim)
    offsets = rng.standard_normal((cfg.n_styles, cfg.steps, cfg.feature_dim))
    # Zero mean over steps: a style moves every step but not the video average.
    offsets -= offsets.mean(axis=1, keepdims=True)
    offsets *= cfg.style_shift / math.sqrt(cfg.feature_dim)
    return StepPrototypeBank(protos, offsets)


def _video(cfg, bank, mixing, rng, video_id):
    skips = cfg.skip_probs
    kept = [s for s in cfg.order if rng.random() >= skips[s]]
    if not kept:
        kept = [cfg.order[int(rng.integers(len(cfg.order)))]]
    lo, hi = cfg.segment_len_range
    lengths = rng.integers(lo, hi + 1, size=len(kept))
    steps = np.repeat(np.array(kept, dtype=np.int64), lengths)
    means = mixing[steps]
    if cfg.n_styles:
        weights = np.ones(cfg.n_styles) if cfg.style_weights is None else np.array(cfg.style_weights)
        style = int(rng.choice(cfg.n_styles, p=weights / weights.sum()))
        means = means + bank.style_offsets[style][steps]
    noise = rng.standard_normal(means.shape) * cfg.noise_sigma
    return VideoRecord(video_id, means + noise, true_steps=steps, state=PoolState.UNLABELED)


def video_id(index, n_videos):
    width = max(4, len(str(n_videos - 1)))
    return f"v{index:0{width}d}"


def generate(cfg: GenConfig, return_bank=False):
    """Generate a pool of unlabelled videos with ground-truth steps attached.

    Video ``i`` draws from its own child seed, so output does not depend on
    generation order.
    """
    cfg.validate()
    root = np.random.SeedSequence(cfg.seed)
    bank_seed, *video_seeds = root.spawn(cfg.n_videos + 1)
    bank = make_bank(cfg, np.random.default_rng(bank_seed))
    mixing = bank.prototypes.copy()
    for a, b, mix in cfg.confusable_pairs:
        mixing[a] += mix * bank.prototypes[b]
        mixing[b] += mix * bank.prototypes[a]
    videos = [
        _video(cfg, bank, mixing, np.random.default_rng(s), video_id(i, cfg.n_videos))
        for i, s in enumerate(video_seeds)
    ]
    pool = DatasetPool.from_videos(videos, cfg.steps, cfg.feature_dim)
    return (pool, bank) if return_bank else pool


def split_ids(ids, seed, fractions=(0.5, 0.1, 0.4)):
    """Seeded train/val/test split of ``ids`` by fraction (test takes the rest)."""
    ids = sorted(ids)
    n = len(ids)
    n_train = int(math.floor(fractions[0] * n + 0.5))
    n_val = int(math.floor(fractions[1] * n + 0.5))
    perm = np.random.default_rng(seed).permutation(n)
    shuffled = [ids[i] for i in perm]
    return (
        sorted(shuffled[:n_train]),
        sorted(shuffled[n_train : n_train + n_val]),
        sorted(shuffled[n_train + n_val :]),
    )


# Shared by every preset: prototype spacing and the style population.
_STYLED = dict(
    prototype_scale=1.8,
    n_styles=6,
    style_shift=4.0,
    style_weights=(0.4, 0.2, 0.15, 0.1, 0.1, 0.05),
)

_PRESETS = {
    "default": dict(
        n_videos=120,
        steps=8,
        feature_dim=32,
        segment_len_range=(3, 10),
        noise_sigma=0.6,
        confusable_pairs=((1, 2, 0.3), (5, 6, 0.3)),
        skip_prob=0.15,
        **_STYLED,
    ),
    "easy": dict(
        n_videos=120,
        steps=8,
        feature_dim=32,
        segment_len_range=(3, 10),
        noise_sigma=0.2,
        confusable_pairs=(),
        skip_prob=0.15,
        **_STYLED,
    ),
    "plain": dict(
        n_videos=120,
        steps=8,
        feature_dim=32,
        segment_len_range=(3, 10),
        noise_sigma=0.6,
        confusable_pairs=((1, 2, 0.3), (5, 6, 0.3)),
        skip_prob=0.15,
        prototype_scale=1.7,
    ),
}


def preset_names():
    return sorted(_PRESETS)


def benchmark_suite(name: str, **overrides) -> GenConfig:
    try:
        params = dict(_PRESETS[name.lower()])
    except KeyError:
        raise InvalidConfig(f"unknown preset {name!r}; available: {', '.join(preset_names())}") from None
    params.update(overrides)
    return GenConfig(**params)


def with_seed(cfg: GenConfig, seed: int) -> GenConfig:
    return replace(cfg, seed=seed)
