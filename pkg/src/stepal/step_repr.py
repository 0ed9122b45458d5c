"""Step-aware video representation built from pseudo-labelled clip features.

For each step ``c`` a video contributes the mean feature of the clips
pseudo-labelled ``c`` (or the video-wide mean when none are), each block is
l2-normalised with an ``eps`` guard, and the ``C`` blocks are concatenated in
ascending step order.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import MissingPseudoLabels
from .uncertainty import DEFAULT_EPS, _check_eps


@dataclass(frozen=True, eq=False)
class StepAwareRepr:
    blocks: np.ndarray  # (C, D)
    raw_norms: np.ndarray  # (C,) norms of the unnormalised prototypes
    fallback_steps: tuple  # steps with no pseudo-labelled clip
    zero_blocks: tuple  # steps whose prototype was the zero vector

    @property
    def flattened(self) -> np.ndarray:
        return self.blocks.reshape(-1)

    @property
    def block_norms(self) -> np.ndarray:
        return np.linalg.norm(self.blocks, axis=1)


def _set_mean(rows):
    # Sum of column-sorted rows: bitwise independent of the clip order.
    return np.sort(rows, axis=0).sum(axis=0) / rows.shape[0]


def index_sets(video, n_steps):
    """Clip indices grouped by pseudo-label, one ascending array per step."""
    if video.pseudo_steps is None:
        raise MissingPseudoLabels(f"video {video.video_id} has no pseudo-labels")
    labels = video.pseudo_steps
    if labels.size and (labels.min() < 0 or labels.max() >= n_steps):
        raise ValueError(f"pseudo-label outside [0, {n_steps})")
    return [np.flatnonzero(labels == c) for c in range(n_steps)]


def global_average(video):
    return _set_mean(video.features)


def step_prototype(video, sets, step):
    idx = sets[step]
    if idx.size == 0:
        return global_average(video)
    return _set_mean(video.features[idx])


def build_repr(video, n_steps, eps=DEFAULT_EPS) -> StepAwareRepr:
    _check_eps(eps)
    sets = index_sets(video, n_steps)
    protos = np.stack([step_prototype(video, sets, c) for c in range(n_steps)])
    norms = np.linalg.norm(protos, axis=1)
    blocks = protos / (norms + eps)[:, None]
    return StepAwareRepr(
        blocks=blocks,
        raw_norms=norms,
        fallback_steps=tuple(c for c in range(n_steps) if sets[c].size == 0),
        zero_blocks=tuple(int(c) for c in np.flatnonzero(norms == 0.0)),
    )


class StepAwareEncoder(BaseEstimator, TransformerMixin):
    """Map a sequence of pseudo-labelled videos to their flattened ``z`` rows.

    Stateless: ``fit`` only validates parameters.

    Parameters
    ----------
    n_steps : int
        Number of step classes ``C``.
    eps : float, default=1e-8
        Guard added to every block norm before dividing.
    """

    def __init__(self, n_steps, eps=DEFAULT_EPS):
        self.n_steps = n_steps
        self.eps = eps

    def fit(self, videos, y=None):
        if self.n_steps < 2:
            raise ValueError("n_steps must be >= 2")
        _check_eps(self.eps)
        return self

    def transform(self, videos):
        rows = [build_repr(v, self.n_steps, self.eps).flattened for v in videos]
        if not rows:
            return np.empty((0, 0))
        return np.stack(rows)


class VideoMeanEncoder(BaseEstimator, TransformerMixin):
    """Map videos to their clip-averaged feature vectors."""

    def fit(self, videos, y=None):
        return self

    def transform(self, videos):
        rows = [global_average(v) for v in videos]
        return np.stack(rows) if rows else np.empty((0, 0))
