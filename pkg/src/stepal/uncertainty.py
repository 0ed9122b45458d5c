"""Softmax, pseudo-labels and entropy/margin uncertainty scores.

All entropies are in nats.  Functions accept a single vector or a stack of
vectors along the leading axes; the class axis is always the last one.
"""

import numpy as np

from .exceptions import MissingLogits, NonFiniteInput

DEFAULT_EPS = 1e-8


def _check_eps(eps):
    if not (0.0 < eps <= 1e-6):
        raise ValueError(f"eps must lie in (0, 1e-6], got {eps}")


def _finite_logits(logits):
    logits = np.asarray(logits, dtype=np.float64)
    if logits.shape[-1] < 2:
        raise ValueError("need at least two classes")
    if not np.all(np.isfinite(logits)):
        raise NonFiniteInput("logits contain NaN or infinity")
    return logits


def softmax(logits):
    """Max-subtracted softmax along the last axis."""
    logits = _finite_logits(logits)
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def pseudo_label(logits):
    """Argmax class; ties go to the lowest index."""
    return np.argmax(_finite_logits(logits), axis=-1)


def clip_entropy(p, eps=DEFAULT_EPS):
    """``-sum_c p_c log(p_c + eps)``, clipped below at zero.

    The eps guard makes one-hot inputs come out at ``-log(1 + eps)``, a
    rounding-level negative; the clip keeps the result a valid weight.
    """
    _check_eps(eps)
    p = np.asarray(p, dtype=np.float64)
    h = -np.sum(p * np.log(p + eps), axis=-1)
    return np.maximum(h, 0.0)


def _sorted_mean(values):
    # Sorting first makes the floating-point sum independent of clip order.
    return np.sort(values, axis=0).sum(axis=0) / values.shape[0]


def _video_probs(video):
    if video.logits is None:
        raise MissingLogits(f"video {video.video_id} has no logits")
    return softmax(video.logits)


def video_entropy(video, eps=DEFAULT_EPS):
    """Mean of the per-clip entropies of ``video``."""
    return float(_sorted_mean(clip_entropy(_video_probs(video), eps)))


def mean_prob_entropy(video, eps=DEFAULT_EPS):
    """Entropy of the clip-averaged probability vector (alternative scorer)."""
    return float(clip_entropy(_sorted_mean(_video_probs(video)), eps))


def margin_score(p):
    """Top-1 minus top-2 probability; small means uncertain."""
    p = np.asarray(p, dtype=np.float64)
    if p.shape[-1] < 2:
        raise ValueError("margin needs at least two classes")
    top2 = np.sort(p, axis=-1)[..., -2:]
    return top2[..., 1] - top2[..., 0]


def video_margin(video):
    """Mean clip margin of ``video``."""
    return float(_sorted_mean(margin_score(_video_probs(video))))
