"""Weighted k-means (Lloyd iterations, weighted k-means++ seeding).

Minimises ``sum_i w_i * ||x_i - c_{a(i)}||^2``.  Every restart draws from its
own child of ``SeedSequence(seed)``, so a run is fully determined by
``(X, weights, k, seed, restarts)``.
"""

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import EmptyInput

logger = logging.getLogger(__name__)

# Float slack allowed when asserting the objective never goes up.
_MONOTONE_RTOL = 1e-12


@dataclass(frozen=True)
class WeightedPoint:
    id: str
    vector: np.ndarray
    weight: float


@dataclass(frozen=True, eq=False)
class ClusterModel:
    ids: tuple
    centers: np.ndarray
    labels: np.ndarray
    objective: float
    iterations_run: int
    objective_history: tuple = field(repr=False, default=())
    best_restart: int = 0

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    @property
    def assignment(self) -> dict:
        return {vid: int(lab) for vid, lab in zip(self.ids, self.labels)}


def squared_distances(X, centers):
    diff = X[:, None, :] - centers[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def weighted_objective(X, weights, centers, labels):
    d2 = squared_distances(X, centers)[np.arange(X.shape[0]), labels]
    return float(np.dot(weights, d2))


def _draw(rng, mass):
    total = mass.sum()
    cum = np.cumsum(mass)
    idx = int(np.searchsorted(cum, rng.random() * total, side="right"))
    return min(idx, mass.size - 1)


def kmeans_plusplus(X, weights, k, rng):
    """Weighted k-means++: first center ~ w, then ~ w * d^2."""
    n = X.shape[0]
    chosen = [_draw(rng, weights if weights.sum() > 0 else np.ones(n))]
    closest = squared_distances(X, X[chosen])[:, 0]
    while len(chosen) < k:
        mass = weights * closest
        if not mass.sum() > 0:
            # Remaining far points all carry zero weight.
            mass = closest
        if not mass.sum() > 0:
            break
        idx = _draw(rng, mass)
        chosen.append(idx)
        closest = np.minimum(closest, squared_distances(X, X[idx : idx + 1])[:, 0])
    return X[chosen].copy()


def _assign(X, centers):
    d2 = squared_distances(X, centers)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(X.shape[0]), labels]


def _update_centers(X, weights, labels, centers):
    k = centers.shape[0]
    new = centers.copy()
    empty = []
    for j in range(k):
        members = labels == j
        if not members.any():
            empty.append(j)
            continue
        w = weights[members]
        total = w.sum()
        if total > 0:
            new[j] = (w[:, None] * X[members]).sum(axis=0) / total
    if empty:
        # Reseed each empty cluster at the worst-served point.
        own = squared_distances(X, new)[np.arange(X.shape[0]), labels]
        cost = weights * own
        if not cost.max() > 0:
            cost = own
        taken = set()
        for j in empty:
            order = np.argsort(-cost, kind="stable")
            for i in order:
                if cost[i] <= 0:
                    break
                if i not in taken:
                    taken.add(int(i))
                    new[j] = X[i]
                    break
    return new


def _lloyd(X, weights, k, rng, max_iter, tol):
    centers = kmeans_plusplus(X, weights, k, rng)
    labels, d2 = _assign(X, centers)
    objective = float(np.dot(weights, d2))
    slack = _MONOTONE_RTOL * (objective + float(np.dot(weights, np.einsum("ij,ij->i", X, X))))
    history = [objective]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        new_centers = _update_centers(X, weights, labels, centers)
        new_labels, new_d2 = _assign(X, new_centers)
        new_objective = float(np.dot(weights, new_d2))
        if new_objective > objective + slack:
            raise AssertionError(f"objective increased {objective!r} -> {new_objective!r}")
        history.append(new_objective)
        improvement = objective - new_objective
        centers, labels, objective = new_centers, new_labels, new_objective
        if improvement <= tol * history[-2]:
            break
    return centers, labels, objective, n_iter, tuple(history)


def _prepare(X, sample_weight, n_clusters):
    X = check_array(X, dtype=np.float64, ensure_min_samples=1)
    n = X.shape[0]
    if sample_weight is None:
        weights = np.ones(n)
    else:
        weights = np.asarray(sample_weight, dtype=np.float64).reshape(-1)
        if weights.shape != (n,):
            raise ValueError(f"sample_weight has shape {weights.shape}, expected ({n},)")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise ValueError("sample weights must be finite and non-negative")
        if not weights.sum() > 0:
            warnings.warn("all sample weights are zero; falling back to uniform weights", RuntimeWarning)
            weights = np.ones(n)
    if n_clusters < 1:
        raise ValueError("n_clusters must be >= 1")
    distinct = np.unique(X, axis=0).shape[0]
    k = n_clusters
    if k > distinct:
        logger.warning("clamping k from %d to %d distinct points", k, distinct)
        k = distinct
    return X, weights, k


class WeightedKMeans(ClusterMixin, TransformerMixin, BaseEstimator):
    """K-means with per-sample weights in the objective.

    Parameters
    ----------
    n_clusters : int, default=8
        Requested number of clusters; clamped to the number of distinct
        points (``n_clusters_`` holds the value actually used).
    n_init : int, default=10
        Number of seeded restarts; the lowest objective wins, ties going to
        the earliest restart.
    max_iter : int, default=100
    tol : float, default=1e-6
        Stop once the relative objective improvement drops to ``tol``.
    random_state : int or None, default=None

    Attributes
    ----------
    cluster_centers_ : ndarray of shape (n_clusters_, n_features)
    labels_ : ndarray of shape (n_samples,)
    inertia_ : float
        Weighted objective of the returned solution.
    n_iter_ : int
    objective_history_ : tuple of float
        Objective after seeding and after every Lloyd iteration of the
        winning restart.
    """

    def __init__(self, n_clusters=8, n_init=10, max_iter=100, tol=1e-6, random_state=None):
        self.n_clusters = n_clusters
        self.n_init = n_init
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state

    def fit(self, X, y=None, sample_weight=None):
        if len(X) == 0:
            raise EmptyInput("cannot cluster an empty point set")
        X, weights, k = _prepare(X, sample_weight, self.n_clusters)
        if self.n_init < 1:
            raise ValueError("n_init must be >= 1")
        children = np.random.SeedSequence(self.random_state).spawn(self.n_init)
        best = None
        for restart, child in enumerate(children):
            result = _lloyd(X, weights, k, np.random.default_rng(child), self.max_iter, self.tol)
            if best is None or result[2] < best[1][2]:
                best = (restart, result)
        restart, (centers, labels, objective, n_iter, history) = best
        self.cluster_centers_ = centers
        self.labels_ = labels
        self.inertia_ = objective
        self.n_iter_ = n_iter
        self.objective_history_ = history
        self.best_restart_ = restart
        self.n_clusters_ = centers.shape[0]
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=np.float64)
        return _assign(X, self.cluster_centers_)[0]

    def transform(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=np.float64)
        return np.sqrt(squared_distances(X, self.cluster_centers_))


def weighted_kmeans(
    points: Sequence[WeightedPoint],
    k: int,
    seed: Optional[int] = 0,
    restarts: int = 10,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> ClusterModel:
    """Cluster weighted points; thin functional wrapper over :class:`WeightedKMeans`."""
    if not points:
        raise EmptyInput("cannot cluster an empty point set")
    X = np.stack([np.asarray(p.vector, dtype=np.float64) for p in points])
    w = np.array([p.weight for p in points], dtype=np.float64)
    est = WeightedKMeans(n_clusters=k, n_init=restarts, max_iter=max_iter, tol=tol, random_state=seed)
    est.fit(X, sample_weight=w)
    return ClusterModel(
        ids=tuple(p.id for p in points),
        centers=est.cluster_centers_,
        labels=est.labels_,
        objective=est.inertia_,
        iterations_run=est.n_iter_,
        objective_history=est.objective_history_,
        best_restart=est.best_restart_,
    )


def nearest_to_centers(model: ClusterModel, points: Sequence[WeightedPoint], eligible, n_select=None):
    """Pick, for each center in index order, the closest not-yet-picked eligible point.

    Ties go to the lowest id.  With ``n_select`` larger than ``k`` the pass
    over the centers repeats until ``n_select`` points are picked or the
    eligible set is exhausted.
    """
    eligible = set(eligible)
    cands = sorted((p for p in points if p.id in eligible), key=lambda p: p.id)
    if not cands:
        return []
    X = np.stack([np.asarray(p.vector, dtype=np.float64) for p in cands])
    d2 = squared_distances(X, model.centers)
    n_select = model.k if n_select is None else n_select
    available = np.ones(len(cands), dtype=bool)
    chosen = []
    while len(chosen) < n_select and available.any():
        for j in range(model.k):
            if len(chosen) >= n_select or not available.any():
                break
            col = np.where(available, d2[:, j], np.inf)
            i = int(np.argmin(col))
            available[i] = False
            chosen.append(cands[i].id)
    return chosen
