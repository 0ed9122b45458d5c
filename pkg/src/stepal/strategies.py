"""Video selection strategies: StepAL, its ablations and the standard baselines.

Every strategy takes a :class:`SelectionRequest` and returns a
:class:`SelectionResult` holding at most ``budget`` unlabelled video ids.
Requests always carry a label-blind copy of the pool.

Video-level aggregation for the clip-level baselines is the mean over clips
(entropy, margin) or the mean clip feature (coreset, kmeans family).
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict

import numpy as np

from .exceptions import EmptyPool, MissingLogits, UnknownStrategy
from .step_repr import build_repr, global_average
from .uncertainty import DEFAULT_EPS, mean_prob_entropy, video_entropy, video_margin
from .wkmeans import WeightedPoint, nearest_to_centers, squared_distances, weighted_kmeans

logger = logging.getLogger(__name__)

AGGREGATION_NOTE = "video score = mean over clips; video vector = mean clip feature"


@dataclass(frozen=True, eq=False)
class SelectionRequest:
    pool: object
    budget: int
    seed: int = 0
    eps: float = DEFAULT_EPS
    restarts: int = 10
    max_iter: int = 100
    tol: float = 1e-6

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        object.__setattr__(self, "pool", self.pool.label_blind())

    @property
    def unlabeled(self):
        return list(self.pool.iter_videos(self.pool.unlabeled_ids))

    def effective_budget(self):
        n = len(self.pool.unlabeled_ids)
        if n == 0:
            raise EmptyPool("no unlabelled videos to select from")
        if self.budget > n:
            logger.warning("budget %d exceeds %d unlabelled videos; clamping", self.budget, n)
        return min(self.budget, n)


@dataclass(frozen=True)
class SelectionResult:
    chosen: list
    diagnostics: dict = field(default_factory=dict)


def _require_logits(videos):
    missing = [v.video_id for v in videos if v.logits is None]
    if missing:
        raise MissingLogits(f"videos without logits: {', '.join(missing[:5])}")


def _top(scores: Dict[str, float], b, descending=True):
    sign = -1.0 if descending else 1.0
    return [vid for vid, _ in sorted(scores.items(), key=lambda kv: (sign * kv[1], kv[0]))][:b]


def select_random(req: SelectionRequest) -> SelectionResult:
    b = req.effective_budget()
    ids = req.pool.unlabeled_ids
    rng = np.random.default_rng(req.seed)
    picks = rng.choice(len(ids), size=b, replace=False)
    return SelectionResult([ids[i] for i in picks], {})


def select_entropy(req: SelectionRequest) -> SelectionResult:
    b = req.effective_budget()
    videos = req.unlabeled
    _require_logits(videos)
    scores = {v.video_id: video_entropy(v, req.eps) for v in videos}
    return SelectionResult(_top(scores, b), {"entropy": scores, "aggregation": AGGREGATION_NOTE})


def select_mean_prob_entropy(req: SelectionRequest) -> SelectionResult:
    b = req.effective_budget()
    videos = req.unlabeled
    _require_logits(videos)
    scores = {v.video_id: mean_prob_entropy(v, req.eps) for v in videos}
    return SelectionResult(_top(scores, b), {"mean_prob_entropy": scores})


def select_margin(req: SelectionRequest) -> SelectionResult:
    b = req.effective_budget()
    videos = req.unlabeled
    _require_logits(videos)
    scores = {v.video_id: video_margin(v) for v in videos}
    return SelectionResult(_top(scores, b, descending=False), {"margin": scores, "aggregation": AGGREGATION_NOTE})


def select_coreset(req: SelectionRequest) -> SelectionResult:
    """Greedy k-center on mean clip features, covering from the labelled set."""
    b = req.effective_budget()
    pool = req.pool
    labeled, unlabeled = pool.partition()
    U = np.stack([global_average(pool[vid]) for vid in unlabeled])
    chosen = []
    if labeled:
        L = np.stack([global_average(pool[vid]) for vid in labeled])
        closest = squared_distances(U, L).min(axis=1)
    else:
        chosen.append(0)
        closest = squared_distances(U, U[:1])[:, 0]
    picked_distance = []
    while len(chosen) < b:
        masked = closest.copy()
        masked[chosen] = -np.inf
        i = int(np.argmax(masked))
        picked_distance.append(float(np.sqrt(closest[i])))
        chosen.append(i)
        closest = np.minimum(closest, squared_distances(U, U[i : i + 1])[:, 0])
    ids = [unlabeled[i] for i in chosen]
    return SelectionResult(ids, {"cover_distance": picked_distance, "aggregation": AGGREGATION_NOTE})


def _cluster_and_pick(req, b, points):
    model = weighted_kmeans(points, b, seed=req.seed, restarts=req.restarts, max_iter=req.max_iter, tol=req.tol)
    chosen = nearest_to_centers(model, points, {p.id for p in points}, n_select=b)
    return model, chosen


def _kmeans_diag(model, weights=None):
    diag = {"assignment": model.assignment, "objective": model.objective, "k": model.k}
    if weights is not None:
        diag["entropy"] = weights
    return diag


def select_kmeans(req: SelectionRequest) -> SelectionResult:
    b = req.effective_budget()
    points = [WeightedPoint(v.video_id, global_average(v), 1.0) for v in req.unlabeled]
    model, chosen = _cluster_and_pick(req, b, points)
    return SelectionResult(chosen, _kmeans_diag(model))


def select_ewc(req: SelectionRequest) -> SelectionResult:
    """Entropy-weighted k-means on mean clip features."""
    b = req.effective_budget()
    videos = req.unlabeled
    _require_logits(videos)
    ent = {v.video_id: video_entropy(v, req.eps) for v in videos}
    points = [WeightedPoint(v.video_id, global_average(v), ent[v.video_id]) for v in videos]
    model, chosen = _cluster_and_pick(req, b, points)
    return SelectionResult(chosen, _kmeans_diag(model, ent))


def select_me_kmeans(req: SelectionRequest) -> SelectionResult:
    """Unweighted k-means on mean features; the most uncertain member of each cluster."""
    b = req.effective_budget()
    videos = req.unlabeled
    _require_logits(videos)
    ent = {v.video_id: video_entropy(v, req.eps) for v in videos}
    points = [WeightedPoint(v.video_id, global_average(v), 1.0) for v in videos]
    model = weighted_kmeans(points, b, seed=req.seed, restarts=req.restarts, max_iter=req.max_iter, tol=req.tol)
    members = [[] for _ in range(model.k)]
    for vid, lab in zip(model.ids, model.labels):
        members[lab].append(vid)
    queues = [sorted(m, key=lambda vid: (-ent[vid], vid)) for m in members]
    chosen = []
    depth = 0
    # Later passes take each cluster's next most uncertain member if k was clamped.
    while len(chosen) < b:
        for q in queues:
            if depth < len(q) and len(chosen) < b:
                chosen.append(q[depth])
        depth += 1
    return SelectionResult(chosen, _kmeans_diag(model, ent))


def select_stepal(req: SelectionRequest) -> SelectionResult:
    """Entropy-weighted k-means on step-aware representations."""
    b = req.effective_budget()
    videos = req.unlabeled
    _require_logits(videos)
    C = req.pool.step_count
    reprs = {v.video_id: build_repr(v, C, req.eps) for v in videos}
    ent = {v.video_id: video_entropy(v, req.eps) for v in videos}
    points = [WeightedPoint(v.video_id, reprs[v.video_id].flattened, ent[v.video_id]) for v in videos]
    model, chosen = _cluster_and_pick(req, b, points)
    diag = _kmeans_diag(model, ent)
    diag["z_norms"] = {vid: r.block_norms.tolist() for vid, r in reprs.items()}
    diag["fallback_steps"] = {vid: list(r.fallback_steps) for vid, r in reprs.items()}
    diag["zero_blocks"] = {vid: list(r.zero_blocks) for vid, r in reprs.items() if r.zero_blocks}
    return SelectionResult(chosen, diag)


STRATEGIES: Dict[str, Callable[[SelectionRequest], SelectionResult]] = {
    "random": select_random,
    "margin": select_margin,
    "entropy": select_entropy,
    "coreset": select_coreset,
    "kmeans": select_kmeans,
    "me-kmeans": select_me_kmeans,
    "ewc": select_ewc,
    "stepal": select_stepal,
    "mean-prob-entropy": select_mean_prob_entropy,
}


def strategy_names():
    return list(STRATEGIES)


def get_strategy(name: str):
    key = name.strip().lower()
    try:
        return STRATEGIES[key]
    except KeyError:
        raise UnknownStrategy(name, STRATEGIES) from None


def select(name, pool, budget, seed=0, **kwargs) -> SelectionResult:
    return get_strategy(name)(SelectionRequest(pool, budget, seed, **kwargs))
