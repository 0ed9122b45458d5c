"""Video pool data model: clips, videos and the labeled/unlabeled split.

Clip data is stored per video as dense arrays (``features`` is ``(T, D)``,
``logits`` is ``(T, C)``) so that the numerical code never loops over clips
in Python.  :class:`ClipRecord` offers a per-clip view for callers that
prefer records.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping, Optional

import numpy as np

from .exceptions import AlreadyLabeled, InvalidPool, UnknownVideo


class PoolState(enum.Enum):
    LABELED = "labeled"
    UNLABELED = "unlabeled"


@dataclass(frozen=True)
class ClipRecord:
    clip_index: int
    features: np.ndarray
    true_step: Optional[int] = None
    logits: Optional[np.ndarray] = None
    pseudo_step: Optional[int] = None


def _as_readonly(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class VideoRecord:
    """One untrimmed video: an ordered run of ``T >= 1`` clips.

    ``true_steps`` is ``None`` on label-blind views handed to selection
    strategies.  ``logits`` and ``pseudo_steps`` stay ``None`` until the
    learner has run inference on the video.
    """

    video_id: str
    features: np.ndarray
    true_steps: Optional[np.ndarray] = None
    logits: Optional[np.ndarray] = None
    pseudo_steps: Optional[np.ndarray] = None
    state: PoolState = PoolState.UNLABELED

    def __post_init__(self):
        if not isinstance(self.video_id, str) or not self.video_id:
            raise InvalidPool(f"video id must be a non-empty string, got {self.video_id!r}")
        feats = _as_readonly(self.features, np.float64)
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise InvalidPool(f"video {self.video_id}: features must be (T>=1, D>=1), got {feats.shape}")
        object.__setattr__(self, "features", feats)
        T = feats.shape[0]
        if self.true_steps is not None:
            steps = _as_readonly(self.true_steps, np.int64)
            if steps.shape != (T,):
                raise InvalidPool(f"video {self.video_id}: true_steps shape {steps.shape} != ({T},)")
            object.__setattr__(self, "true_steps", steps)
        if self.logits is not None:
            logits = _as_readonly(self.logits, np.float64)
            if logits.ndim != 2 or logits.shape[0] != T:
                raise InvalidPool(f"video {self.video_id}: logits shape {logits.shape} does not match T={T}")
            object.__setattr__(self, "logits", logits)
        if self.pseudo_steps is not None:
            pseudo = _as_readonly(self.pseudo_steps, np.int64)
            if pseudo.shape != (T,):
                raise InvalidPool(f"video {self.video_id}: pseudo_steps shape {pseudo.shape} != ({T},)")
            if self.logits is not None and not np.array_equal(pseudo, np.argmax(self.logits, axis=1)):
                raise InvalidPool(f"video {self.video_id}: pseudo_steps disagree with argmax of logits")
            object.__setattr__(self, "pseudo_steps", pseudo)
        if not isinstance(self.state, PoolState):
            object.__setattr__(self, "state", PoolState(self.state))

    @classmethod
    def from_clips(cls, video_id: str, clips: Iterable[ClipRecord], state=PoolState.UNLABELED):
        """Build a video from clip records given in any order.

        Clips are sorted by ``clip_index``, which must run ``0..T-1``.
        Optional fields must be present on all clips or on none.
        """
        clips = sorted(clips, key=lambda c: c.clip_index)
        if not clips:
            raise InvalidPool(f"video {video_id}: needs at least one clip")
        if [c.clip_index for c in clips] != list(range(len(clips))):
            raise InvalidPool(f"video {video_id}: clip indices must be 0..T-1 without gaps")

        def collect(attr):
            values = [getattr(c, attr) for c in clips]
            present = [v is not None for v in values]
            if all(present):
                return np.asarray(values)
            if any(present):
                raise InvalidPool(f"video {video_id}: {attr} present on some clips only")
            return None

        return cls(
            video_id=video_id,
            features=np.stack([np.asarray(c.features, dtype=np.float64) for c in clips]),
            true_steps=collect("true_step"),
            logits=collect("logits"),
            pseudo_steps=collect("pseudo_step"),
            state=state,
        )

    @property
    def n_clips(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def has_logits(self) -> bool:
        return self.logits is not None

    @property
    def is_labeled(self) -> bool:
        return self.state is PoolState.LABELED

    def clips(self) -> Iterator[ClipRecord]:
        for t in range(self.n_clips):
            yield ClipRecord(
                clip_index=t,
                features=self.features[t],
                true_step=None if self.true_steps is None else int(self.true_steps[t]),
                logits=None if self.logits is None else self.logits[t],
                pseudo_step=None if self.pseudo_steps is None else int(self.pseudo_steps[t]),
            )

    def without_labels(self) -> "VideoRecord":
        return replace(self, true_steps=None)

    def with_inference(self, logits: np.ndarray) -> "VideoRecord":
        logits = np.asarray(logits, dtype=np.float64)
        return replace(self, logits=logits, pseudo_steps=np.argmax(logits, axis=1))


@dataclass(frozen=True, eq=False)
class DatasetPool:
    """A collection of videos sharing one step count ``C`` and feature dim ``D``.

    Pools are immutable; mutating operations return a new pool that shares
    the underlying (read-only) arrays.
    """

    videos: Mapping[str, VideoRecord]
    step_count: int
    feature_dim: int
    _ids: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.step_count < 2:
            raise InvalidPool(f"step_count must be >= 2, got {self.step_count}")
        if self.feature_dim < 1:
            raise InvalidPool(f"feature_dim must be >= 1, got {self.feature_dim}")
        videos = dict(self.videos)
        for vid, video in videos.items():
            if vid != video.video_id:
                raise InvalidPool(f"pool key {vid!r} does not match video id {video.video_id!r}")
            if video.feature_dim != self.feature_dim:
                raise InvalidPool(f"video {vid}: feature dim {video.feature_dim} != {self.feature_dim}")
            if video.logits is not None and video.logits.shape[1] != self.step_count:
                raise InvalidPool(f"video {vid}: logits width {video.logits.shape[1]} != {self.step_count}")
            if video.true_steps is not None and (
                video.true_steps.min() < 0 or video.true_steps.max() >= self.step_count
            ):
                raise InvalidPool(f"video {vid}: true step outside [0, {self.step_count})")
        object.__setattr__(self, "videos", videos)
        object.__setattr__(self, "_ids", tuple(sorted(videos)))

    @classmethod
    def from_videos(cls, videos: Iterable[VideoRecord], step_count: int, feature_dim: Optional[int] = None):
        videos = list(videos)
        if feature_dim is None:
            if not videos:
                raise InvalidPool("feature_dim is required for an empty pool")
            feature_dim = videos[0].feature_dim
        mapping = {}
        for v in videos:
            if v.video_id in mapping:
                raise InvalidPool(f"duplicate video id {v.video_id!r}")
            mapping[v.video_id] = v
        return cls(mapping, step_count, feature_dim)

    def __len__(self):
        return len(self.videos)

    def __contains__(self, video_id):
        return video_id in self.videos

    def __getitem__(self, video_id) -> VideoRecord:
        try:
            return self.videos[video_id]
        except KeyError:
            raise UnknownVideo(video_id) from None

    @property
    def ids(self) -> list:
        return list(self._ids)

    def iter_videos(self, ids=None) -> Iterator[VideoRecord]:
        for vid in self._ids if ids is None else ids:
            yield self[vid]

    def partition(self):
        """Return ``(labeled_ids, unlabeled_ids)``, each sorted ascending."""
        labeled = [vid for vid in self._ids if self.videos[vid].is_labeled]
        unlabeled = [vid for vid in self._ids if not self.videos[vid].is_labeled]
        return labeled, unlabeled

    @property
    def labeled_ids(self):
        return self.partition()[0]

    @property
    def unlabeled_ids(self):
        return self.partition()[1]

    def move_to_labeled(self, ids) -> "DatasetPool":
        ids = list(ids)
        for vid in ids:
            if self[vid].is_labeled:
                raise AlreadyLabeled(f"video {vid!r} is already labeled")
        if len(set(ids)) != len(ids):
            raise AlreadyLabeled("duplicate ids in move_to_labeled request")
        videos = dict(self.videos)
        for vid in ids:
            videos[vid] = replace(videos[vid], state=PoolState.LABELED)
        return DatasetPool(videos, self.step_count, self.feature_dim)

    def with_states(self, labeled_ids) -> "DatasetPool":
        labeled_ids = set(labeled_ids)
        for vid in labeled_ids:
            self[vid]
        videos = {
            vid: replace(v, state=PoolState.LABELED if vid in labeled_ids else PoolState.UNLABELED)
            for vid, v in self.videos.items()
        }
        return DatasetPool(videos, self.step_count, self.feature_dim)

    def subset(self, ids) -> "DatasetPool":
        return DatasetPool({vid: self[vid] for vid in ids}, self.step_count, self.feature_dim)

    def replace_videos(self, videos: Iterable[VideoRecord]) -> "DatasetPool":
        updated = dict(self.videos)
        for v in videos:
            self[v.video_id]
            updated[v.video_id] = v
        return DatasetPool(updated, self.step_count, self.feature_dim)

    def label_blind(self) -> "DatasetPool":
        """View with every ``true_steps`` stripped; what selection strategies see."""
        videos = {vid: v.without_labels() for vid, v in self.videos.items()}
        return DatasetPool(videos, self.step_count, self.feature_dim)

    def stacked(self, ids=None):
        """Concatenate clip arrays of ``ids`` (default: all, in id order).

        Returns ``(features, true_steps)``; ``true_steps`` is ``None`` if any
        video lacks labels.
        """
        videos = list(self.iter_videos(ids))
        if not videos:
            return np.empty((0, self.feature_dim)), np.empty(0, dtype=np.int64)
        X = np.concatenate([v.features for v in videos])
        if any(v.true_steps is None for v in videos):
            return X, None
        return X, np.concatenate([v.true_steps for v in videos])


def partition(pool: DatasetPool):
    return pool.partition()


def move_to_labeled(pool: DatasetPool, ids) -> DatasetPool:
    return pool.move_to_labeled(ids)
