import numpy as np
import pytest

from stepal.pool import DatasetPool, PoolState, VideoRecord


def make_video(vid, features, logits=None, steps=None, labeled=False):
    features = np.asarray(features, dtype=float)
    if steps is None:
        steps = np.zeros(features.shape[0], dtype=int)
    video = VideoRecord(
        vid,
        features,
        true_steps=steps,
        state=PoolState.LABELED if labeled else PoolState.UNLABELED,
    )
    if logits is not None:
        video = video.with_inference(np.asarray(logits, dtype=float))
    return video


def video_from_probs(vid, probs, features=None):
    """Video whose clip logits are log-probabilities (so softmax returns ``probs``)."""
    probs = np.asarray(probs, dtype=float)
    if features is None:
        features = np.ones((probs.shape[0], 2))
    with np.errstate(divide="ignore"):
        logits = np.log(probs)
    logits = np.where(np.isfinite(logits), logits, -800.0)
    return make_video(vid, features, logits=logits)


def make_pool(videos, step_count=2):
    return DatasetPool.from_videos(videos, step_count)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
