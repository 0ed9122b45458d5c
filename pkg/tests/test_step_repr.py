import numpy as np
import pytest

from stepal.exceptions import MissingPseudoLabels
from stepal.pool import VideoRecord
from stepal.step_repr import (
    StepAwareEncoder,
    VideoMeanEncoder,
    build_repr,
    global_average,
    index_sets,
    step_prototype,
)

from conftest import make_video


def labelled_video(features, labels, n_steps, vid="v"):
    """Video whose pseudo-labels are exactly ``labels`` (via one-hot logits)."""
    logits = np.full((len(labels), n_steps), -5.0)
    logits[np.arange(len(labels)), labels] = 5.0
    return make_video(vid, features, logits=logits)


def random_video(rng, T, C, D):
    return labelled_video(rng.normal(size=(T, D)), rng.integers(0, C, size=T), C)


class TestIndexSets:
    def test_grouping(self):
        v = labelled_video(np.zeros((3, 1)), [0, 0, 1], 2)
        sets = index_sets(v, 2)
        assert [s.tolist() for s in sets] == [[0, 1], [2]]

    def test_single_class(self):
        v = labelled_video(np.zeros((4, 1)), [0, 0, 0, 0], 3)
        assert [s.tolist() for s in index_sets(v, 3)] == [[0, 1, 2, 3], [], []]

    def test_partition(self, rng):
        v = random_video(rng, 30, 5, 3)
        sets = index_sets(v, 5)
        allidx = np.concatenate(sets)
        assert sorted(allidx.tolist()) == list(range(30))
        for c, s in enumerate(sets):
            assert np.all(v.pseudo_steps[s] == c)
            assert np.all(np.diff(s) > 0)

    def test_requires_pseudo_labels(self):
        with pytest.raises(MissingPseudoLabels):
            index_sets(make_video("v", [[1.0]]), 2)


class TestPrototypes:
    def test_global_average_single_clip(self):
        v = make_video("v", [[3.0, -1.0]])
        np.testing.assert_array_equal(global_average(v), [3.0, -1.0])

    def test_global_average_midpoint(self):
        v = make_video("v", [[1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_array_equal(global_average(v), [0.5, 0.5])

    def test_global_average_order_free(self, rng):
        feats = rng.normal(size=(23, 7))
        a = make_video("v", feats)
        b = make_video("v", feats[rng.permutation(23)])
        assert np.array_equal(global_average(a), global_average(b))

    def test_whole_video_equals_global(self, rng):
        v = labelled_video(rng.normal(size=(9, 4)), [1] * 9, 2)
        sets = index_sets(v, 2)
        assert np.array_equal(step_prototype(v, sets, 1), global_average(v))

    def test_empty_falls_back(self, rng):
        v = labelled_video(rng.normal(size=(9, 4)), [0] * 5 + [2] * 4, 3)
        sets = index_sets(v, 3)
        assert np.array_equal(step_prototype(v, sets, 1), global_average(v))

    def test_two_point_mean(self):
        v = labelled_video([[2.0, 0.0], [0.0, 2.0], [9.0, 9.0]], [0, 0, 1], 2)
        np.testing.assert_array_equal(step_prototype(v, index_sets(v, 2), 0), [1.0, 1.0])


class TestBuildRepr:
    def test_single_class_fallback_duplicates(self):
        feats = np.array([[3.0, 4.0], [3.0, 4.0]])
        r = build_repr(labelled_video(feats, [0, 0], 2), 2)
        m = np.array([3.0, 4.0]) / (5.0 + 1e-8)
        np.testing.assert_array_equal(r.blocks, [m, m])
        assert r.fallback_steps == (1,)

    def test_hand_example(self):
        v = labelled_video([[1.0, 0.0], [0.0, 1.0]], [0, 1], 2)
        np.testing.assert_allclose(build_repr(v, 2, 1e-8).flattened, [1, 0, 0, 1], atol=1e-7)

    def test_scale_invariance_of_block(self, rng):
        feats = rng.normal(size=(6, 5)) + 3
        labels = [0, 0, 0, 1, 1, 1]
        base = build_repr(labelled_video(feats, labels, 2), 2)
        scaled_feats = feats.copy()
        scaled_feats[:3] *= 7.5
        scaled = build_repr(labelled_video(scaled_feats, labels, 2), 2)
        np.testing.assert_allclose(scaled.blocks[0], base.blocks[0], atol=1e-6)

    def test_flattened_order(self, rng):
        r = build_repr(random_video(rng, 12, 3, 4), 3)
        np.testing.assert_array_equal(r.flattened, np.concatenate(list(r.blocks)))

    def test_zero_prototype_is_zero_block(self):
        v = labelled_video([[1.0, 1.0], [-1.0, -1.0], [0.0, 0.0]], [0, 0, 1], 2)
        r = build_repr(v, 2)
        np.testing.assert_array_equal(r.blocks, np.zeros((2, 2)))
        assert r.zero_blocks == (0, 1)
        assert np.all(np.isfinite(r.flattened))

    def test_identical_class_features(self, rng):
        vec = rng.normal(size=4)
        feats = np.vstack([vec, vec, vec, rng.normal(size=4)])
        r = build_repr(labelled_video(feats, [1, 1, 1, 0], 2), 2)
        np.testing.assert_allclose(r.blocks[1], vec / (np.linalg.norm(vec) + 1e-8), rtol=0, atol=1e-15)

    def test_block_norms_on_random_videos(self, rng):
        for _ in range(200):
            T, C, D = rng.integers(1, 51), rng.integers(2, 14), rng.integers(1, 65)
            r = build_repr(random_video(rng, T, C, D), C)
            norms = r.block_norms
            assert np.all(norms <= 1.0)
            big = r.raw_norms >= 1e-3
            assert np.all(norms[big] >= 1 - 2e-8 / r.raw_norms[big] - 1e-15)

    def test_permutation_bitwise(self, rng):
        for _ in range(50):
            T, C, D = rng.integers(1, 40), rng.integers(2, 9), rng.integers(1, 20)
            feats = rng.normal(size=(T, D))
            labels = rng.integers(0, C, size=T)
            perm = rng.permutation(T)
            a = build_repr(labelled_video(feats, labels, C), C).flattened
            b = build_repr(labelled_video(feats[perm], labels[perm], C), C).flattened
            assert np.array_equal(a, b)


class TestEncoders:
    def test_stepaware_encoder_rows(self, rng):
        videos = [random_video(rng, 10, 3, 4) for _ in range(5)]
        Z = StepAwareEncoder(n_steps=3).fit_transform(videos)
        assert Z.shape == (5, 12)
        np.testing.assert_array_equal(Z[2], build_repr(videos[2], 3).flattened)

    def test_get_params(self):
        enc = StepAwareEncoder(n_steps=4, eps=1e-7)
        assert enc.get_params() == {"n_steps": 4, "eps": 1e-7}

    def test_bad_params(self):
        with pytest.raises(ValueError):
            StepAwareEncoder(n_steps=1).fit([])

    def test_mean_encoder(self):
        v = VideoRecord("v", [[1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_array_equal(VideoMeanEncoder().fit_transform([v]), [[0.5, 0.5]])
