import numpy as np
import pytest

from somcode.errors import InvalidSpecError
from somcode.synth import SyntheticSpec, synth_videos


def test_static_clips_are_rank_one():
    spec = SyntheticSpec(
        num_classes=3, feature_dim=8, subspace_dim=1, frames_per_clip=5,
        clips_per_class=2, noise_sigma=0.0, walk_step=0.0, seed=1,
    )
    fm = synth_videos(spec)
    for clip in np.unique(fm.clip_ids):
        block = fm.x[:, fm.clip_ids == clip]
        assert np.allclose(block, block[:, :1])
        assert np.linalg.matrix_rank(block) == 1


def test_noiseless_class_rank_at_most_subspace_dim():
    spec = SyntheticSpec(
        num_classes=4, feature_dim=16, subspace_dim=3, frames_per_clip=10,
        clips_per_class=3, noise_sigma=0.0, walk_step=0.1, seed=2,
    )
    fm = synth_videos(spec)
    for c in range(4):
        block = fm.x[:, fm.labels == c]
        assert np.linalg.matrix_rank(block, tol=1e-8) <= 3


def test_deterministic_per_seed():
    spec = SyntheticSpec(num_classes=10, feature_dim=64, subspace_dim=3,
                         frames_per_clip=100, clips_per_class=1, seed=1)
    a = synth_videos(spec)
    b = synth_videos(spec)
    assert np.array_equal(a.x, b.x)
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.clip_ids, b.clip_ids)


def test_different_seed_differs():
    spec = SyntheticSpec(seed=1, frames_per_clip=5, clips_per_class=1)
    other = SyntheticSpec(seed=2, frames_per_clip=5, clips_per_class=1)
    assert not np.array_equal(synth_videos(spec).x, synth_videos(other).x)


def test_balanced_clip_counts():
    spec = SyntheticSpec(num_classes=5, clips_per_class=4, frames_per_clip=7,
                         feature_dim=12, subspace_dim=2, seed=3)
    fm = synth_videos(spec)
    assert fm.num_frames == 5 * 4 * 7
    for c in range(5):
        clips = np.unique(fm.clip_ids[fm.labels == c])
        assert clips.shape[0] == 4
        for clip in clips:
            assert np.sum(fm.clip_ids == clip) == 7
    # clip ids globally unique across classes
    assert np.unique(fm.clip_ids).shape[0] == 20


def test_invalid_specs_rejected():
    with pytest.raises(InvalidSpecError):
        SyntheticSpec(subspace_dim=8, feature_dim=8).validate()
    with pytest.raises(InvalidSpecError):
        SyntheticSpec(num_classes=0).validate()
    with pytest.raises(InvalidSpecError):
        SyntheticSpec(noise_sigma=-0.1).validate()
    with pytest.raises(InvalidSpecError):
        SyntheticSpec.from_dict({"bogus_key": 1})


def test_spec_dict_round_trip():
    spec = SyntheticSpec(num_classes=7, noise_sigma=0.2, seed=11)
    assert SyntheticSpec.from_dict(spec.as_dict()) == spec
