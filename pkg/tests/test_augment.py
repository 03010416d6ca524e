import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uwpose.augment import (
    ColorJitterConfig,
    PoseSynthesisConfig,
    color_jitter,
    jitter_dataset,
    render_augmented,
    synthesize_poses,
)
from uwpose.data import merge
from uwpose.errors import ConfigError, DegenerateGeometry, EmptyDataset
from uwpose.geom import Pose, look_at, quat_normalize, yaw_quat
from uwpose.scene import CameraIntrinsics, WaterParams, build_preset, generate_trial, lawnmower_trajectory

CENTROID = np.array([0.0, 0.0, -3.0])


def ring_poses(n=6, radius=5.0, z=-2.0):
    out = []
    for k in range(n):
        p = np.array([radius * math.cos(k), radius * math.sin(k), z])
        out.append(Pose(p, look_at(p, CENTROID)))
    return out


class TestSynthesize:
    def test_identity_grid_empty(self):
        assert synthesize_poses(ring_poses(), PoseSynthesisConfig((0.0,), (1.0,)), CENTROID) == []

    def test_depth_shift(self):
        base = ring_poses(1)
        (p,) = synthesize_poses(base, PoseSynthesisConfig((-1.0,), (1.0,)), CENTROID)
        np.testing.assert_array_equal(p.position, base[0].position + [0, 0, -1.0])
        assert np.array_equal(p.orientation, base[0].orientation)

    def test_range_scale_similar_triangles(self):
        base = Pose([4.0, 0.0, -2.0], yaw_quat(math.pi))
        (p,) = synthesize_poses([base], PoseSynthesisConfig((0.0,), (0.5,)), [0.0, 0.0, -3.0])
        np.testing.assert_allclose(p.position, [2.0, 0.0, -2.0], atol=1e-12)
        # off-axis case: bearing from the centroid is preserved
        c = np.array([1.0, -2.0, -3.0])
        base = Pose([4.0, 2.0, -1.0], yaw_quat(0.3))
        (p,) = synthesize_poses([base], PoseSynthesisConfig((0.0,), (0.5,)), c)
        old, new = base.position[:2] - c[:2], p.position[:2] - c[:2]
        assert abs(math.atan2(new[1], new[0]) - math.atan2(old[1], old[0])) < 1e-9
        assert np.hypot(*new) == pytest.approx(0.5 * np.hypot(*old), abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=4),
        st.lists(st.floats(0.2, 3, allow_nan=False), min_size=1, max_size=4),
        st.integers(1, 5),
    )
    def test_count_and_quaternions(self, offsets, scales, n):
        base = ring_poses(n)
        cfg = PoseSynthesisConfig(tuple(offsets), tuple(scales))
        out = synthesize_poses(base, cfg, CENTROID)
        identity_pairs = sum(1 for o in cfg.depth_offsets for s in cfg.range_scales if o == 0.0 and s == 1.0)
        assert len(out) == n * (len(offsets) * len(scales) - identity_pairs)
        per = len(out) // n
        for i, b in enumerate(base):
            for p in out[i * per : (i + 1) * per]:
                assert p.orientation.tobytes() == b.orientation.tobytes()

    def test_degenerate(self):
        with pytest.raises(DegenerateGeometry):
            synthesize_poses([Pose([0, 0, -1], [1, 0, 0, 0])], PoseSynthesisConfig((1.0,), (1.0,)), CENTROID)

    def test_empty_base(self):
        with pytest.raises(EmptyDataset):
            synthesize_poses([], PoseSynthesisConfig(), CENTROID)

    def test_bad_config(self):
        with pytest.raises(ConfigError):
            PoseSynthesisConfig((0.0,), (0.0,))
        with pytest.raises(ConfigError):
            PoseSynthesisConfig((math.inf,), (1.0,))
        with pytest.raises(ConfigError):
            PoseSynthesisConfig(keep_orientation=False)


class TestRenderAugmented:
    def setup_method(self):
        self.scene = build_preset("tcoms_structure")
        self.cam = CameraIntrinsics(16, 16)
        self.poses = synthesize_poses(ring_poses(3), PoseSynthesisConfig((-0.5, 0.0), (0.8, 1.0)), self.scene.centroid())

    def test_count_and_tag(self):
        ds = render_augmented(self.scene, self.poses, self.cam, WaterParams(), seed=1)
        assert len(ds) == len(self.poses) == 9
        assert {s.source for s in ds} == {"augmented"}

    def test_brightness_bias(self):
        a = render_augmented(self.scene, self.poses[:1], self.cam, WaterParams(), seed=1)[0].image
        b = render_augmented(self.scene, self.poses[:1], self.cam, WaterParams(brightness_bias=0.1), seed=1)[0].image
        # pre-clamp shift: compare only pixels the clamp leaves alone
        free = a + 0.1 < 1.0
        assert free.mean() > 0.9
        assert float(np.mean(b[free] - a[free])) == pytest.approx(0.1, abs=1e-5)

    def test_merge_restamped(self):
        traj = lawnmower_trajectory(self.scene, -3.0, 3.0, 0.5, 2.0, n_passes=1)
        orig = generate_trial(self.scene, traj, self.cam, WaterParams(), seed=0)
        aug = render_augmented(self.scene, self.poses, self.cam, WaterParams(), seed=1)
        m = merge([orig, aug])
        assert np.all(np.diff(m.timestamps) > 0)
        assert len(m) == len(orig) + len(aug)


class TestColorJitter:
    def test_identity(self):
        img = np.random.default_rng(0).random((5, 6, 3)).astype(np.float32)
        out = color_jitter(img, ColorJitterConfig(), 3)
        assert np.array_equal(out, img) and out is not img

    def test_fixed_brightness(self):
        img = np.full((4, 4, 3), 0.5)
        out = color_jitter(img, ColorJitterConfig(brightness_delta=(0.1, 0.1)), 0)
        np.testing.assert_allclose(out, 0.6, atol=1e-15)

    def test_seeded(self):
        img = np.random.default_rng(1).random((4, 4, 3))
        cfg = ColorJitterConfig((-0.1, 0.1), (0.8, 1.2), (0.9, 1.1), seed=5)
        assert np.array_equal(color_jitter(img, cfg, 1), color_jitter(img, cfg, 1))
        assert not np.array_equal(color_jitter(img, cfg, 1), color_jitter(img, cfg, 2))

    def test_clamped(self):
        img = np.full((2, 2, 3), 0.95)
        out = color_jitter(img, ColorJitterConfig(brightness_delta=(0.2, 0.2)), 0)
        assert np.all(out == 1.0)

    def test_interval_must_contain_identity(self):
        with pytest.raises(ConfigError):
            ColorJitterConfig(brightness_delta=(0.1, 0.2))
        with pytest.raises(ConfigError):
            ColorJitterConfig(contrast_range=(1.1, 1.3))

    def test_labels_untouched(self):
        scene = build_preset("sji_pillar")
        traj = lawnmower_trajectory(scene, -2.0, 2.0, 0.5, 1.0, n_passes=1)[:5]
        ds = generate_trial(scene, traj, CameraIntrinsics(16, 16), WaterParams(), seed=0)
        out = jitter_dataset(ds, ColorJitterConfig((-0.1, 0.1), seed=2), 7)
        for a, b in zip(ds, out):
            assert a.pose == b.pose and a.timestamp == b.timestamp and a.source == b.source
        assert any(not np.array_equal(a.image, b.image) for a, b in zip(ds, out))

    def test_grayscale(self):
        img = np.full((3, 3, 1), 0.4)
        out = color_jitter(img, ColorJitterConfig(per_channel_gain_range=(0.5, 1.5), seed=1), 0)
        assert out.shape == img.shape
