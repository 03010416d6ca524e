"""Training-set augmentation: new camera poses rendered from the scene, and colour jitter."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from uwpose.data import TrialDataset
from uwpose.errors import ConfigError, DegenerateGeometry, EmptyDataset
from uwpose.geom import Pose
from uwpose.scene import (
    FRAME_RATE_HZ,
    CameraIntrinsics,
    SceneSpec,
    WaterParams,
    derive_seed,
    generate_trial,
)

MIN_HORIZONTAL_RANGE = 1e-9


@dataclass(frozen=True)
class PoseSynthesisConfig:
    """Grid of depth offsets (m, added to z) and horizontal range scale factors."""

    depth_offsets: tuple[float, ...] = (0.0,)
    range_scales: tuple[float, ...] = (1.0,)
    keep_orientation: bool = True

    def __post_init__(self):
        object.__setattr__(self, "depth_offsets", tuple(float(v) for v in self.depth_offsets))
        object.__setattr__(self, "range_scales", tuple(float(v) for v in self.range_scales))
        if not self.depth_offsets or not self.range_scales:
            raise ConfigError("depth_offsets and range_scales must be non-empty")
        if not all(np.isfinite(self.depth_offsets)):
            raise ConfigError("depth offsets must be finite")
        if not all(s > 0 and np.isfinite(s) for s in self.range_scales):
            raise ConfigError("range scales must be positive")
        if not self.keep_orientation:
            raise ConfigError("orientation is always kept when synthesizing poses")


def synthesize_poses(base: Sequence[Pose], cfg: PoseSynthesisConfig, structure_centroid) -> list[Pose]:
    """Shift each pose in depth and slide it along its horizontal ray to the centroid.

    The quaternion of every output is the very array of its base pose, so
    bearings and orientations are untouched; pairs (0, 1) are skipped since
    they reproduce the base pose.
    """
    if len(base) == 0:
        raise EmptyDataset("no base poses to synthesize from")
    c = np.asarray(structure_centroid, dtype=float)
    if c.shape != (3,) or not np.all(np.isfinite(c)):
        raise DegenerateGeometry("structure centroid must be a finite 3-vector")
    out = []
    for pose in base:
        rel = pose.position[:2] - c[:2]
        if np.hypot(*rel) < MIN_HORIZONTAL_RANGE:
            raise DegenerateGeometry(f"camera at {pose.position} sits on the centroid axis")
        for offset in cfg.depth_offsets:
            for scale in cfg.range_scales:
                if offset == 0.0 and scale == 1.0:
                    continue
                xy = c[:2] + scale * rel
                out.append(Pose(np.array([xy[0], xy[1], pose.position[2] + offset]), pose.orientation))
    return out


def render_augmented(
    scene: SceneSpec,
    poses: Sequence[Pose],
    cam: CameraIntrinsics,
    water: WaterParams,
    seed: int,
    t0: float = 0.0,
    rate_hz: float = FRAME_RATE_HZ,
    name: str = "augmented",
) -> TrialDataset:
    return generate_trial(scene, poses, cam, water, seed, t0=t0, rate_hz=rate_hz, source="augmented", name=name)


@dataclass(frozen=True)
class ColorJitterConfig:
    """Sampling intervals for an additive brightness shift, contrast about the
    image mean, and independent per-channel gains.

    A proper interval must contain the identity value; a degenerate interval
    ``(v, v)`` is a fixed adjustment and may sit anywhere.
    """

    brightness_delta: tuple[float, float] = (0.0, 0.0)
    contrast_range: tuple[float, float] = (1.0, 1.0)
    per_channel_gain_range: tuple[float, float] = (1.0, 1.0)
    seed: int = 0

    def __post_init__(self):
        for field, ident in (
            ("brightness_delta", 0.0),
            ("contrast_range", 1.0),
            ("per_channel_gain_range", 1.0),
        ):
            lo, hi = (float(v) for v in getattr(self, field))
            object.__setattr__(self, field, (lo, hi))
            if lo > hi or (lo < hi and not lo <= ident <= hi):
                raise ConfigError(f"{field} {lo, hi} must be ordered and contain {ident}")
        if self.contrast_range[0] < 0 or self.per_channel_gain_range[0] < 0:
            raise ConfigError("contrast and gain must be non-negative")

    @property
    def is_identity(self) -> bool:
        return (
            self.brightness_delta == (0.0, 0.0)
            and self.contrast_range == (1.0, 1.0)
            and self.per_channel_gain_range == (1.0, 1.0)
        )


def color_jitter(img: np.ndarray, cfg: ColorJitterConfig, draw_seed: int) -> np.ndarray:
    if cfg.is_identity:
        return img.copy()
    rng = np.random.default_rng(derive_seed(cfg.seed, draw_seed))
    channels = img.shape[-1]
    delta = rng.uniform(*cfg.brightness_delta)
    contrast = rng.uniform(*cfg.contrast_range)
    gain = rng.uniform(*cfg.per_channel_gain_range, size=channels)
    out = img.astype(np.float64)
    if contrast != 1.0:
        mean = out.mean()
        out = (out - mean) * contrast + mean
    if np.any(gain != 1.0):
        out = out * gain
    out = out + delta
    return np.clip(out, 0.0, 1.0).astype(img.dtype)


def jitter_dataset(ds: TrialDataset, cfg: ColorJitterConfig, draw_seed: int) -> TrialDataset:
    """Jitter every image; labels, timestamps and sources are carried over unchanged."""
    samples = [
        replace(s, image=color_jitter(s.image, cfg, derive_seed(draw_seed, k))) if s.image is not None else s
        for k, s in enumerate(ds)
    ]
    return TrialDataset(samples, name=ds.name, normalization=ds.normalization)
