"""Timestamped pose datasets: synchronization, resampling, normalization,
splitting, and the CSV / manifest interchange format.

CSV header (mandatory, in this order)::

    t,x,y,z,qw,qx,qy,qz,source,image_path

Fields a sensor does not measure are left empty (an altimeter row only
carries ``z``). Extra trailing columns such as ``ptrace`` are preserved on
read in ``TimedSample.extra``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from uwpose.errors import DegenerateAxis, EmptyDataset, OutOfRange, ShapeMismatch
from uwpose.geom import Pose, slerp

CSV_HEADER = ["t", "x", "y", "z", "qw", "qx", "qy", "qz", "source", "image_path"]
SOURCES = (
    "camera",
    "usbl",
    "altimeter",
    "compass",
    "estimator",
    "augmented",
    "fused",
    "interpolated",
)
NAN3 = np.full(3, np.nan)
NAN4 = np.full(4, np.nan)


@dataclass(frozen=True, eq=False)
class TimedSample:
    timestamp: float
    source: str = "camera"
    position: np.ndarray = field(default_factory=lambda: NAN3.copy())
    orientation: np.ndarray = field(default_factory=lambda: NAN4.copy())
    image: np.ndarray | None = None
    image_path: str | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ShapeMismatch(f"unknown sample source {self.source!r}")
        object.__setattr__(self, "timestamp", float(self.timestamp))
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "orientation", np.asarray(self.orientation, dtype=float).reshape(4))

    @property
    def has_pose(self) -> bool:
        return bool(np.all(np.isfinite(self.position)) and np.all(np.isfinite(self.orientation)))

    @property
    def pose(self) -> Pose | None:
        return Pose(self.position, self.orientation) if self.has_pose else None


@dataclass(frozen=True)
class PoseNormalization:
    """Per-axis affine map of positions onto ``[-1, 1]``."""

    min: tuple[float, float, float]
    max: tuple[float, float, float]

    def __post_init__(self):
        lo, hi = np.asarray(self.min, dtype=float), np.asarray(self.max, dtype=float)
        if lo.shape != (3,) or hi.shape != (3,):
            raise ShapeMismatch("normalization bounds must be 3-vectors")
        if np.any(hi <= lo):
            axis = "xyz"[int(np.argmax(hi <= lo))]
            raise DegenerateAxis(f"axis {axis} has zero extent")

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.min, dtype=float)

    @property
    def span(self) -> np.ndarray:
        return np.asarray(self.max, dtype=float) - self.lo

    def normalize(self, positions) -> np.ndarray:
        return 2.0 * (np.asarray(positions, dtype=float) - self.lo) / self.span - 1.0

    def denormalize(self, positions) -> np.ndarray:
        return (np.asarray(positions, dtype=float) + 1.0) * 0.5 * self.span + self.lo

    def to_dict(self) -> dict:
        return {"min": [float(v) for v in self.min], "max": [float(v) for v in self.max]}

    @classmethod
    def from_dict(cls, d: dict | None) -> "PoseNormalization | None":
        if d is None:
            return None
        return cls(tuple(float(v) for v in d["min"]), tuple(float(v) for v in d["max"]))


class TrialDataset:
    """Time-ordered samples of one trial. Treated as immutable."""

    def __init__(
        self,
        samples: Iterable[TimedSample],
        name: str = "trial",
        normalization: PoseNormalization | None = None,
    ):
        self.samples: tuple[TimedSample, ...] = tuple(samples)
        self.name = name
        self.normalization = normalization
        ts = self.timestamps
        if len(ts) > 1 and np.any(np.diff(ts) <= 0):
            bad = int(np.argmax(np.diff(ts) <= 0))
            raise ShapeMismatch(f"timestamps not strictly increasing at index {bad + 1}")

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, i) -> TimedSample:
        return self.samples[i]

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([s.timestamp for s in self.samples], dtype=float)

    def pose_samples(self) -> list[TimedSample]:
        return [s for s in self.samples if s.has_pose]

    def poses(self) -> list[Pose]:
        return [s.pose for s in self.samples if s.has_pose]

    def positions(self) -> np.ndarray:
        return np.array([s.position for s in self.samples if s.has_pose]).reshape(-1, 3)

    def images(self) -> np.ndarray:
        return np.stack([s.image for s in self.samples if s.image is not None])

    def labelled(self) -> list[tuple[np.ndarray, Pose]]:
        """``(image, pose)`` pairs for samples carrying both."""
        return [(s.image, s.pose) for s in self.samples if s.image is not None and s.has_pose]

    def subset(self, indices: Sequence[int], name: str | None = None) -> "TrialDataset":
        idx = sorted(int(i) for i in indices)
        return TrialDataset(
            [self.samples[i] for i in idx], name=name or self.name, normalization=self.normalization
        )

    def with_normalization(self, norm: PoseNormalization | None) -> "TrialDataset":
        return TrialDataset(self.samples, name=self.name, normalization=norm)

    def by_source(self, *sources: str) -> "TrialDataset":
        return TrialDataset(
            [s for s in self.samples if s.source in sources],
            name=self.name,
            normalization=self.normalization,
        )


def merge(datasets: Sequence[TrialDataset], name: str = "merged", rate_hz: float = 5.0) -> TrialDataset:
    """Concatenate datasets, re-stamping each after the previous one ends.

    Each later dataset is shifted so its first sample lands one period after
    the last sample so far, keeping timestamps strictly increasing.
    """
    out: list[TimedSample] = []
    for ds in datasets:
        if not len(ds):
            continue
        shift = 0.0
        if out:
            shift = out[-1].timestamp + 1.0 / rate_hz - ds.samples[0].timestamp
        out.extend(replace(s, timestamp=s.timestamp + shift) for s in ds.samples)
    return TrialDataset(out, name=name)


def sync_interpolate(ds: TrialDataset, t: float) -> Pose:
    """Pose at time ``t``: linear in position, slerp in orientation.

    Only pose-bearing samples bracket ``t``; no extrapolation.
    """
    ps = ds.pose_samples()
    if not ps:
        raise EmptyDataset("dataset has no pose-bearing samples")
    ts = np.array([s.timestamp for s in ps])
    if t < ts[0] or t > ts[-1]:
        raise OutOfRange(f"t={t} outside [{ts[0]}, {ts[-1]}]")
    hi = int(np.searchsorted(ts, t, side="left"))
    if ts[hi] == t:
        return ps[hi].pose
    lo = hi - 1
    a, b = ps[lo], ps[hi]
    frac = (t - a.timestamp) / (b.timestamp - a.timestamp)
    pos = a.position + frac * (b.position - a.position)
    return Pose(pos, slerp(a.orientation, b.orientation, frac))


def resample(ds: TrialDataset, rate_hz: float) -> TrialDataset:
    """Put ``ds`` on a uniform grid from its first to its last timestamp.

    A grid point takes the nearest sample within half a period (re-stamped to
    the grid time); otherwise a pose-only ``interpolated`` sample is built.
    """
    if rate_hz <= 0:
        raise ShapeMismatch("rate_hz must be positive")
    if not len(ds):
        raise EmptyDataset("cannot resample an empty dataset")
    ts = ds.timestamps
    t0 = ts[0]
    period = 1.0 / rate_hz
    # tolerance absorbs rounding in timestamps like 0.1 * k
    n = int(math.floor((ts[-1] - t0) * rate_hz + 1e-9)) + 1
    half = 0.5 * period + 1e-9
    out = []
    for k in range(n):
        t = t0 + k / rate_hz
        j = int(np.searchsorted(ts, t))
        cands = [i for i in (j - 1, j) if 0 <= i < len(ts)]
        best = min(cands, key=lambda i: (abs(ts[i] - t), i))
        if abs(ts[best] - t) <= half:
            out.append(replace(ds.samples[best], timestamp=t))
        else:
            pose = sync_interpolate(ds, t)
            out.append(TimedSample(t, "interpolated", pose.position, pose.orientation))
    return TrialDataset(out, name=ds.name, normalization=ds.normalization)


def fit_normalization(ds: TrialDataset) -> PoseNormalization:
    pos = ds.positions()
    if len(pos) < 2:
        raise DegenerateAxis("need at least two positions to fit a normalization")
    lo, hi = pos.min(axis=0), pos.max(axis=0)
    return PoseNormalization(tuple(float(v) for v in lo), tuple(float(v) for v in hi))


def normalize_pose(p: Pose, n: PoseNormalization) -> Pose:
    return Pose(n.normalize(p.position), p.orientation)


def denormalize_pose(p: Pose, n: PoseNormalization) -> Pose:
    return Pose(n.denormalize(p.position), p.orientation)


def split(
    ds: TrialDataset, fractions: tuple[float, float, float] = (0.6, 0.2, 0.2), seed: int = 0
) -> tuple[TrialDataset, TrialDataset, TrialDataset]:
    """Seeded uniform random partition into train / validation / test."""
    f = np.asarray(fractions, dtype=float)
    if f.shape != (3,) or np.any(f < 0) or f[0] <= 0 or abs(f.sum() - 1.0) > 1e-9:
        raise ShapeMismatch("fractions must be three non-negative numbers summing to 1, train > 0")
    n = len(ds)
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(f[0] * n))
    n_val = int(round(f[1] * n))
    parts = (perm[:n_train], perm[n_train : n_train + n_val], perm[n_train + n_val :])
    names = ("train", "val", "test")
    return tuple(ds.subset(p, name=f"{ds.name}-{nm}") for p, nm in zip(parts, names))


# -- files -------------------------------------------------------------------


def _fmt(v: float) -> str:
    return "" if not np.isfinite(v) else repr(float(v))


def _parse(v: str) -> float:
    return float(v) if v.strip() else math.nan


def write_csv(
    ds: TrialDataset, path, extra_columns: Sequence[str] = (), image_paths: Sequence[str] | None = None
) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER + list(extra_columns))
        for k, s in enumerate(ds.samples):
            img_path = image_paths[k] if image_paths is not None else (s.image_path or "")
            row = [_fmt(s.timestamp), *map(_fmt, s.position), *map(_fmt, s.orientation), s.source, img_path]
            row += [_fmt(s.extra[c]) if c in s.extra else "" for c in extra_columns]
            w.writerow(row)


def read_csv(path, image_root=None, load_images: bool = True, name: str | None = None) -> TrialDataset:
    from uwpose.image import read_pnm

    path = Path(path)
    root = Path(image_root) if image_root is not None else path.parent
    samples = []
    with path.open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None or header[: len(CSV_HEADER)] != CSV_HEADER:
            raise ShapeMismatch(f"{path}: bad or missing CSV header {header!r}")
        extra_cols = header[len(CSV_HEADER) :]
        for line_no, row in enumerate(r, start=2):
            if len(row) != len(header):
                raise ShapeMismatch(f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}")
            vals = [_parse(v) for v in row[:8]]
            img_path = row[9] or None
            img = None
            if img_path and load_images:
                full = root / img_path
                img = np.load(full) if full.suffix == ".npy" else read_pnm(full)
            extra = {c: _parse(v) for c, v in zip(extra_cols, row[10:])}
            samples.append(TimedSample(vals[0], row[8], vals[1:4], vals[4:8], img, img_path, extra))
    return TrialDataset(samples, name=name or path.stem)


def write_dataset(ds: TrialDataset, out_dir, name: str | None = None, image_format: str = "ppm") -> Path:
    """Write CSV, images and manifest under ``out_dir``; return the manifest path."""
    from uwpose.image import write_pnm

    name = name or ds.name
    out_dir = Path(out_dir)
    img_dir = out_dir / "images"
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, s in enumerate(ds.samples):
        if s.image is None:
            paths.append("")
            continue
        img_dir.mkdir(exist_ok=True)
        if image_format == "npy":
            rel = f"images/{k:06d}.npy"
            np.save(out_dir / rel, s.image)
        else:
            ext = "pgm" if s.image.shape[2] == 1 else "ppm"
            rel = f"images/{k:06d}.{ext}"
            write_pnm(out_dir / rel, s.image)
        paths.append(rel)
    csv_path = out_dir / f"{name}.csv"
    write_csv(ds, csv_path, image_paths=paths)
    manifest = {
        "name": name,
        "csv_path": csv_path.name,
        "image_dir": "images",
        "normalization": ds.normalization.to_dict() if ds.normalization else None,
    }
    mpath = out_dir / f"{name}.manifest.json"
    write_json(mpath, manifest)
    return mpath


def read_manifest(path, load_images: bool = True) -> TrialDataset:
    path = Path(path)
    m = json.loads(path.read_text())
    for key in ("name", "csv_path", "image_dir", "normalization"):
        if key not in m:
            raise ShapeMismatch(f"{path}: manifest missing key {key!r}")
    ds = read_csv(path.parent / m["csv_path"], image_root=path.parent, load_images=load_images, name=m["name"])
    return ds.with_normalization(PoseNormalization.from_dict(m["normalization"]))


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
