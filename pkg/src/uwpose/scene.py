"""Procedural underwater scenes, a pinhole ray-caster, survey trajectories,
and rendered trials.

World frame: z up, depths negative. The camera frame is x forward, y left,
z up (see ``geom``); image columns run to the camera's right (-y) and rows
run downward (-z).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from uwpose.data import TimedSample, TrialDataset
from uwpose.errors import EmptyScene, DomainError
from uwpose.geom import Pose, look_at, quat_normalize, quat_to_matrix

FRAME_RATE_HZ = 5.0
SHADE_AMBIENT = 0.35


@dataclass(frozen=True)
class Primitive:
    """Vertical cylinder or axis-aligned box.

    ``dims`` is ``(diameter, diameter, height)`` for a cylinder and the full
    edge lengths for a box.
    """

    shape: Literal["cylinder", "box"]
    center: tuple[float, float, float]
    dims: tuple[float, float, float]
    base_color: tuple[float, float, float]
    texture_seed: int = 0
    texture_amplitude: float = 0.35
    texture_frequency: float = 3.0

    def __post_init__(self):
        if self.shape not in ("cylinder", "box"):
            raise DomainError(f"unknown primitive shape {self.shape!r}")
        if min(self.dims) <= 0:
            raise DomainError("primitive dims must be strictly positive")

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.center) - 0.5 * np.asarray(self.dims)

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.center) + 0.5 * np.asarray(self.dims)

    def contains(self, point, margin: float = 0.0) -> bool:
        p = np.asarray(point, dtype=float)
        c = np.asarray(self.center)
        half = 0.5 * np.asarray(self.dims) + margin
        if self.shape == "box":
            return bool(np.all(np.abs(p - c) <= half))
        return bool(abs(p[2] - c[2]) <= half[2] and math.hypot(p[0] - c[0], p[1] - c[1]) <= half[0])


@dataclass(frozen=True)
class SceneSpec:
    primitives: tuple[Primitive, ...]
    background_color: tuple[float, float, float] = (0.05, 0.25, 0.3)
    bounds: tuple[tuple[float, float, float], tuple[float, float, float]] = (
        (-30.0, -24.0, -12.0),
        (30.0, 24.0, 0.0),
    )
    name: str = "custom"

    def __post_init__(self):
        lo, hi = np.asarray(self.bounds[0]), np.asarray(self.bounds[1])
        for prim in self.primitives:
            if np.any(prim.lower < lo) or np.any(prim.upper > hi):
                raise DomainError(f"primitive at {prim.center} extends outside scene bounds")

    def extent(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.primitives:
            raise EmptyScene("scene has no primitives")
        lo = np.min([p.lower for p in self.primitives], axis=0)
        hi = np.max([p.upper for p in self.primitives], axis=0)
        return lo, hi

    def centroid(self) -> np.ndarray:
        lo, hi = self.extent()
        return 0.5 * (lo + hi)

    def horizontal_radius(self) -> float:
        """Radius of the smallest centroid-centred vertical cylinder enclosing the structure."""
        c = self.centroid()
        r = 0.0
        for prim in self.primitives:
            dx, dy = prim.center[0] - c[0], prim.center[1] - c[1]
            if prim.shape == "cylinder":
                r = max(r, math.hypot(dx, dy) + 0.5 * prim.dims[0])
            else:
                hx, hy = 0.5 * prim.dims[0], 0.5 * prim.dims[1]
                r = max(r, math.hypot(abs(dx) + hx, abs(dy) + hy))
        return r


@dataclass(frozen=True)
class CameraIntrinsics:
    width: int = 64
    height: int = 64
    horizontal_fov: float = math.pi / 2

    def __post_init__(self):
        if self.width < 16 or self.height < 16:
            raise DomainError("camera must be at least 16x16 pixels")
        if not 0 < self.horizontal_fov < math.pi:
            raise DomainError("horizontal_fov must lie in (0, pi)")


@dataclass(frozen=True)
class WaterParams:
    """Water and image degradation.

    ``turbidity`` is the exponential attenuation coefficient (1/m). The
    brightness terms emulate exposure drift between views, and
    ``background_artifacts`` adds low-frequency blotches to open-water
    pixels like those left by imperfect view synthesis.
    """

    turbidity: float = 0.05
    brightness_bias: float = 0.0
    brightness_jitter_std: float = 0.0
    noise_std: float = 0.0
    background_artifacts: float = 0.0

    def __post_init__(self):
        if self.turbidity < 0 or self.noise_std < 0 or self.brightness_jitter_std < 0:
            raise DomainError("turbidity and noise levels must be non-negative")


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts]).generate_state(1)[0])


# -- presets -----------------------------------------------------------------

PRESETS = ("tcoms_structure", "sji_pillar")


def build_preset(name: str) -> SceneSpec:
    if name == "tcoms_structure":
        return _tcoms_structure()
    if name == "sji_pillar":
        return _sji_pillar()
    raise DomainError(f"unknown scene preset {name!r}; choose from {PRESETS}")


def _tcoms_structure() -> SceneSpec:
    # six piles of three barrels in a 2 x 3 grid, 3.9 x 4.6 x 3.0 m overall
    rng = np.random.default_rng(2024)
    barrel_d, barrel_h = 0.6, 1.0
    xs, ys = (-1.65, 1.65), (-2.0, 0.0, 2.0)
    # every pile gets its own shade of yellow so that the layout reads differently from each side
    pile_shades = (
        (1.00, 0.86, 0.10),
        (0.92, 0.62, 0.08),
        (0.85, 0.85, 0.25),
        (0.98, 0.74, 0.30),
        (0.78, 0.70, 0.05),
        (1.00, 0.95, 0.45),
    )
    prims = []
    seed = 100
    for x in xs:
        for y in ys:
            shade = np.array(pile_shades[len(prims) // 3])
            for level in range(3):
                tint = rng.uniform(-0.04, 0.04, size=3)
                color = tuple(float(c) for c in np.clip(shade + tint, 0, 1))
                prims.append(
                    Primitive(
                        "cylinder",
                        (x, y, -4.5 + barrel_h * (level + 0.5)),
                        (barrel_d, barrel_d, barrel_h),
                        color,
                        texture_seed=seed,
                        texture_amplitude=0.3,
                        texture_frequency=1.5,
                    )
                )
                seed += 1
    pipe = 0.2
    pipe_color = (0.35, 0.35, 0.33)
    gap_y = 2.0 - barrel_d
    gap_x = 3.3 - barrel_d
    # pipes at differing heights so that opposite sides do not look alike
    for x, z, yc in ((-1.65, -2.5, -1.0), (-1.65, -1.8, 1.0), (1.65, -3.0, -1.0), (1.65, -4.0, 1.0)):
        prims.append(Primitive("box", (x, yc, z), (pipe, gap_y, pipe), pipe_color, texture_seed=seed))
        seed += 1
    for y, z in ((-2.0, -3.5), (2.0, -2.2), (0.0, -4.0)):
        prims.append(Primitive("box", (0.0, y, z), (gap_x, pipe, pipe), pipe_color, texture_seed=seed))
        seed += 1
    return SceneSpec(tuple(prims), background_color=(0.06, 0.32, 0.36), name="tcoms_structure")


def _sji_pillar() -> SceneSpec:
    pillar = Primitive(
        "cylinder",
        (0.0, 0.0, -3.5),
        (0.5, 0.5, 5.0),
        (0.22, 0.21, 0.17),
        texture_seed=7,
        texture_amplitude=0.9,
        texture_frequency=14.0,
    )
    return SceneSpec((pillar,), background_color=(0.15, 0.3, 0.22), name="sji_pillar")


# -- ray casting ---------------------------------------------------------------


def camera_rays(pose: Pose, cam: CameraIntrinsics) -> np.ndarray:
    """Unit world-frame ray directions, shape ``(height * width, 3)``."""
    tan_h = math.tan(0.5 * cam.horizontal_fov)
    tan_v = tan_h * cam.height / cam.width
    u = ((np.arange(cam.width) + 0.5) / cam.width * 2.0 - 1.0) * tan_h
    v = ((np.arange(cam.height) + 0.5) / cam.height * 2.0 - 1.0) * tan_v
    vv, uu = np.meshgrid(v, u, indexing="ij")
    d = np.stack([np.ones_like(uu), -uu, -vv], axis=-1).reshape(-1, 3)
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d @ quat_to_matrix(quat_normalize(pose.orientation)).T


def intersect(prim: Primitive, origin: np.ndarray, dirs: np.ndarray, t_min: float = 1e-6):
    """Nearest hit distance (inf on miss) and outward normals for each ray."""
    if prim.shape == "box":
        return _intersect_box(prim, origin, dirs, t_min)
    return _intersect_cylinder(prim, origin, dirs, t_min)


def _intersect_box(prim, origin, dirs, t_min):
    lo, hi = prim.lower, prim.upper
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t0 = (lo - origin) * inv
        t1 = (hi - origin) * inv
    near = np.minimum(t0, t1)
    far = np.maximum(t0, t1)
    near = np.where(np.isnan(near), -np.inf, near)
    far = np.where(np.isnan(far), np.inf, far)
    t_near = near.max(axis=1)
    t_far = far.min(axis=1)
    hit = (t_near <= t_far) & (t_near > t_min)
    t = np.where(hit, t_near, np.inf)
    axis = near.argmax(axis=1)
    normals = np.zeros_like(dirs)
    normals[np.arange(len(dirs)), axis] = -np.sign(dirs[np.arange(len(dirs)), axis])
    return t, normals


def _intersect_cylinder(prim, origin, dirs, t_min):
    cx, cy, cz = prim.center
    r = 0.5 * prim.dims[0]
    hz = 0.5 * prim.dims[2]
    ox, oy, oz = origin[0] - cx, origin[1] - cy, origin[2] - cz
    dx, dy, dz = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    a = dx * dx + dy * dy
    b = 2.0 * (ox * dx + oy * dy)
    c = ox * ox + oy * oy - r * r
    disc = b * b - 4.0 * a * c
    t_side = np.full(len(dirs), np.inf)
    ok = (disc >= 0) & (a > 1e-15)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        for root in ((-b - sq) / (2 * a), (-b + sq) / (2 * a)):
            z = oz + root * dz
            good = ok & (root > t_min) & (np.abs(z) <= hz) & (root < t_side)
            t_side = np.where(good, root, t_side)
        t_cap = np.full(len(dirs), np.inf)
        cap_sign = np.zeros(len(dirs))
        for sgn in (1.0, -1.0):
            tc = (sgn * hz - oz) / dz
            px, py = ox + tc * dx, oy + tc * dy
            good = (tc > t_min) & (px * px + py * py <= r * r) & (tc < t_cap)
            t_cap = np.where(good, tc, t_cap)
            cap_sign = np.where(good, sgn, cap_sign)
    use_cap = t_cap < t_side
    t = np.where(use_cap, t_cap, t_side)
    normals = np.zeros_like(dirs)
    fin = np.isfinite(t)
    px = ox + np.where(fin, t, 0.0) * dx
    py = oy + np.where(fin, t, 0.0) * dy
    normals[:, 0] = np.where(use_cap, 0.0, px / r)
    normals[:, 1] = np.where(use_cap, 0.0, py / r)
    normals[:, 2] = np.where(use_cap, cap_sign, 0.0)
    return t, normals


@functools.lru_cache(maxsize=512)
def _noise_tables(seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    return rng.random(256), rng.permutation(256)


def value_noise(points: np.ndarray, seed: int, frequency: float) -> np.ndarray:
    """Seeded 3-D value noise in ``[0, 1]``, two octaves, trilinear smoothstep."""
    table, perm = _noise_tables(int(seed))
    out = np.zeros(len(points))
    for octave, weight in ((1.0, 0.65), (2.0, 0.35)):
        p = points * (frequency * octave) + 17.0 * octave
        base = np.floor(p)
        f = p - base
        f = f * f * (3.0 - 2.0 * f)
        i = base.astype(np.int64)
        acc = np.zeros(len(points))
        for cx in (0, 1):
            wx = f[:, 0] if cx else 1.0 - f[:, 0]
            hx = perm[(i[:, 0] + cx) & 255]
            for cy in (0, 1):
                wy = f[:, 1] if cy else 1.0 - f[:, 1]
                hy = perm[(hx + i[:, 1] + cy) & 255]
                for cz in (0, 1):
                    wz = f[:, 2] if cz else 1.0 - f[:, 2]
                    acc += wx * wy * wz * table[perm[(hy + i[:, 2] + cz) & 255]]
        out += weight * acc
    return out


def render(
    scene: SceneSpec,
    pose: Pose,
    cam: CameraIntrinsics,
    water: WaterParams = WaterParams(),
    rng_seed: int = 0,
) -> np.ndarray:
    """Render an RGB float32 image of ``scene`` seen from ``pose``.

    Nearest-hit shading with headlight Lambert term and texture, blended
    toward the water colour by ``exp(-turbidity * range)``, then global
    brightness offset, per-pixel Gaussian noise and clamping.
    """
    origin = np.asarray(pose.position, dtype=float)
    dirs = camera_rays(pose, cam)
    n = len(dirs)
    best_t = np.full(n, np.inf)
    color = np.zeros((n, 3))
    bg = np.asarray(scene.background_color, dtype=float)
    for prim in scene.primitives:
        t, normals = intersect(prim, origin, dirs)
        closer = t < best_t
        if not np.any(closer):
            continue
        idx = np.nonzero(closer)[0]
        best_t[idx] = t[idx]
        cos = np.abs(np.sum(normals[idx] * dirs[idx], axis=1))
        shade = SHADE_AMBIENT + (1.0 - SHADE_AMBIENT) * cos
        if prim.texture_amplitude > 0:
            hits = origin + t[idx, None] * dirs[idx]
            tex = value_noise(hits, prim.texture_seed, prim.texture_frequency)
            shade = shade * (1.0 + prim.texture_amplitude * (2.0 * tex - 1.0))
        color[idx] = np.asarray(prim.base_color) * shade[:, None]

    hit = np.isfinite(best_t)
    weight = np.exp(-water.turbidity * np.where(hit, best_t, 0.0))
    out = np.where(hit[:, None], color * weight[:, None] + (1.0 - weight[:, None]) * bg, bg)

    rng = np.random.default_rng(rng_seed)
    if water.background_artifacts > 0 and np.any(~hit):
        blot = value_noise(dirs[~hit] * 2.0, derive_seed(rng_seed, 1), 1.5)
        out[~hit] += water.background_artifacts * (2.0 * blot[:, None] - 1.0)
    offset = water.brightness_bias
    if water.brightness_jitter_std > 0:
        offset += rng.normal(0.0, water.brightness_jitter_std)
    out = out + offset
    if water.noise_std > 0:
        out = out + rng.normal(0.0, water.noise_std, size=out.shape)
    img = np.clip(out, 0.0, 1.0).reshape(cam.height, cam.width, 3)
    return img.astype(np.float32)


# -- trajectories --------------------------------------------------------------


def lawnmower_trajectory(
    scene: SceneSpec,
    depth: float,
    standoff: float,
    line_spacing: float,
    sample_spacing: float,
    orientation_mode: Literal["horizontal", "vertical"] = "horizontal",
    n_passes: int = 3,
) -> list[Pose]:
    """Survey passes on a ring ``standoff`` metres outside the structure.

    Horizontal mode stacks ``n_passes`` full laps centred on ``depth`` and
    ``line_spacing`` apart vertically, alternating direction. Vertical mode
    places stations ``line_spacing`` apart (chord length) around the ring and
    sweeps each from ``depth`` down to the structure's bottom, alternating up
    and down. Consecutive samples of a pass are ``sample_spacing`` apart in a
    straight line. Every camera is level and faces the structure centroid.
    """
    if standoff <= 0 or line_spacing <= 0 or sample_spacing <= 0:
        raise DomainError("standoff and spacings must be positive")
    if not scene.primitives:
        raise EmptyScene("cannot plan a survey around an empty scene")
    centre = scene.centroid()
    radius = scene.horizontal_radius() + standoff
    if sample_spacing >= 2 * radius or line_spacing >= 2 * radius:
        raise DomainError("spacing larger than the survey ring diameter")

    def ring_point(phi: float, z: float) -> Pose:
        pos = np.array([centre[0] + radius * math.cos(phi), centre[1] + radius * math.sin(phi), z])
        return Pose(pos, look_at(pos, centre))

    poses: list[Pose] = []
    if orientation_mode == "horizontal":
        step = 2.0 * math.asin(sample_spacing / (2.0 * radius))
        per_pass = math.ceil(2.0 * math.pi / step - 1e-12)
        phi = 0.0
        for k in range(n_passes):
            z = depth + (k - 0.5 * (n_passes - 1)) * line_spacing
            sign = 1.0 if k % 2 == 0 else -1.0
            start = phi
            for j in range(per_pass):
                phi = start + sign * j * step
                poses.append(ring_point(phi, z))
    elif orientation_mode == "vertical":
        bottom = scene.extent()[0][2]
        if depth <= bottom:
            raise DomainError("vertical survey must start above the structure bottom")
        step = 2.0 * math.asin(line_spacing / (2.0 * radius))
        stations = math.ceil(2.0 * math.pi / step - 1e-12)
        per_pass = int(math.floor((depth - bottom) / sample_spacing + 1e-9)) + 1
        for k in range(stations):
            zs = [depth - j * sample_spacing for j in range(per_pass)]
            if k % 2:
                zs.reverse()
            for z in zs:
                poses.append(ring_point(k * step, z))
    else:
        raise DomainError(f"unknown orientation mode {orientation_mode!r}")
    return poses


def generate_trial(
    scene: SceneSpec,
    trajectory: Sequence[Pose],
    cam: CameraIntrinsics,
    water: WaterParams,
    seed: int,
    t0: float = 0.0,
    rate_hz: float = FRAME_RATE_HZ,
    source: str = "camera",
    name: str = "trial",
) -> TrialDataset:
    """Render one image per pose and stamp them at ``rate_hz``."""
    if len(trajectory) == 0:
        raise DomainError("trajectory is empty")
    samples = []
    for k, pose in enumerate(trajectory):
        img = render(scene, pose, cam, water, derive_seed(seed, k))
        samples.append(
            TimedSample(
                timestamp=t0 + k / rate_hz,
                source=source,
                position=pose.position,
                orientation=pose.orientation,
                image=img,
            )
        )
    return TrialDataset(samples, name=name)
