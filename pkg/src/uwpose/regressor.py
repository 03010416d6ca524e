"""Small convolutional pose regressor in plain numpy.

Layers: conv blocks (same padding, ReLU) -> fully connected hidden layers
(ReLU, inverted dropout) -> linear 7-unit head. The first three outputs are
normalized position coordinates, the last four an unnormalized quaternion.
Backpropagation is written out by hand; convolutions go through im2col.
"""

from __future__ import annotations

import base64
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Literal, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from uwpose.augment import ColorJitterConfig, color_jitter
from uwpose.data import PoseNormalization, TrialDataset, fit_normalization
from uwpose.errors import (
    ConfigError,
    DivergedTraining,
    EmptyDataset,
    NoDropoutLayers,
    ShapeMismatch,
    ZeroNormQuaternion,
)
from uwpose.geom import Pose, angular_distance, quat_normalize
from uwpose.loss import LossConfig, batch_loss
from uwpose.scene import derive_seed

CHECKPOINT_FORMAT = "uwpose-regressor"
CHECKPOINT_VERSION = 1
PREDICT_CHUNK = 256


@dataclass(frozen=True)
class ConvBlock:
    filters: int
    kernel: int = 3
    stride: int = 2


@dataclass(frozen=True)
class NetConfig:
    """Architecture. ``input`` is (width, height, channels)."""

    input: tuple[int, int, int] = (64, 64, 3)
    conv_blocks: tuple[ConvBlock, ...] = (ConvBlock(8), ConvBlock(16), ConvBlock(32))
    fc_dims: tuple[int, ...] = (128,)
    dropout_rate: float = 0.2
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "input", tuple(int(v) for v in self.input))
        blocks = tuple(b if isinstance(b, ConvBlock) else ConvBlock(**b) for b in self.conv_blocks)
        object.__setattr__(self, "conv_blocks", blocks)
        object.__setattr__(self, "fc_dims", tuple(int(v) for v in self.fc_dims))
        if len(self.input) != 3 or min(self.input) < 1 or self.input[2] not in (1, 3):
            raise ConfigError(f"bad input dims {self.input}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must lie in [0, 1)")
        for b in blocks:
            if b.filters < 1 or b.kernel < 1 or b.kernel % 2 == 0 or b.stride < 1:
                raise ConfigError(f"bad conv block {b}")
        if any(d < 1 for d in self.fc_dims):
            raise ConfigError("fc dims must be positive")
        self.feature_shapes()

    def feature_shapes(self) -> list[tuple[int, int, int]]:
        """(height, width, channels) of the input and after every conv block."""
        w, h, c = self.input
        shapes = [(h, w, c)]
        for b in self.conv_blocks:
            pad = b.kernel // 2
            h = (h + 2 * pad - b.kernel) // b.stride + 1
            w = (w + 2 * pad - b.kernel) // b.stride + 1
            if h < 1 or w < 1:
                raise ConfigError(f"input {self.input} too small for conv stack")
            shapes.append((h, w, b.filters))
        return shapes

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return self.feature_shapes()[0]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["input"] = list(self.input)
        d["fc_dims"] = list(self.fc_dims)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetConfig":
        return cls(
            input=tuple(d["input"]),
            conv_blocks=tuple(ConvBlock(**b) for b in d["conv_blocks"]),
            fc_dims=tuple(d["fc_dims"]),
            dropout_rate=float(d["dropout_rate"]),
            seed=int(d["seed"]),
        )


@dataclass
class NetParams:
    config: NetConfig
    arrays: dict[str, np.ndarray]
    normalization: PoseNormalization | None = None

    def copy(self) -> "NetParams":
        return NetParams(self.config, {k: v.copy() for k, v in self.arrays.items()}, self.normalization)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.arrays.values())

    @property
    def n_parameters(self) -> int:
        return sum(v.size for v in self.arrays.values())

    def positions_to_meters(self, p_norm: np.ndarray) -> np.ndarray:
        return p_norm if self.normalization is None else self.normalization.denormalize(p_norm)

    def position_scale(self) -> np.ndarray:
        """d(meters)/d(normalized coordinate) per axis."""
        return np.ones(3) if self.normalization is None else 0.5 * self.normalization.span


def init_params(cfg: NetConfig, normalization: PoseNormalization | None = None) -> NetParams:
    """Seeded uniform init with fan-in scaling (He-uniform for ReLU layers).

    Head weights start small and the quaternion bias at the identity so the
    initial quaternion output is well away from zero norm.
    """
    rng = np.random.default_rng(cfg.seed)
    arrays: dict[str, np.ndarray] = {}
    shapes = cfg.feature_shapes()
    c_in = shapes[0][2]
    for i, b in enumerate(cfg.conv_blocks):
        fan_in = c_in * b.kernel * b.kernel
        lim = math.sqrt(6.0 / fan_in)
        arrays[f"conv{i}.w"] = rng.uniform(-lim, lim, size=(b.filters, c_in, b.kernel, b.kernel))
        arrays[f"conv{i}.b"] = np.zeros(b.filters)
        c_in = b.filters
    h, w, c = shapes[-1]
    n_in = h * w * c
    for j, n_out in enumerate(cfg.fc_dims):
        lim = math.sqrt(6.0 / n_in)
        arrays[f"fc{j}.w"] = rng.uniform(-lim, lim, size=(n_in, n_out))
        arrays[f"fc{j}.b"] = np.zeros(n_out)
        n_in = n_out
    lim = math.sqrt(1.0 / n_in)
    arrays["head.w"] = rng.uniform(-lim, lim, size=(n_in, 7))
    arrays["head.b"] = np.array([0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0])
    return NetParams(cfg, arrays, normalization)


def zero_params(cfg: NetConfig, normalization: PoseNormalization | None = None) -> NetParams:
    p = init_params(cfg, normalization)
    return NetParams(cfg, {k: np.zeros_like(v) for k, v in p.arrays.items()}, normalization)


# -- layers --------------------------------------------------------------------


def _conv_forward(x, w, b, stride):
    f, c, k, _ = w.shape
    pad = k // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    win = sliding_window_view(xp, (k, k), axis=(1, 2))[:, ::stride, ::stride]
    n, ho, wo = win.shape[:3]
    cols = win.reshape(n * ho * wo, c * k * k)
    out = cols @ w.reshape(f, -1).T + b
    return out.reshape(n, ho, wo, f), cols


def _conv_backward(dout, cols, x_shape, w, stride):
    f, c, k, _ = w.shape
    pad = k // 2
    n, ho, wo, _ = dout.shape
    d = dout.reshape(-1, f)
    dw = (d.T @ cols).reshape(w.shape)
    db = d.sum(axis=0)
    dcols = (d @ w.reshape(f, -1)).reshape(n, ho, wo, c, k, k)
    _, h, wd, _ = x_shape
    dxp = np.zeros((n, h + 2 * pad, wd + 2 * pad, c))
    for i in range(k):
        for j in range(k):
            dxp[:, i : i + stride * ho : stride, j : j + stride * wo : stride, :] += dcols[..., i, j]
    return dxp[:, pad : pad + h, pad : pad + wd], dw, db


def _trunk(params: NetParams, x: np.ndarray, keep_cache: bool):
    cfg = params.config
    h = 2.0 * x - 1.0
    cache = []
    for i, b in enumerate(cfg.conv_blocks):
        z, cols = _conv_forward(h, params.arrays[f"conv{i}.w"], params.arrays[f"conv{i}.b"], b.stride)
        if keep_cache:
            cache.append((h.shape, cols, z > 0))
        h = np.maximum(z, 0.0)
    return h.reshape(len(h), -1), cache


def _head(params: NetParams, feat: np.ndarray, masks, keep_cache: bool):
    cfg = params.config
    h = feat
    cache = []
    for j in range(len(cfg.fc_dims)):
        z = h @ params.arrays[f"fc{j}.w"] + params.arrays[f"fc{j}.b"]
        a = np.maximum(z, 0.0)
        m = None if masks is None else masks[j]
        if m is not None:
            a = a * m
        if keep_cache:
            cache.append((h, z > 0, m))
        h = a
    out = h @ params.arrays["head.w"] + params.arrays["head.b"]
    if keep_cache:
        cache.append(h)
    return out, cache


def _backward(params: NetParams, trunk_cache, head_cache, dout: np.ndarray) -> dict[str, np.ndarray]:
    cfg = params.config
    grads: dict[str, np.ndarray] = {}
    h_last = head_cache[-1]
    grads["head.w"] = h_last.T @ dout
    grads["head.b"] = dout.sum(axis=0)
    dh = dout @ params.arrays["head.w"].T
    for j in reversed(range(len(cfg.fc_dims))):
        h_in, active, m = head_cache[j]
        if m is not None:
            dh = dh * m
        dz = dh * active
        grads[f"fc{j}.w"] = h_in.T @ dz
        grads[f"fc{j}.b"] = dz.sum(axis=0)
        dh = dz @ params.arrays[f"fc{j}.w"].T
    if cfg.conv_blocks:
        hh, ww, cc = cfg.feature_shapes()[-1]
        dh = dh.reshape(-1, hh, ww, cc)
    for i in reversed(range(len(cfg.conv_blocks))):
        x_shape, cols, active = trunk_cache[i]
        dz = dh * active
        dh, grads[f"conv{i}.w"], grads[f"conv{i}.b"] = _conv_backward(
            dz, cols, x_shape, params.arrays[f"conv{i}.w"], cfg.conv_blocks[i].stride
        )
    return grads


def _dropout_masks(cfg: NetConfig, n: int, rng: np.random.Generator) -> list[np.ndarray] | None:
    if cfg.dropout_rate == 0.0:
        return None
    keep = 1.0 - cfg.dropout_rate
    return [(rng.random((n, d)) < keep) / keep for d in cfg.fc_dims]


def _as_batch(params: NetParams, imgs) -> np.ndarray:
    x = np.asarray(imgs, dtype=float)
    if x.ndim == 3:
        x = x[None]
    if x.shape[1:] != params.config.image_shape:
        raise ShapeMismatch(f"image shape {x.shape[1:]} does not match network input {params.config.image_shape}")
    return x


# -- inference -----------------------------------------------------------------


def forward(params: NetParams, img: np.ndarray, dropout: int | None = None) -> np.ndarray:
    """Raw 7-vector for one image. ``dropout`` is ``None`` (off) or an integer
    seed that fixes the dropout masks."""
    x = _as_batch(params, img)
    if x.shape[0] != 1:
        raise ShapeMismatch("forward takes a single image")
    masks = None if dropout is None else _dropout_masks(params.config, 1, np.random.default_rng(dropout))
    feat, _ = _trunk(params, x, False)
    out, _ = _head(params, feat, masks, False)
    return out[0]


def predict_raw(params: NetParams, imgs) -> np.ndarray:
    """Dropout-off outputs, shape (N, 7), positions still normalized."""
    x = _as_batch(params, imgs)
    outs = []
    for start in range(0, len(x), PREDICT_CHUNK):
        feat, _ = _trunk(params, x[start : start + PREDICT_CHUNK], False)
        outs.append(_head(params, feat, None, False)[0])
    return np.concatenate(outs) if outs else np.zeros((0, 7))


def predict_poses(params: NetParams, imgs) -> list[Pose]:
    out = predict_raw(params, imgs)
    pos = params.positions_to_meters(out[:, :3])
    return [Pose(p, quat_normalize(q)) for p, q in zip(pos, out[:, 3:])]


# -- training ------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    loss: LossConfig = field(default_factory=LossConfig)
    learning_rate: float = 1e-3
    weight_decay: float = 0.0
    batch_size: int = 32
    max_epochs: int = 200
    early_stop_patience: int = 20
    optimizer: Literal["sgd", "adam"] = "adam"
    momentum: float = 0.9
    jitter: ColorJitterConfig | None = None
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.loss, dict):
            object.__setattr__(self, "loss", LossConfig(**self.loss))
        if isinstance(self.jitter, dict):
            object.__setattr__(self, "jitter", ColorJitterConfig(**self.jitter))
        if not self.learning_rate > 0 or self.weight_decay < 0:
            raise ConfigError("learning_rate must be positive and weight_decay non-negative")
        if self.batch_size < 1 or self.max_epochs < 1 or self.early_stop_patience < 1:
            raise ConfigError("batch_size, max_epochs and early_stop_patience must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError("momentum must lie in [0, 1)")


def _stack_labels(batch: Sequence[tuple[np.ndarray, Pose]]):
    imgs = np.stack([np.asarray(img, dtype=float) for img, _ in batch])
    pos = np.array([p.position for _, p in batch], dtype=float)
    quat = np.array([p.orientation for _, p in batch], dtype=float)
    return imgs, pos, quat


def _loss_grad_arrays(params, x, pos, quat, loss_cfg, masks):
    feat, tcache = _trunk(params, x, True)
    out, hcache = _head(params, feat, masks, True)
    p_m = params.positions_to_meters(out[:, :3])
    losses, dp, dq = batch_loss(p_m, out[:, 3:], pos, quat, loss_cfg)
    n = len(x)
    dout = np.concatenate([dp * params.position_scale(), dq], axis=1) / n
    return float(losses.mean()), _backward(params, tcache, hcache, dout)


def loss_and_gradients(
    params: NetParams,
    batch: Sequence[tuple[np.ndarray, Pose]],
    cfg: TrainConfig,
    dropout: int | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean training loss over ``batch`` and its gradient for every parameter.

    Positions are compared in meters (outputs are denormalized with the
    network's normalization). ``dropout`` seeds fixed masks; ``None`` is off.
    Weight decay is not included here; the optimizer applies it.
    """
    if len(batch) == 0:
        raise EmptyDataset("empty batch")
    x, pos, quat = _stack_labels(batch)
    x = _as_batch(params, x)
    masks = None if dropout is None else _dropout_masks(params.config, len(x), np.random.default_rng(dropout))
    return _loss_grad_arrays(params, x, pos, quat, cfg.loss, masks)


class _Optimizer:
    def __init__(self, cfg: TrainConfig, params: NetParams):
        self.cfg = cfg
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.arrays.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.arrays.items()}

    def step(self, params: NetParams, grads: dict[str, np.ndarray]) -> None:
        cfg = self.cfg
        self.t += 1
        for k, w in params.arrays.items():
            g = grads[k]
            if cfg.weight_decay > 0 and k.endswith(".w"):
                g = g + cfg.weight_decay * w
            if cfg.optimizer == "adam":
                self.m[k] = 0.9 * self.m[k] + 0.1 * g
                self.v[k] = 0.999 * self.v[k] + 0.001 * g * g
                m_hat = self.m[k] / (1.0 - 0.9**self.t)
                v_hat = self.v[k] / (1.0 - 0.999**self.t)
                w -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + 1e-8)
            else:
                self.m[k] = cfg.momentum * self.m[k] + g
                w -= cfg.learning_rate * self.m[k]


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    initial_val_loss: float = math.nan
    best_epoch: int = 0
    best_val_loss: float = math.inf
    stopped_epoch: int = 0
    seconds: float = 0.0

    def to_dict(self, include_time: bool = False) -> dict:
        d = {
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            "initial_val_loss": self.initial_val_loss,
            "best_epoch": self.best_epoch,
            "best_val_loss": self.best_val_loss,
            "stopped_epoch": self.stopped_epoch,
        }
        if include_time:
            d["seconds"] = self.seconds
        return d


def validation_d_loss(params: NetParams, imgs, pos, quat, d: float) -> float:
    """Mean d-loss with the exact angle, the loss-agnostic selection metric."""
    out = predict_raw(params, imgs)
    p_m = params.positions_to_meters(out[:, :3])
    lp = np.linalg.norm(p_m - pos, axis=1)
    try:
        theta = angular_distance(quat, quat_normalize(out[:, 3:]))
    except ZeroNormQuaternion as e:
        raise DivergedTraining(f"validation produced a zero-norm quaternion: {e}") from e
    return float(np.mean(lp + d * theta))


def _arrays(ds: TrialDataset):
    pairs = ds.labelled()
    if not pairs:
        raise EmptyDataset(f"dataset {ds.name!r} has no labelled images")
    return _stack_labels(pairs)


def train(
    train_ds: TrialDataset,
    val_ds: TrialDataset,
    net_cfg: NetConfig,
    train_cfg: TrainConfig,
    log: Callable[[str], None] | None = None,
) -> tuple[NetParams, TrainHistory]:
    """Mini-batch training with early stopping on validation d-loss.

    Returns the parameters of the best validation epoch. Normalization comes
    from ``train_ds`` (fitted on it when not already attached).
    """
    started = time.perf_counter()
    norm = train_ds.normalization or fit_normalization(train_ds)
    x_tr, p_tr, q_tr = _arrays(train_ds)
    x_va, p_va, q_va = _arrays(val_ds)
    params = init_params(net_cfg, norm)
    x_tr = _as_batch(params, x_tr)
    x_va = _as_batch(params, x_va)
    rng = np.random.default_rng(train_cfg.seed)
    opt = _Optimizer(train_cfg, params)
    eval_d = train_cfg.loss.d

    hist = TrainHistory()
    hist.initial_val_loss = validation_d_loss(params, x_va, p_va, q_va, eval_d)
    best = params.copy()
    n = len(x_tr)
    for epoch in range(1, train_cfg.max_epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, train_cfg.batch_size):
            idx = order[start : start + train_cfg.batch_size]
            xb = x_tr[idx]
            if train_cfg.jitter is not None:
                xb = np.stack(
                    [color_jitter(img, train_cfg.jitter, derive_seed(epoch, int(i))) for img, i in zip(xb, idx)]
                )
            masks = _dropout_masks(net_cfg, len(idx), rng)
            try:
                loss, grads = _loss_grad_arrays(params, xb, p_tr[idx], q_tr[idx], train_cfg.loss, masks)
            except ZeroNormQuaternion as e:
                raise DivergedTraining(f"epoch {epoch}: {e}") from e
            if not math.isfinite(loss):
                raise DivergedTraining(f"epoch {epoch}: non-finite training loss")
            opt.step(params, grads)
            total += loss * len(idx)
        if not params.is_finite():
            raise DivergedTraining(f"epoch {epoch}: non-finite parameters")
        val = validation_d_loss(params, x_va, p_va, q_va, eval_d)
        hist.train_loss.append(total / n)
        hist.val_loss.append(val)
        if val < hist.best_val_loss:
            hist.best_val_loss, hist.best_epoch = val, epoch
            best = params.copy()
        hist.stopped_epoch = epoch
        if log is not None:
            log(f"epoch {epoch} train {total / n:.4f} val {val:.4f}")
        if epoch - hist.best_epoch >= train_cfg.early_stop_patience:
            break
    hist.seconds = time.perf_counter() - started
    return best, hist


def grid_search_beta(
    train_ds: TrialDataset,
    val_ds: TrialDataset,
    net_cfg: NetConfig,
    train_cfg: TrainConfig,
    betas: Sequence[float],
) -> tuple[float, list[dict]]:
    """Train one beta-loss model per candidate; pick the lowest validation d-loss.

    Each record holds the candidate, its best validation d-loss, the epoch
    count and the wall-clock seconds spent training it.
    """
    if len(betas) == 0:
        raise ConfigError("grid search needs at least one beta")
    records = []
    for beta in betas:
        cfg = replace(train_cfg, loss=replace(train_cfg.loss, mode="beta", beta=float(beta)))
        _, hist = train(train_ds, val_ds, net_cfg, cfg)
        records.append(
            {
                "beta": float(beta),
                "val_d_loss": hist.best_val_loss,
                "epochs": hist.stopped_epoch,
                "seconds": hist.seconds,
            }
        )
    best = min(records, key=lambda r: r["val_d_loss"])
    return best["beta"], records


# -- Monte-Carlo dropout -------------------------------------------------------


def mc_dropout_predict(
    params: NetParams,
    img: np.ndarray,
    k: int = 100,
    seed: int = 0,
    forward_fn: Callable[[int], np.ndarray] | None = None,
) -> tuple[Pose, np.ndarray]:
    """Mean pose and per-component sample std over ``k`` dropout draws.

    Sample ``i`` uses the masks of ``forward(params, img, derive_seed(seed, i))``.
    Quaternion draws are flipped into the hemisphere of the first draw before
    averaging. Position mean and std are in meters. ``forward_fn`` replaces
    the network (called with the draw index) for testing the statistics.
    """
    if k < 2:
        raise ConfigError("need at least two dropout draws")
    if forward_fn is None:
        cfg = params.config
        if cfg.dropout_rate == 0.0 or not cfg.fc_dims:
            raise NoDropoutLayers("network has no active dropout layer")
        x = _as_batch(params, img)
        feat, _ = _trunk(params, x, False)
        per_draw = [_dropout_masks(cfg, 1, np.random.default_rng(derive_seed(seed, i))) for i in range(k)]
        masks = [np.concatenate([m[j] for m in per_draw]) for j in range(len(cfg.fc_dims))]
        out, _ = _head(params, np.repeat(feat, k, axis=0), masks, False)
        out = np.concatenate([params.positions_to_meters(out[:, :3]), out[:, 3:]], axis=1)
    else:
        out = np.array([np.asarray(forward_fn(i), dtype=float) for i in range(k)])
        if out.shape != (k, 7):
            raise ShapeMismatch("forward_fn must return 7-vectors")
    q = out[:, 3:]
    flip = q @ q[0] < 0
    q = np.where(flip[:, None], -q, q)
    out = np.concatenate([out[:, :3], q], axis=1)
    mean = out.mean(axis=0)
    std = out.std(axis=0, ddof=1)
    return Pose(mean[:3], quat_normalize(mean[3:])), std


# -- checkpoints ---------------------------------------------------------------


def _encode(a: np.ndarray) -> dict:
    le = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "f8le": base64.b64encode(le.tobytes()).decode("ascii")}


def _decode(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["f8le"])
    return np.frombuffer(raw, dtype="<f8").astype(float).reshape(d["shape"])


def save_checkpoint(params: NetParams, path, extra: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": params.config.to_dict(),
        "normalization": None if params.normalization is None else params.normalization.to_dict(),
        "arrays": {k: _encode(v) for k, v in params.arrays.items()},
        "extra": extra or {},
    }
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    return path


def load_checkpoint(path) -> NetParams:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT or doc.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(f"{path}: not a version {CHECKPOINT_VERSION} regressor checkpoint")
    cfg = NetConfig.from_dict(doc["config"])
    arrays = {k: _decode(v) for k, v in doc["arrays"].items()}
    expected = init_params(cfg)
    for k, v in expected.arrays.items():
        if k not in arrays or arrays[k].shape != v.shape:
            raise ShapeMismatch(f"{path}: parameter {k} missing or misshapen")
    return NetParams(cfg, arrays, PoseNormalization.from_dict(doc["normalization"]))
