"""Command-line pipeline: simulate, train, augment, fuse, eval, report.

Every command reads one experiment config (TOML or JSON, merged over
``DEFAULT_CONFIG``), writes only deterministic CSV/JSON (plus images) under
``--out`` and exits 0 on success, 2 on a config error, 3 on a data error and
4 on numerical divergence.

Layout produced by ``simulate`` and consumed by the other commands::

    DATA/<band>/<band>.manifest.json   camera trial (CSV + images)
    DATA/<band>/<band>.sensors.csv     compass and altimeter readings
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from uwpose.augment import ColorJitterConfig, PoseSynthesisConfig, render_augmented, synthesize_poses
from uwpose.data import (
    TimedSample,
    TrialDataset,
    fit_normalization,
    read_csv,
    read_manifest,
    split,
    sync_interpolate,
    write_csv,
    write_dataset,
    write_json,
)
from uwpose.errors import (
    ConfigError,
    DivergedTraining,
    DomainError,
    SingularInnovationCovariance,
    UwposeError,
    ZeroNormQuaternion,
)
from uwpose.evaluation import evaluate, time_inference, write_report
from uwpose.fusion import FilterConfig, Measurement, estimator_measurement, fused_dataset, merge_streams, run_filter
from uwpose.geom import Pose, quat_exp, quat_mul
from uwpose.loss import LossConfig
from uwpose.regressor import (
    NetConfig,
    TrainConfig,
    forward,
    grid_search_beta,
    load_checkpoint,
    predict_poses,
    save_checkpoint,
    train,
)
from uwpose.scene import PRESETS, CameraIntrinsics, WaterParams, build_preset, derive_seed, generate_trial, lawnmower_trajectory

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED = 0, 2, 3, 4
MODULES = ("simulate", "train", "augment", "fuse", "eval")
BAND_T0_STEP = 1000.0
AUGMENTED_T0 = 10000.0

DEFAULT_CONFIG: dict = {
    "name": "experiment",
    "scene": "tcoms_structure",
    "d": 3.0,
    "out": None,
    "camera": {"width": 48, "height": 48, "horizontal_fov": math.pi / 2},
    "water": {
        "turbidity": 0.05,
        "brightness_bias": 0.0,
        "brightness_jitter_std": 0.02,
        "noise_std": 0.01,
        "background_artifacts": 0.0,
    },
    "trajectory": {
        "standoff": 3.0,
        "line_spacing": 0.25,
        "sample_spacing": 0.5,
        "orientation_mode": "horizontal",
        "n_passes": 3,
    },
    "bands": [
        {"name": "D1", "depth": -1.5},
        {"name": "D2", "depth": -3.0},
        {"name": "D3", "depth": -4.0},
    ],
    "sensors": {"compass_std_deg": 2.0, "altimeter_std": 0.05, "compass_offset_s": 0.05, "altimeter_offset_s": 0.1},
    "net": {
        "conv_blocks": [{"filters": 8, "kernel": 3, "stride": 2}, {"filters": 16, "kernel": 3, "stride": 2}, {"filters": 32, "kernel": 3, "stride": 2}],
        "fc_dims": [128],
        "dropout_rate": 0.2,
    },
    "train": {
        "bands": ["D1", "D2"],
        "split": [0.8, 0.2, 0.0],
        "loss": {"mode": "d", "beta": 250.0, "d": 3.0, "angle_form": "linear"},
        "beta_grid": [],
        "learning_rate": 3e-3,
        "weight_decay": 0.0,
        "batch_size": 32,
        "max_epochs": 120,
        "early_stop_patience": 25,
        "optimizer": "adam",
        "momentum": 0.9,
        "jitter": None,
    },
    "augment": {
        "depth_offsets": [-2.5, -1.0, 0.0],
        "range_scales": [0.85, 1.0, 1.15],
        "base_stride": 4,
        "jitter": {"brightness_delta": [-0.05, 0.05], "contrast_range": [0.9, 1.1], "per_channel_gain_range": [0.9, 1.1]},
    },
    "filter": {
        "accel_std": 1.0,
        "angular_accel_std": 0.1,
        "init_std": [1.0, 0.5, 0.1, 0.2],
        "mc_dropout_k": 100,
        "noise_floor": 1e-3,
        "max_dt": None,
        "gate": None,
        "use_sensors": True,
    },
    "eval": {"band": "D3", "timing_calls": 1000},
    "seeds": {m: i for i, m in enumerate(MODULES)},
}

# sections whose value may be null or a table of free-form keys
_OPEN_KEYS = {("train", "jitter"), ("augment", "jitter"), ("filter", "max_dt"), ("filter", "gate"), ("out",)}


# -- config ----------------------------------------------------------------------


@dataclass(frozen=True)
class Band:
    name: str
    depth: float


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    scene: str
    d: float
    out: str | None
    camera: CameraIntrinsics
    water: WaterParams
    trajectory: dict
    bands: tuple[Band, ...]
    sensors: dict
    net: NetConfig
    train: TrainConfig
    train_bands: tuple[str, ...]
    train_split: tuple[float, float, float]
    beta_grid: tuple[float, ...]
    synthesis: PoseSynthesisConfig
    augment_stride: int
    augment_jitter: ColorJitterConfig | None
    filter: FilterConfig
    use_sensors: bool
    eval_band: str
    timing_calls: int
    seeds: dict
    raw: dict

    def band(self, name: str) -> Band:
        for b in self.bands:
            if b.name == name:
                return b
        raise ConfigError(f"no band named {name!r}")


def _merge(base: dict, over: dict, path: tuple = ()) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        key = path + (k,)
        if k not in base:
            raise ConfigError(f"unknown config key {'.'.join(key)!r}")
        if isinstance(base[k], dict) and key not in _OPEN_KEYS:
            if not isinstance(v, dict):
                raise ConfigError(f"config key {'.'.join(key)!r} must be a table")
            out[k] = _merge(base[k], v, key)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        if path.suffix == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib
            return tomllib.loads(text.decode())
        return json.loads(text)
    except (ValueError, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot parse config {path}: {e}") from e


def _set_override(doc: dict, assignment: str) -> dict:
    """Apply ``a.b.c=VALUE`` where VALUE is JSON (bare strings allowed)."""
    key, sep, value = assignment.partition("=")
    if not sep or not key:
        raise ConfigError(f"override {assignment!r} is not KEY=VALUE")
    try:
        parsed = json.loads(value)
    except ValueError:
        parsed = value
    nested: dict = parsed
    for part in reversed(key.split(".")):
        nested = {part: nested}
    return _merge(doc, nested)


def _typed(section: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ConfigError, DomainError, TypeError, ValueError) as e:
        raise ConfigError(f"[{section}] {e}") from e


def build_config(doc: dict) -> ExperimentConfig:
    """Validate a merged config document and build the typed objects."""
    if doc["scene"] not in PRESETS:
        raise ConfigError(f"unknown scene preset {doc['scene']!r}; choose from {PRESETS}")
    d = doc["d"]
    if not isinstance(d, (int, float)) or not d > 0:
        raise ConfigError("d must be a positive number")
    cam = _typed("camera", lambda c: CameraIntrinsics(int(c["width"]), int(c["height"]), float(c["horizontal_fov"])), doc["camera"])
    water = _typed("water", lambda w: WaterParams(**w), doc["water"])
    traj = doc["trajectory"]
    if traj["orientation_mode"] not in ("horizontal", "vertical"):
        raise ConfigError(f"unknown orientation_mode {traj['orientation_mode']!r}")
    if not (traj["standoff"] > 0 and traj["line_spacing"] > 0 and traj["sample_spacing"] > 0 and int(traj["n_passes"]) >= 1):
        raise ConfigError("trajectory standoff, spacings and n_passes must be positive")
    try:
        bands = tuple(Band(str(b["name"]), float(b["depth"])) for b in doc["bands"])
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"[bands] each band needs a name and a depth: {e}") from e
    names = [b.name for b in bands]
    if not bands or len(set(names)) != len(names):
        raise ConfigError("bands must be non-empty with unique names")
    sensors = doc["sensors"]
    if not (sensors["compass_std_deg"] > 0 and sensors["altimeter_std"] > 0):
        raise ConfigError("sensor noise levels must be positive")
    if not 0 < sensors["compass_offset_s"] < sensors["altimeter_offset_s"]:
        raise ConfigError("sensor offsets must satisfy 0 < compass_offset_s < altimeter_offset_s")

    seeds = doc["seeds"]
    if set(seeds) != set(MODULES) or not all(isinstance(seeds[m], int) for m in MODULES):
        raise ConfigError(f"seeds must give an integer for each of {MODULES}")
    net_doc = doc["net"]
    net = _typed(
        "net",
        lambda: NetConfig(
            input=(cam.width, cam.height, 3),
            conv_blocks=tuple(net_doc["conv_blocks"]),
            fc_dims=tuple(net_doc["fc_dims"]),
            dropout_rate=float(net_doc["dropout_rate"]),
            seed=seeds["train"],
        ),
    )
    tr = doc["train"]
    train_kwargs = {k: v for k, v in tr.items() if k not in ("bands", "split", "beta_grid", "loss", "jitter")}
    jitter = None if tr["jitter"] is None else _typed("train.jitter", lambda: ColorJitterConfig(**tr["jitter"], seed=seeds["train"]))
    train_cfg = _typed(
        "train",
        lambda: TrainConfig(loss=LossConfig(**tr["loss"]), jitter=jitter, seed=seeds["train"], **train_kwargs),
    )
    train_bands = tuple(tr["bands"])
    if not train_bands or any(b not in names for b in train_bands):
        raise ConfigError(f"train.bands {list(train_bands)} must name configured bands")
    fr = tuple(float(v) for v in tr["split"])
    if len(fr) != 3 or min(fr) < 0 or fr[0] <= 0 or fr[1] <= 0 or abs(sum(fr) - 1) > 1e-9:
        raise ConfigError("train.split needs train and validation fractions > 0, all summing to 1")
    beta_grid = tuple(float(b) for b in tr["beta_grid"])
    if any(not b > 0 for b in beta_grid):
        raise ConfigError("beta_grid entries must be positive")

    au = doc["augment"]
    synthesis = _typed("augment", lambda: PoseSynthesisConfig(tuple(au["depth_offsets"]), tuple(au["range_scales"])))
    if not isinstance(au["base_stride"], int) or au["base_stride"] < 1:
        raise ConfigError("augment.base_stride must be a positive integer")
    aug_jitter = None if au["jitter"] is None else _typed("augment.jitter", lambda: ColorJitterConfig(**au["jitter"], seed=seeds["train"]))

    fl = {k: v for k, v in doc["filter"].items() if k != "use_sensors"}
    filt = _typed("filter", lambda: FilterConfig(**fl))
    ev = doc["eval"]
    if ev["band"] not in names:
        raise ConfigError(f"eval.band {ev['band']!r} is not a configured band")
    if not isinstance(ev["timing_calls"], int) or ev["timing_calls"] < 1:
        raise ConfigError("eval.timing_calls must be a positive integer")
    return ExperimentConfig(
        name=str(doc["name"]),
        scene=doc["scene"],
        d=float(d),
        out=doc["out"],
        camera=cam,
        water=water,
        trajectory=dict(traj),
        bands=bands,
        sensors=dict(sensors),
        net=net,
        train=train_cfg,
        train_bands=train_bands,
        train_split=fr,
        beta_grid=beta_grid,
        synthesis=synthesis,
        augment_stride=au["base_stride"],
        augment_jitter=aug_jitter,
        filter=filt,
        use_sensors=bool(doc["filter"]["use_sensors"]),
        eval_band=ev["band"],
        timing_calls=ev["timing_calls"],
        seeds=dict(seeds),
        raw=doc,
    )


def resolve_config(path=None, overrides: Sequence[str] = (), seed: int | None = None, out=None) -> ExperimentConfig:
    """Defaults, then the file, then ``--set`` overrides, then ``--seed``/``--out``."""
    doc = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        doc = _merge(doc, load_config_file(path))
    for a in overrides:
        doc = _set_override(doc, a)
    if seed is not None:
        doc["seeds"] = {m: int(seed) + i for i, m in enumerate(MODULES)}
    if out is not None:
        doc["out"] = str(out)
    try:
        return build_config(doc)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError, AttributeError) as e:
        raise ConfigError(f"malformed config value: {e}") from e


# -- shared data access --------------------------------------------------------------


def band_dir(data_dir, name: str) -> Path:
    return Path(data_dir) / name


def load_band(data_dir, name: str, load_images: bool = True) -> TrialDataset:
    return read_manifest(band_dir(data_dir, name) / f"{name}.manifest.json", load_images=load_images)


def load_sensors(data_dir, name: str) -> TrialDataset:
    return read_csv(band_dir(data_dir, name) / f"{name}.sensors.csv", load_images=False, name=f"{name}-sensors")


def training_split(cfg: ExperimentConfig, data_dir) -> tuple[TrialDataset, TrialDataset, TrialDataset]:
    """Pool the training bands and split them with the train seed."""
    samples: list[TimedSample] = []
    for name in cfg.train_bands:
        samples.extend(load_band(data_dir, name))
    pool = TrialDataset(sorted(samples, key=lambda s: s.timestamp), name="pool")
    return split(pool, cfg.train_split, seed=cfg.seeds["train"])


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    out = args.out if args.out is not None else cfg.out
    if out is None:
        raise ConfigError("no output directory: pass --out or set 'out' in the config")
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_rows(path: Path, header: Sequence[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# -- commands ----------------------------------------------------------------------


def cmd_simulate(cfg: ExperimentConfig, out: Path) -> list[Path]:
    """Render one lawnmower trial per band plus its compass and altimeter log."""
    scene = build_preset(cfg.scene)
    seed = cfg.seeds["simulate"]
    s = cfg.sensors
    manifests = []
    for i, band in enumerate(cfg.bands):
        tr = cfg.trajectory
        traj = lawnmower_trajectory(
            scene, band.depth, tr["standoff"], tr["line_spacing"], tr["sample_spacing"], tr["orientation_mode"], int(tr["n_passes"])
        )
        ds = generate_trial(scene, traj, cfg.camera, cfg.water, derive_seed(seed, i), t0=BAND_T0_STEP * i, name=band.name)
        manifests.append(write_dataset(ds, band_dir(out, band.name), name=band.name))
        rng_c = np.random.default_rng(derive_seed(seed, i, 1))
        rng_a = np.random.default_rng(derive_seed(seed, i, 2))
        ang = math.radians(s["compass_std_deg"])
        nan3 = np.full(3, np.nan)
        rows = []
        for smp in ds:
            q = quat_mul(smp.orientation, quat_exp(rng_c.normal(0.0, ang, 3)))
            rows.append(TimedSample(smp.timestamp + s["compass_offset_s"], "compass", nan3, q))
            z = smp.position[2] + rng_a.normal(0.0, s["altimeter_std"])
            rows.append(TimedSample(smp.timestamp + s["altimeter_offset_s"], "altimeter", [np.nan, np.nan, z]))
        write_csv(TrialDataset(rows, name=f"{band.name}-sensors"), band_dir(out, band.name) / f"{band.name}.sensors.csv")
    write_json(out / "simulate.json", {"bands": [b.name for b in cfg.bands], "manifests": [str(m.relative_to(out)) for m in manifests]})
    return manifests


def cmd_train(cfg: ExperimentConfig, data_dir, out: Path, augmented=None, loss_mode: str | None = None, log=None) -> Path:
    """Train on the pooled training bands, optionally adding augmented renders."""
    tr, va, te = training_split(cfg, data_dir)
    norm = fit_normalization(tr)
    train_cfg = cfg.train
    if loss_mode is not None:
        train_cfg = replace(train_cfg, loss=replace(train_cfg.loss, mode=loss_mode))
    if augmented is not None:
        aug = read_manifest(augmented)
        tr = TrialDataset(sorted([*tr, *aug], key=lambda s: s.timestamp), name="train+augmented")
        if cfg.augment_jitter is not None:
            train_cfg = replace(train_cfg, jitter=cfg.augment_jitter)
    tr = tr.with_normalization(norm)
    summary: dict = {"n_train": len(tr), "n_val": len(va), "n_test": len(te), "augmented": augmented is not None}
    if train_cfg.loss.mode == "beta" and cfg.beta_grid:
        best_beta, records = grid_search_beta(tr, va, cfg.net, train_cfg, cfg.beta_grid)
        summary["beta_grid"] = [{k: v for k, v in r.items() if k != "seconds"} for r in records]
        summary["beta"] = best_beta
        train_cfg = replace(train_cfg, loss=replace(train_cfg.loss, beta=best_beta))
    params, hist = train(tr, va, cfg.net, train_cfg, log=log)
    summary["loss"] = asdict(train_cfg.loss)
    ckpt = save_checkpoint(params, out / "model.json", extra={"loss": asdict(train_cfg.loss), "name": cfg.name})
    write_json(out / "history.json", {**summary, "history": hist.to_dict()})
    if len(te):
        write_dataset(te, out / "test", name="test")
    return ckpt


def cmd_augment(cfg: ExperimentConfig, data_dir, out: Path) -> Path:
    """Render synthesized poses around every ``base_stride``-th training pose."""
    tr, _, _ = training_split(cfg, data_dir)
    scene = build_preset(cfg.scene)
    base = [s.pose for s in tr.pose_samples()][:: cfg.augment_stride]
    poses = synthesize_poses(base, cfg.synthesis, scene.centroid())
    ds = render_augmented(scene, poses, cfg.camera, cfg.water, derive_seed(cfg.seeds["augment"], 0), t0=AUGMENTED_T0, name="augmented")
    return write_dataset(ds, out, name="augmented")


def cmd_fuse(cfg: ExperimentConfig, checkpoint, data_dir, band: str, out: Path) -> tuple[Path, Path]:
    """MC-dropout estimates on every frame of ``band``, fused with its sensors."""
    params = load_checkpoint(checkpoint)
    ds = load_band(data_dir, band)
    seed = cfg.seeds["fuse"]
    fc = cfg.filter
    est = [
        estimator_measurement(params, s.image, fc.mc_dropout_k, derive_seed(seed, k), fc.noise_floor, s.timestamp)
        for k, s in enumerate(ds)
        if s.image is not None
    ]
    if not est:
        raise ConfigError(f"band {band!r} has no images to estimate from")
    est_ds = TrialDataset(
        [
            TimedSample(m.timestamp, "estimator", m.value[:3], m.value[3:], extra={"sx": m.noise_std[0], "sy": m.noise_std[1], "sz": m.noise_std[2]})
            for m in est
        ],
        name=f"{band}-estimator",
    )
    est_path = out / f"{band}.estimator.csv"
    write_csv(est_ds, est_path, extra_columns=("sx", "sy", "sz"))
    streams = [est]
    if cfg.use_sensors:
        sens = []
        for s in load_sensors(data_dir, band):
            if s.timestamp < est[0].timestamp:
                continue
            if s.source == "compass":
                sens.append(Measurement("compass", s.orientation, 0.5 * math.radians(cfg.sensors["compass_std_deg"]), s.timestamp))
            elif s.source == "altimeter":
                sens.append(Measurement("altimeter", [s.position[2]], cfg.sensors["altimeter_std"], s.timestamp))
        streams.append(sens)
    first = est[0]
    init = Pose(first.value[:3], first.value[3:])
    states = run_filter(merge_streams(*streams), fc, init, t0=first.timestamp)
    fused = fused_dataset(states, name=f"{band}-fused")
    fused_path = out / f"{band}.fused.csv"
    write_csv(fused, fused_path, extra_columns=("ptrace",))
    return est_path, fused_path


def cmd_eval(
    cfg: ExperimentConfig,
    out: Path,
    test: TrialDataset,
    checkpoint=None,
    trajectory=None,
    config_id: str | None = None,
    timing: bool = False,
) -> Path:
    """Report against ``test`` for a checkpoint or a trajectory CSV."""
    if (checkpoint is None) == (trajectory is None):
        raise ConfigError("eval needs exactly one of --checkpoint or --trajectory")
    truth = test.pose_samples()
    ids = [repr(s.timestamp) for s in truth]
    if checkpoint is not None:
        params = load_checkpoint(checkpoint)
        imgs = [s.image for s in truth]
        if any(i is None for i in imgs):
            raise ConfigError("test samples without images cannot be evaluated with a checkpoint")
        preds = predict_poses(params, np.stack(imgs))
        kind = "checkpoint"
    else:
        traj = read_csv(trajectory, load_images=False)
        preds = [sync_interpolate(traj, s.timestamp) for s in truth]
        kind = "trajectory"
    cid = config_id or f"{cfg.name}/{test.name}/{kind}"
    report = evaluate(preds, [s.pose for s in truth], cfg.d, config_id=cid, sample_ids=ids)
    json_path, _ = write_report(report, out, "report")
    if timing and checkpoint is not None:
        imgs = [s.image for s in truth]
        stats = time_inference(lambda img: forward(params, img), imgs, n_calls=cfg.timing_calls)
        write_json(out / "timing.json", stats)
    return json_path


SUMMARY_FIELDS = ("config_id", "n", "d", "median_Lp", "median_Ltheta_deg", "composite_L")


def cmd_report(reports: Sequence, out: Path) -> tuple[Path, Path]:
    """Collect report JSON files into one summary table."""
    rows = []
    for p in reports:
        try:
            doc = json.loads(Path(p).read_text())
            rows.append({k: doc[k] for k in SUMMARY_FIELDS})
        except KeyError as e:
            raise ValueError(f"{p}: not an evaluation report (missing {e})") from e
    json_path = out / "summary.json"
    write_json(json_path, {"reports": rows})
    csv_path = out / "summary.csv"
    _write_rows(csv_path, SUMMARY_FIELDS, ([r[k] if isinstance(r[k], str) else repr(r[k]) for k in SUMMARY_FIELDS] for r in rows))
    return json_path, csv_path


# -- entry point --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON experiment config")
    common.add_argument("--out", help="output directory (overrides the config's 'out')")
    common.add_argument("--seed", type=int, help="base seed; module k gets seed + k")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key, e.g. train.max_epochs=5")
    common.add_argument("-v", "--verbose", action="store_true", help="progress on stderr")

    p = argparse.ArgumentParser(prog="uwpose", description="Synthetic underwater visual relocalization pipeline.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="render the depth-band trials and sensor logs")
    t = sub.add_parser("train", parents=[common], help="train the pose regressor")
    t.add_argument("--data", required=True, help="directory written by simulate")
    t.add_argument("--augmented", help="augmented manifest to add to the training split")
    t.add_argument("--loss", choices=("d", "beta"), help="override train.loss.mode")
    a = sub.add_parser("augment", parents=[common], help="render synthesized-pose views of the training split")
    a.add_argument("--data", required=True, help="directory written by simulate")
    f = sub.add_parser("fuse", parents=[common], help="fuse MC-dropout estimates with compass and altimeter")
    f.add_argument("--data", required=True, help="directory written by simulate")
    f.add_argument("--checkpoint", required=True)
    f.add_argument("--band", help="band to fuse (default: eval.band)")
    e = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint or trajectory")
    e.add_argument("--checkpoint")
    e.add_argument("--trajectory", help="trajectory CSV, e.g. from fuse")
    e.add_argument("--data", help="directory written by simulate; evaluates on --band")
    e.add_argument("--band", help="band to evaluate on (default: eval.band)")
    e.add_argument("--test", help="test manifest, e.g. the one written by train")
    e.add_argument("--id", help="config id recorded in the report")
    e.add_argument("--timing", action="store_true", help="also write timing.json (not deterministic)")
    r = sub.add_parser("report", parents=[common], help="summarize report JSON files")
    r.add_argument("reports", nargs="+")
    return p


def _run(args) -> None:
    cfg = resolve_config(args.config, args.set, args.seed)
    out = _out_dir(args, cfg)
    log = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
    if args.command == "simulate":
        cmd_simulate(cfg, out)
    elif args.command == "train":
        cmd_train(cfg, args.data, out, args.augmented, args.loss, log)
    elif args.command == "augment":
        cmd_augment(cfg, args.data, out)
    elif args.command == "fuse":
        cmd_fuse(cfg, args.checkpoint, args.data, args.band or cfg.eval_band, out)
    elif args.command == "eval":
        if (args.test is None) == (args.data is None):
            raise ConfigError("eval needs exactly one of --test or --data")
        if args.test is not None:
            test = read_manifest(args.test)
        else:
            test = load_band(args.data, args.band or cfg.eval_band)
        cmd_eval(cfg, out, test, args.checkpoint, args.trajectory, args.id, args.timing)
    elif args.command == "report":
        cmd_report(args.reports, out)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _run(args)
    except ConfigError as e:
        return _fail(EXIT_CONFIG, f"config error: {e}")
    except (DivergedTraining, ZeroNormQuaternion, SingularInnovationCovariance, FloatingPointError) as e:
        return _fail(EXIT_DIVERGED, f"numerical divergence: {e}")
    except (UwposeError, OSError, ValueError, KeyError) as e:
        return _fail(EXIT_DATA, f"data error: {e}")
    return EXIT_OK


def _fail(code: int, msg: str) -> int:
    print(f"uwpose: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
