"""Error metrics and experiment reports: per-sample errors, medians, the
composite loss, empirical CDFs, trajectory RMSE and inference timing.

Angles are radians internally and degrees in every report.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from uwpose.data import write_json
from uwpose.errors import EmptyDataset, LengthMismatch
from uwpose.geom import Pose, angular_distance
from uwpose.loss import composite


@dataclass(frozen=True)
class ErrorRecord:
    sample_id: str
    position_error: float
    angular_error: float  # degrees


@dataclass
class ExperimentReport:
    config_id: str
    d: float
    median_Lp: float
    median_Ltheta: float  # degrees
    composite_L: float
    cdf_position: list[tuple[float, float]]
    cdf_angle: list[tuple[float, float]]
    records: list[ErrorRecord] = field(default_factory=list)
    inference_time_stats: dict | None = None

    @property
    def n(self) -> int:
        return len(self.records)

    def to_dict(self, include_records: bool = True) -> dict:
        d = {
            "config_id": self.config_id,
            "d": self.d,
            "n": self.n,
            "median_Lp": self.median_Lp,
            "median_Ltheta_deg": self.median_Ltheta,
            "composite_L": self.composite_L,
            "cdf_position": [list(p) for p in self.cdf_position],
            "cdf_angle_deg": [list(p) for p in self.cdf_angle],
        }
        if include_records:
            d["records"] = [
                {"sample_id": r.sample_id, "position_error": r.position_error, "angular_error_deg": r.angular_error}
                for r in self.records
            ]
        if self.inference_time_stats is not None:
            d["inference_time_ms"] = self.inference_time_stats
        return d


def _check_lengths(a: Sequence, b: Sequence) -> None:
    if len(a) != len(b):
        raise LengthMismatch(f"{len(a)} estimates against {len(b)} ground-truth poses")
    if len(a) == 0:
        raise EmptyDataset("nothing to evaluate")


def _errors(preds: Sequence[Pose], truths: Sequence[Pose]) -> tuple[np.ndarray, np.ndarray]:
    P = np.array([p.position for p in preds], dtype=float)
    T = np.array([t.position for t in truths], dtype=float)
    Qp = np.array([p.orientation for p in preds], dtype=float)
    Qt = np.array([t.orientation for t in truths], dtype=float)
    return np.linalg.norm(P - T, axis=1), np.asarray(angular_distance(Qt, Qp))


def composite_from_medians(median_lp: float, median_theta_deg: float, d: float) -> float:
    return composite(median_lp, math.radians(median_theta_deg), d)


def evaluate(
    preds: Sequence[Pose],
    truths: Sequence[Pose],
    d: float,
    config_id: str = "",
    sample_ids: Sequence[str] | None = None,
) -> ExperimentReport:
    """Median position and angular errors and their composition
    ``median_Lp + d * median_theta`` (theta in radians)."""
    _check_lengths(preds, truths)
    lp, theta = _errors(preds, truths)
    deg = np.degrees(theta)
    ids = [str(i) for i in range(len(preds))] if sample_ids is None else [str(s) for s in sample_ids]
    if len(ids) != len(preds):
        raise LengthMismatch("sample_ids length differs from predictions")
    med_lp = float(np.median(lp))
    med_deg = float(np.median(deg))
    return ExperimentReport(
        config_id=config_id,
        d=float(d),
        median_Lp=med_lp,
        median_Ltheta=med_deg,
        composite_L=composite(med_lp, float(np.median(theta)), d),
        cdf_position=error_cdf(lp),
        cdf_angle=error_cdf(deg),
        records=[ErrorRecord(i, float(a), float(b)) for i, a, b in zip(ids, lp, deg)],
    )


def error_cdf(errors) -> list[tuple[float, float]]:
    """Empirical CDF as (value, fraction <= value) at each distinct value."""
    x = np.sort(np.asarray(errors, dtype=float).ravel())
    if x.size == 0:
        raise EmptyDataset("empty error list")
    values, counts = np.unique(x, return_counts=True)
    frac = np.cumsum(counts) / x.size
    frac[-1] = 1.0
    return [(float(v), float(f)) for v, f in zip(values, frac)]


def cdf_quantile(cdf: Sequence[tuple[float, float]], p: float) -> float:
    """Smallest value whose fraction reaches ``p``; midway to the next value
    when the fraction hits ``p`` exactly (the usual even-count median)."""
    for i, (v, f) in enumerate(cdf):
        if math.isclose(f, p, rel_tol=0, abs_tol=1e-12) and i + 1 < len(cdf):
            return 0.5 * (v + cdf[i + 1][0])
        if f >= p:
            return v
    return cdf[-1][0]


def trajectory_rmse(est: Sequence[Pose], truth: Sequence[Pose]) -> tuple[float, float]:
    """Position RMSE (m) and angular RMSE (degrees), index-aligned."""
    _check_lengths(est, truth)
    lp, theta = _errors(est, truth)
    return float(np.sqrt(np.mean(lp**2))), float(np.degrees(np.sqrt(np.mean(theta**2))))


def time_inference(fn: Callable[[object], object], inputs: Sequence, n_calls: int = 1000, warmup: int = 10) -> dict:
    """Wall-clock per call in milliseconds, cycling through ``inputs``."""
    if len(inputs) == 0:
        raise EmptyDataset("no inputs to time")
    for i in range(warmup):
        fn(inputs[i % len(inputs)])
    ms = np.empty(n_calls)
    for i in range(n_calls):
        t0 = time.perf_counter()
        fn(inputs[i % len(inputs)])
        ms[i] = 1e3 * (time.perf_counter() - t0)
    return {
        "n_calls": n_calls,
        "mean_ms": float(ms.mean()),
        "median_ms": float(np.median(ms)),
        "std_ms": float(ms.std()),
    }


def write_report(report: ExperimentReport, out_dir, stem: str = "report") -> tuple[Path, Path]:
    """``<stem>.json`` with the full report and ``<stem>_cdf.csv`` with the CDF points."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / f"{stem}.json"
    write_json(json_path, report.to_dict())
    csv_path = out / f"{stem}_cdf.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "value", "fraction"])
        for name, pts in (("position_m", report.cdf_position), ("angle_deg", report.cdf_angle)):
            for v, f in pts:
                w.writerow([name, repr(v), repr(f)])
    return json_path, csv_path
