import csv
import io
import json
import math
import os
import shutil
import tempfile
from pathlib import Path

import numpy as np
import pytest

from cli_pipeline import GOLDEN, TINY_CONFIG, output_files, pipeline_steps, run_pipeline
from uwpose import cli
from uwpose.errors import DivergedTraining
from uwpose.image import read_pnm
from uwpose.regressor import _decode

BLESS = os.environ.get("UWPOSE_BLESS") == "1"
STEPS = [name for name, _ in pipeline_steps(Path("."))]
ALL_SUFFIXES = (".csv", ".json", ".ppm", ".pgm")


@pytest.fixture(scope="module")
def run_a(tmp_path_factory):
    root = tmp_path_factory.mktemp("run_a")
    codes = run_pipeline(root)
    assert all(c == 0 for c in codes.values()) and len(codes) == len(STEPS), codes
    return root


# -- golden comparison -----------------------------------------------------------------


def _close(a, b) -> bool:
    if isinstance(a, float) or isinstance(b, float):
        if not isinstance(a, (int, float)) or not isinstance(b, (int, float)):
            return False
        return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12) or (math.isnan(a) and math.isnan(b))
    return a == b


def _compare_json(a, b, path="$"):
    if isinstance(a, dict) and {"shape", "f8le"} <= a.keys():
        np.testing.assert_allclose(_decode(a), _decode(b), rtol=1e-7, atol=1e-10, err_msg=path)
    elif isinstance(a, dict):
        assert isinstance(b, dict) and a.keys() == b.keys(), path
        for k in a:
            _compare_json(a[k], b[k], f"{path}.{k}")
    elif isinstance(a, list):
        assert isinstance(b, list) and len(a) == len(b), path
        for i, (x, y) in enumerate(zip(a, b)):
            _compare_json(x, y, f"{path}[{i}]")
    else:
        assert _close(a, b), f"{path}: {a!r} != {b!r}"


def _cell(v: str):
    try:
        return float(v) if v else None
    except ValueError:
        return v


def _compare_csv(a: bytes, b: bytes, name: str):
    ra = list(csv.reader(io.StringIO(a.decode())))
    rb = list(csv.reader(io.StringIO(b.decode())))
    assert len(ra) == len(rb), name
    for i, (x, y) in enumerate(zip(ra, rb)):
        assert len(x) == len(y), f"{name}:{i}"
        for u, v in zip(map(_cell, x), map(_cell, y)):
            assert _close(u, v), f"{name}:{i}: {u!r} != {v!r}"


def _compare_dirs(golden: Path, produced: dict[str, bytes]):
    expected = {str(p.relative_to(golden)) for p in golden.rglob("*") if p.is_file()}
    assert expected == set(produced), (sorted(expected ^ set(produced)))[:10]
    for rel, data in produced.items():
        ref = (golden / rel).read_bytes()
        if rel.endswith(".json"):
            _compare_json(json.loads(data), json.loads(ref), rel)
        elif rel.endswith(".csv"):
            _compare_csv(data, ref, rel)
        else:
            with tempfile.TemporaryDirectory() as d:
                tmp = Path(d) / Path(rel).name
                tmp.write_bytes(data)
                diff = np.abs(read_pnm(tmp) - read_pnm(golden / rel))
            assert diff.max() <= 1.5 / 255, rel


@pytest.mark.parametrize("step", STEPS)
def test_golden_outputs(run_a, step):
    produced = output_files(run_a, step, ALL_SUFFIXES)
    golden = GOLDEN / step
    if BLESS:
        shutil.rmtree(golden, ignore_errors=True)
        for rel, data in produced.items():
            (golden / rel).parent.mkdir(parents=True, exist_ok=True)
            (golden / rel).write_bytes(data)
        pytest.skip("blessed new golden outputs")
    assert golden.is_dir(), f"no golden outputs for {step}; rerun with UWPOSE_BLESS=1 and review"
    _compare_dirs(golden, produced)


# -- determinism ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def run_b(tmp_path_factory):
    root = tmp_path_factory.mktemp("run_b")
    codes = run_pipeline(root)
    assert all(c == 0 for c in codes.values()), codes
    return root


@pytest.mark.parametrize("step", STEPS)
def test_rerun_byte_identical(run_a, run_b, step):
    a = output_files(run_a, step, ALL_SUFFIXES)
    b = output_files(run_b, step, ALL_SUFFIXES)
    assert a.keys() == b.keys() and a
    for rel in a:
        assert a[rel] == b[rel], f"{step}/{rel} differs between reruns"


def test_outputs_are_location_independent(run_a):
    for step in STEPS:
        for rel, data in output_files(run_a, step).items():
            assert str(run_a).encode() not in data, f"{step}/{rel} embeds its absolute path"


# -- invalid configs ---------------------------------------------------------------------------


INVALID = {
    "simulate": "camera.width=4",
    "train": "train.learning_rate=-1",
    "augment": "augment.range_scales=[0.0]",
    "fuse": "filter.mc_dropout_k=1",
    "eval": 'eval.band="D9"',
    "report": "bogus=1",
}


@pytest.mark.parametrize("command", sorted(INVALID))
def test_invalid_config_rejected(tmp_path, run_a, command, capsys):
    argv = dict(pipeline_steps(run_a))[command][:]
    argv[argv.index("--out") + 1] = str(tmp_path / "out")
    code = cli.main(argv + ["--set", INVALID[command]])
    assert code == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    assert not (tmp_path / "out").exists() or not any((tmp_path / "out").iterdir())


def test_unknown_key_in_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"train": {"epochs": 3}}))
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG


def test_unparseable_and_missing_config(tmp_path):
    bad = tmp_path / "c.toml"
    bad.write_text("train = [")
    assert cli.main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert cli.main(["simulate", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_missing_out_is_config_error(tmp_path):
    assert cli.main(["simulate", "--config", str(TINY_CONFIG)]) == cli.EXIT_CONFIG


# -- config resolution --------------------------------------------------------------------------


def test_toml_matches_json(tmp_path):
    toml = tmp_path / "c.toml"
    toml.write_text('name = "tiny"\n[camera]\nwidth = 16\nheight = 16\n[train]\nmax_epochs = 3\n')
    js = tmp_path / "c.json"
    js.write_text(json.dumps({"name": "tiny", "camera": {"width": 16, "height": 16}, "train": {"max_epochs": 3}}))
    assert cli.resolve_config(toml).raw == cli.resolve_config(js).raw


def test_seed_flag_derives_module_seeds():
    cfg = cli.resolve_config(TINY_CONFIG, seed=10)
    assert cfg.seeds == {"simulate": 10, "train": 11, "augment": 12, "fuse": 13, "eval": 14}
    assert cfg.train.seed == 11 and cfg.net.seed == 11


def test_set_overrides_file():
    cfg = cli.resolve_config(TINY_CONFIG, ["train.max_epochs=7", "d=1.5", 'scene="sji_pillar"'])
    assert cfg.train.max_epochs == 7 and cfg.d == 1.5 and cfg.scene == "sji_pillar"


def test_default_bands():
    cfg = cli.resolve_config()
    assert [b.depth for b in cfg.bands] == [-1.5, -3.0, -4.0]
    assert cfg.filter.mc_dropout_k == 100


# -- exit codes for data and divergence ------------------------------------------------------------


def test_missing_data_is_data_error(tmp_path, capsys):
    code = cli.main(["train", "--config", str(TINY_CONFIG), "--data", str(tmp_path / "nowhere"), "--out", str(tmp_path / "o")])
    assert code == cli.EXIT_DATA
    assert "nowhere" in capsys.readouterr().err


def test_divergence_exit_code(tmp_path, run_a, monkeypatch):
    def boom(*a, **k):
        raise DivergedTraining("non-finite training loss")

    monkeypatch.setattr(cli, "train", boom)
    argv = dict(pipeline_steps(run_a))["train"][:]
    argv[argv.index("--out") + 1] = str(tmp_path / "o")
    assert cli.main(argv) == cli.EXIT_DIVERGED


def test_timing_only_on_request(tmp_path, run_a):
    argv = dict(pipeline_steps(run_a))["eval"][:]
    argv[argv.index("--out") + 1] = str(tmp_path / "o")
    assert cli.main(argv + ["--timing"]) == 0
    stats = json.loads((tmp_path / "o" / "timing.json").read_text())
    assert stats["n_calls"] == 5
    assert (tmp_path / "o" / "report.json").read_bytes() == (run_a / "eval" / "report.json").read_bytes()
    assert not (run_a / "eval" / "timing.json").exists()


def test_simulate_layout(run_a):
    meta = json.loads((run_a / "simulate" / "simulate.json").read_text())
    assert meta["bands"] == ["D1", "D2", "D3"]
    for b in meta["bands"]:
        assert (run_a / "simulate" / b / f"{b}.manifest.json").exists()
        rows = list(csv.DictReader(open(run_a / "simulate" / b / f"{b}.sensors.csv")))
        assert {r["source"] for r in rows} == {"compass", "altimeter"}


def test_fused_csv_has_covariance_trace(run_a):
    rows = list(csv.DictReader(open(run_a / "fuse" / "D3.fused.csv")))
    assert rows and all(r["source"] == "fused" and float(r["ptrace"]) > 0 for r in rows)
