"""Command line behavior, artifact layout, and reproducibility."""

import json
import os
import xml.etree.ElementTree as ET

import pytest

from fedaa import cli, config

SMALL_CONFIG = """\
dataset = synthetic00
dataset.num_clients = 6
dataset.samples_per_client = 20
rounds = 3
m_percent = 50
local.lr = 0.05
local.batch_size = 8
local.epochs = 1
ddpg.hidden = 16
ddpg.warmup = 2
ddpg.batch_size = 4
"""


@pytest.fixture
def cfg_path(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(SMALL_CONFIG)
    return str(path)


def test_run_writes_artifacts(cfg_path, tmp_path, capsys):
    out = str(tmp_path / "out")
    assert cli.main(["run", "--config", cfg_path, "--out", out]) == 0
    captured = capsys.readouterr()
    assert "run finished: 3 rounds" in captured.out
    results = open(os.path.join(out, "results.csv")).read()
    assert results.count("\n") == 4  # header plus one line per round
    canonical = open(os.path.join(out, "config.txt")).read()
    cfg = config.parse_config_text(canonical)
    assert cfg.rounds == 3
    manifest = json.load(open(os.path.join(out, "manifest.json")))
    assert manifest["config_hash"] == config.config_hash(cfg)
    assert manifest["seed"] == 0
    assert set(manifest["subsystem_seeds"]) >= {"data", "roles", "model-init"}
    assert manifest["version"]
    assert any(p.endswith("results.csv") for p in manifest["artifacts"])
    assert manifest["started"] <= manifest["finished"]


def test_run_reruns_byte_identical(cfg_path, tmp_path):
    out_a = str(tmp_path / "a")
    out_b = str(tmp_path / "b")
    assert cli.main(["run", "--config", cfg_path, "--out", out_a]) == 0
    assert cli.main(["run", "--config", cfg_path, "--out", out_b]) == 0
    bytes_a = open(os.path.join(out_a, "results.csv"), "rb").read()
    bytes_b = open(os.path.join(out_b, "results.csv"), "rb").read()
    assert bytes_a == bytes_b


def test_run_seed_override_changes_results(cfg_path, tmp_path):
    out_a = str(tmp_path / "a")
    out_b = str(tmp_path / "b")
    assert cli.main(["run", "--config", cfg_path, "--out", out_a]) == 0
    assert cli.main(["run", "--config", cfg_path, "--out", out_b, "--seed", "5"]) == 0
    assert json.load(open(os.path.join(out_b, "manifest.json")))["seed"] == 5
    bytes_a = open(os.path.join(out_a, "results.csv"), "rb").read()
    bytes_b = open(os.path.join(out_b, "results.csv"), "rb").read()
    assert bytes_a != bytes_b


def test_run_json_format(cfg_path, tmp_path):
    out = str(tmp_path / "out")
    assert cli.main(["run", "--config", cfg_path, "--out", out, "--format", "json"]) == 0
    rows = json.load(open(os.path.join(out, "results.json")))
    assert len(rows) == 3
    assert {"round", "reward", "selected_ids", "action"} <= set(rows[0])


def test_run_plot_writes_svgs(cfg_path, tmp_path):
    out = str(tmp_path / "out")
    assert cli.main(["run", "--config", cfg_path, "--out", out, "--plot"]) == 0
    for name in ("curves.svg", "spread.svg"):
        root = ET.parse(os.path.join(out, name)).getroot()
        assert root.tag.endswith("svg")


def test_run_missing_config_fails_cleanly(tmp_path, capsys):
    code = cli.main(["run", "--config", str(tmp_path / "nope.cfg")])
    assert code == 1
    assert "fedaa: error: ConfigError" in capsys.readouterr().err


def test_run_bad_config_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("rounds = many\n")
    assert cli.main(["run", "--config", str(path)]) == 1
    err = capsys.readouterr().err
    assert "fedaa: error: ParseError" in err
    assert "line 1" in err


def test_sweep_grid_layout(cfg_path, tmp_path):
    out = str(tmp_path / "sweep")
    code = cli.main(
        [
            "sweep", "--config", cfg_path, "--out", out,
            "--vary", "m_percent=50,80",
            "--seeds", "2",
        ]
    )
    assert code == 0
    lines = open(os.path.join(out, "sweep.csv")).read().splitlines()
    # header + 2 cells x (2 seed rows + 1 mean row)
    assert len(lines) == 1 + 2 * 3
    header = lines[0].split(",")
    m_col = header.index("m_pct")
    seed_col = header.index("seed")
    cells = [line.split(",") for line in lines[1:]]
    assert [c[m_col] for c in cells] == ["50", "50", "50", "80", "80", "80"]
    assert [c[seed_col] for c in cells] == ["0", "1", "mean"] * 2


def test_sweep_single_seed_has_no_mean_row(cfg_path, tmp_path):
    out = str(tmp_path / "sweep")
    assert cli.main(["sweep", "--config", cfg_path, "--out", out]) == 0
    lines = open(os.path.join(out, "sweep.csv")).read().splitlines()
    assert len(lines) == 2
    assert "mean" not in lines[1]


def test_sweep_parallel_matches_serial(cfg_path, tmp_path):
    serial = str(tmp_path / "serial")
    parallel = str(tmp_path / "parallel")
    args = ["sweep", "--config", cfg_path, "--vary", "seed=0,1"]
    assert cli.main(args + ["--out", serial]) == 0
    os.environ["FEDAA_THREADS"] = "2"
    try:
        assert cli.main(args + ["--out", parallel]) == 0
    finally:
        del os.environ["FEDAA_THREADS"]

    def strip_runtime(path):
        rows = [line.split(",") for line in open(path).read().splitlines()]
        col = rows[0].index("runtime_seconds")
        return [row[:col] + row[col + 1:] for row in rows]

    assert strip_runtime(os.path.join(serial, "sweep.csv")) == strip_runtime(
        os.path.join(parallel, "sweep.csv")
    )


def test_sweep_vary_validation(cfg_path, capsys):
    assert cli.main(["sweep", "--config", cfg_path, "--vary", "bogus=1"]) == 1
    assert "unknown key" in capsys.readouterr().err
    assert cli.main(["sweep", "--config", cfg_path, "--vary", "rounds"]) == 1
    assert "KEY=V1,V2" in capsys.readouterr().err


def test_report_from_results(cfg_path, tmp_path):
    out = str(tmp_path / "out")
    assert cli.main(["run", "--config", cfg_path, "--out", out]) == 0
    rep = str(tmp_path / "rep")
    code = cli.main(["report", "--input", os.path.join(out, "results.csv"), "--out", rep])
    assert code == 0
    assert os.path.exists(os.path.join(rep, "curves.svg"))
    assert os.path.exists(os.path.join(rep, "spread.svg"))


def test_report_rejects_missing_columns(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("round,reward\n0,0.5\n")
    assert cli.main(["report", "--input", str(path)]) == 1
    assert "missing columns" in capsys.readouterr().err


def test_selftest_passes(capsys):
    assert cli.main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out
    assert out.count("PASS") >= 6
