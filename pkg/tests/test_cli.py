import json
import subprocess
import sys

import pytest

from amkit.cli import COMMANDS, resolve, run
from amkit.errors import AmkitError
from amkit.io import read_csv

SMALL = {
    "retrieve": ["--D", "16", "--K", "4", "--trials", "20", "--min-success", "0.9"],
    "capacity": ["--dims", "40,60,80", "--trials", "40", "--slope-tol", "0.5", "--ratio-lo", "0.05",
                 "--ratio-hi", "0.5"],
    "scaling": ["--ns", "2", "--samples", "500", "--tol", "0.5"],
    "et-demo": ["--steps", "10"],
    "landscape": ["--n", "21", "--basins", "1", "--beta", "100"],
    "phases": ["--grid-n", "9", "--steps", "2000"],
    "cluster": ["--per-blob", "30", "--epochs", "60", "--restarts", "3"],
    "distributed": ["--trials", "10", "--ladder", "64,256,1024", "--pairs", "30",
                    "--min-success", "0.5"],
    "kernel-table": [],
    "gradcheck": ["--trials", "3"],
}


@pytest.mark.parametrize("command", sorted(COMMANDS))
def test_every_subcommand_runs(command, tmp_path, capsys):
    assert set(SMALL) == set(COMMANDS)
    code = run([command, "--out", str(tmp_path), "--assert"] + SMALL[command])
    out = capsys.readouterr().out
    assert code == 0, out
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == command
    assert manifest["checks"] and all(c["passed"] for c in manifest["checks"])
    for name in manifest["outputs"]:
        assert (tmp_path / name).exists()
    assert "PASS" in out


def test_capacity_outputs(tmp_path):
    assert run(["capacity", "--out", str(tmp_path), "--seed", "1"] + SMALL["capacity"]) == 0
    header, rows = read_csv(tmp_path / "capacity.csv")
    assert {"D", "K"} <= set(header) and len(rows) == 3
    fit = json.loads((tmp_path / "fit.json").read_text())
    assert "slope" in fit


def test_gradcheck_exit_zero(tmp_path):
    assert run(["gradcheck", "--family", "lse", "--trials", "50", "--out", str(tmp_path), "--assert"]) == 0
    report = json.loads((tmp_path / "gradcheck.json").read_text())
    assert report["max_relative_error"]["lse"] < 1e-6


def test_failed_check_exit_code(tmp_path):
    args = ["retrieve", "--out", str(tmp_path), "--D", "16", "--K", "200", "--trials", "10"]
    assert run(args) == 0
    assert run(args + ["--assert"]) == 3


def test_invalid_input_exit_codes(tmp_path, capsys):
    assert run(["retrieve", "--bogus", "1"]) == 2
    assert run(["no-such-command"]) == 2
    assert run(["retrieve", "--out", str(tmp_path), "--D", "abc"]) == 2
    cfg = tmp_path / "c.cfg"
    cfg.write_text("nonsense = 3\n")
    assert run(["retrieve", "--out", str(tmp_path), "--config", str(cfg)]) == 2
    assert run(["gradcheck", "--out", str(tmp_path), "--family", "nope"]) == 2
    assert "error" in capsys.readouterr().err


def test_config_precedence(tmp_path):
    text = "D = 20\nK = 3\n"
    c = resolve("retrieve", {"K": "5", "seed": None, "threads": None}, text)
    assert c["D"] == 20 and c["K"] == 5 and c["trials"] == 200
    with pytest.raises(AmkitError):
        resolve("retrieve", {}, "max-sweeps = lots\n")


def test_reruns_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    base = ["distributed", "--Y", "256", "--trials", "6", "--ladder", "64,256", "--pairs", "10"]
    assert run(base + ["--out", str(a), "--threads", "1"]) == 0
    assert run(base + ["--out", str(b), "--threads", "3"]) == 0
    for name in ("distributed.csv", "ladder.csv", "sketch.amk"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_manifest_rerun_reproduces(tmp_path):
    first = tmp_path / "first"
    assert run(["cluster", "--out", str(first)] + SMALL["cluster"]) == 0
    manifest = json.loads((first / "manifest.json").read_text())
    second = tmp_path / "second"
    assert run(manifest["rerun"][1:] + ["--out", str(second)]) == 0
    assert (first / "cluster.json").read_bytes() == (second / "cluster.json").read_bytes()


def test_threads_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("AMKIT_THREADS", "2")
    assert run(["kernel-table", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "manifest.json").read_text())["threads"] == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "amkit", "kernel-table", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "PASS kernel-table.epanechnikov_moments" in proc.stdout
