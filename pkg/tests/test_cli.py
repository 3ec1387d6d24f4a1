import filecmp
import json
from pathlib import Path

import numpy as np
import pytest

from lockbif.cli import main
from lockbif.config import RunConfig, load_config
from lockbif.errors import ConfigError
from lockbif.output import dumps_json, fmt_float


REFERENCE_INI = """
[domain]
kind = interval
dimension = 1
r0 = 0.0
r1 = 3.141592653589793

[potential]
kind = constant
value = 1.0

[grid]
points = {points}

[coupling]
n = 2
mu = 1.0, 1.0

[solver]
newton_tol = 1e-11
kmax = 4

[continuation]
ds0 = 2e-2
max_steps = 8
eps = 1e-2

[output]
directory = {outdir}
formats = csv, json
"""


@pytest.fixture()
def ini(tmp_path):
    def make(points=360, mu="1.0, 1.0", extra=""):
        text = REFERENCE_INI.format(points=points, outdir=tmp_path / "out")
        text = text.replace("mu = 1.0, 1.0", f"mu = {mu}")
        path = tmp_path / "run.ini"
        path.write_text(text + extra)
        return str(path)

    return make


def test_load_config_roundtrip(ini):
    cfg = load_config(ini())
    assert cfg.grid_points == 360
    assert cfg.mu == (1.0, 1.0)
    assert cfg.kmax == 4
    resolved = cfg.resolved()
    assert resolved["coupling"]["mu"] == "1, 1"
    assert resolved["grid"]["points"] == "360"


def test_config_validation_errors(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[coupling]\nn = 3\nmu = 1.0, 2.0\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")
    cfg = RunConfig(grid_points=8)
    with pytest.raises(ConfigError):
        cfg.validate()


def test_float_formatting():
    assert fmt_float(0.1) == "0.10000000000000001"
    assert fmt_float(1.0) == "1"
    doc = dumps_json({"a": [1.5, None, True], "b": "x|y"})
    assert '"a"' in doc and "1.5" in doc and "null" in doc and "true" in doc


def test_bifpoints_closed_form(ini, tmp_path):
    rc = main(["--config", ini(), "bifpoints"])
    assert rc == 0
    out = tmp_path / "out"
    data = json.loads((out / "bifpoints.json").read_text())
    assert data["schema"] == 1
    assert data["config"]["coupling"]["mu"] == "1, 1"
    for row in data["points"]:
        lam = row["lambda_k"]
        assert row["beta_k"] == pytest.approx((3 - lam) / (1 + lam), abs=1e-10)
        assert row["kernel_dim"] == row["n_k"]
    csv_lines = (out / "bifpoints.csv").read_text().splitlines()
    header = [l for l in csv_lines if not l.startswith("#")][0]
    assert header == "k,lambda_k,n_k,beta_k,kernel_dim"


def test_ground_state_and_spectrum_commands(ini, tmp_path):
    assert main(["--config", ini(), "ground-state"]) == 0
    assert main(["--config", ini(), "spectrum"]) == 0
    out = tmp_path / "out"
    gs = json.loads((out / "ground_state.json").read_text())
    assert gs["residual_norm"] < 1e-9
    assert gs["min_w"] > 0
    spec = json.loads((out / "spectrum.json").read_text())
    lam = [c["lambda"] for c in spec["clusters"]]
    assert lam[0] == pytest.approx(1.0, abs=1e-9)
    assert all(b > a for a, b in zip(lam, lam[1:]))


def test_determinism_byte_identical(ini, tmp_path):
    config = ini()
    main(["--config", config, "--out", str(tmp_path / "a"), "bifpoints"])
    main(["--config", config, "--out", str(tmp_path / "b"), "bifpoints"])
    assert filecmp.cmp(
        tmp_path / "a" / "bifpoints.csv", tmp_path / "b" / "bifpoints.csv", shallow=False
    )
    assert filecmp.cmp(
        tmp_path / "a" / "bifpoints.json", tmp_path / "b" / "bifpoints.json", shallow=False
    )


def test_continue_command(ini, tmp_path):
    rc = main(["--config", ini(), "continue", "--k", "2", "--partition", "1|2", "--eps", "1e-2"])
    assert rc == 0
    out = tmp_path / "out"
    doc = json.loads((out / "branch_k2_1_2_+.json").read_text())
    assert doc["origin"]["k"] == 2
    assert doc["partition"] == "1|2"
    assert doc["termination"] in (
        "max-steps", "beta-bound", "positivity-lost", "returned-to-locked",
    )
    assert len(doc["points"]) >= 3
    for p in doc["points"]:
        assert p["residual"] <= 1e-9
        assert p["full_residual"] <= 1e-9


def test_sweep_command_counts(tmp_path):
    # n=3 at k=2 only: exactly 2^(n-1) - 1 = 3 branch files
    ini_path = tmp_path / "n3.ini"
    ini_path.write_text(
        REFERENCE_INI.format(points=360, outdir=tmp_path / "out").replace(
            "mu = 1.0, 1.0", "mu = 1.0, 2.0, 3.0"
        ).replace("n = 2", "n = 3")
    )
    rc = main(["--config", str(ini_path), "sweep", "--k", "2", "--jobs", "2"])
    assert rc == 0
    out = tmp_path / "out"
    files = sorted(out.glob("branch_k2_*.json"))
    assert len(files) == 3
    sweep = json.loads((out / "sweep.json").read_text())
    assert [b["partition"] for b in sweep["branches"]] == ["1|2,3", "1,2|3", "1,3|2"]


def test_locked_and_morse_scan_commands(ini, tmp_path):
    assert main(["--config", ini(), "locked", "--samples", "12"]) == 0
    assert main(["--config", ini(), "morse-scan", "--samples", "8"]) == 0
    out = tmp_path / "out"
    scan = json.loads((out / "morse_scan.json").read_text())
    for row in scan["rows"]:
        assert row["morse_index_direct"] == row["morse_index_formula"]
        assert row["kernel_dim"] == 0


def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[grid]\npoints = 4\n")
    assert main(["--config", str(bad), "bifpoints"]) == 3

    neg = tmp_path / "neg.ini"
    neg.write_text(
        REFERENCE_INI.format(points=64, outdir=tmp_path / "out").replace(
            "value = 1.0", "value = -10.0"
        )
    )
    assert main(["--config", str(neg), "ground-state"]) == 3  # inadmissible potential

    missing_k = main(["--config", str(tmp_path / "nope.ini"), "bifpoints"])
    assert missing_k == 3


def test_verify_command_small(tmp_path):
    ini_path = tmp_path / "v.ini"
    ini_path.write_text(REFERENCE_INI.format(points=400, outdir=tmp_path / "out"))
    rc = main(["--config", str(ini_path), "verify"])
    assert rc == 0
    doc = json.loads((tmp_path / "out" / "verify.json").read_text())
    assert all(c["passed"] for c in doc["checks"])
