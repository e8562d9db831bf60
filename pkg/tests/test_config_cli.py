import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ergolock.cli import main
from ergolock.config import ParseError, SchemaError, fmt, parse_config

ORBITS_CFG = "map.family = doubling\npotential.family = cosine\npotential.theta = 0.0\n"
CERT_CFG = """# inputs of the worked certificate example
certify.K = 1
certify.delta = 0.1
certify.lambda = 2
certify.L = 3
certify.lip_f = 2
certify.gap = 0.5
certify.p0 = 1
certify.alpha = 1
"""
SCAN_CFG = """map.family = logistic
map.a = 3.0
potential.family = cosine
scan.a_min = 3.0
scan.a_max = 3.5
scan.a_steps = 6
scan.theta_min = 0.0
scan.theta_max = 1.0
scan.theta_steps = 8
numeric.max_period = 6
"""


def _run(tmp_path, command, text, *extra, name="cfg.txt"):
    cfg = tmp_path / name
    cfg.write_text(text)
    out = tmp_path / "out"
    code = main([command, "--config", str(cfg), "--out", str(out), *extra])
    return code, out


def _data_rows(path: Path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_parse_valid_with_defaults():
    cfg = parse_config(ORBITS_CFG, "orbits")
    assert cfg["map.family"] == "doubling" and cfg["potential.theta"] == 0.0
    assert cfg["numeric.tol"] == 1e-9 and cfg["numeric.max_period"] == 12
    assert cfg["numeric.seed"] == 0 and cfg["numeric.n"] == 4096


def test_unknown_key():
    with pytest.raises(SchemaError) as exc:
        parse_config(ORBITS_CFG + "map.dimension = 2\n", "orbits")
    assert exc.value.key == "map.dimension"


def test_alpha_out_of_range():
    with pytest.raises(SchemaError) as exc:
        parse_config(ORBITS_CFG + "potential.alpha = 1.5\n", "orbits")
    assert exc.value.key == "potential.alpha"


def test_parse_error_line_number():
    with pytest.raises(ParseError) as exc:
        parse_config("map.family = doubling\nthis line has no equals sign\n", "orbits")
    assert exc.value.line == 2
    with pytest.raises(ParseError) as exc:
        parse_config("map.family = doubling\n# c\nmap.family = tent\n", "orbits")
    assert exc.value.line == 3


def test_missing_required_key():
    with pytest.raises(SchemaError) as exc:
        parse_config("map.family = logistic\npotential.family = cosine\n", "orbits")
    assert exc.value.key == "map.a"


def test_command_mismatch():
    with pytest.raises(SchemaError):
        parse_config("command = scan\n" + ORBITS_CFG, "orbits")


def test_fmt_round_trips():
    for x in (0.1, 1 / 3, 2.0 ** -1074, 1e308, -0.0):
        assert float(fmt(x)) == x
    assert fmt(float("inf")) == "inf" and fmt(True) == "true"


def test_hash_tracks_meaningful_keys():
    base = parse_config(ORBITS_CFG, "orbits").digest()
    assert parse_config("# comment\n" + ORBITS_CFG, "orbits").digest() == base
    assert parse_config(ORBITS_CFG.replace("0.0", "0.00"), "orbits").digest() == base
    assert parse_config(ORBITS_CFG, "orbits", {"numeric.seed": 5}).digest() == base
    assert parse_config(ORBITS_CFG + "numeric.n = 128\n", "orbits").digest() == base
    assert parse_config(ORBITS_CFG.replace("0.0", "0.25"), "orbits").digest() != base
    assert parse_config(ORBITS_CFG + "numeric.max_period = 5\n", "orbits").digest() != base
    assert parse_config(ORBITS_CFG + "potential.amp = 2\n", "orbits").digest() != base


@given(theta=st.floats(-10, 10), other=st.floats(-10, 10))
def test_hash_injective_on_theta(theta, other):
    a = parse_config(ORBITS_CFG.replace("0.0", repr(theta)), "orbits").digest()
    b = parse_config(ORBITS_CFG.replace("0.0", repr(other)), "orbits").digest()
    assert (a == b) == (theta == other)


def test_cli_certify(tmp_path):
    code, out = _run(tmp_path, "certify", CERT_CFG)
    assert code == 0
    doc = json.loads((out / "certificate.json").read_text())
    assert doc["derived"]["C"] == 363264
    assert doc["derived_exact"]["r"] == "1/32"
    assert doc["metadata"]["command"] == "certify"
    assert set(doc["budget"]) == {"xi_seminorm_max", "xi_sup_max", "penalty_scale", "d_g_max"}


def test_cli_orbits_rows(tmp_path):
    code, out = _run(tmp_path, "orbits", ORBITS_CFG + "numeric.max_period = 2\n")
    assert code == 0
    text = (out / "orbits.csv").read_text()
    header = [l for l in text.splitlines() if l.startswith("#")]
    assert any(l.startswith("# command=orbits") for l in header)
    assert any(l.startswith("# config_sha256=") for l in header)
    assert any(l.startswith("# seed=0") for l in header)
    assert any(l.startswith("# version=") for l in header)
    rows = _data_rows(out / "orbits.csv")
    sets = sorted(tuple(float(v) for v in r["points"].split()) for r in rows)
    assert len(sets) == 2
    assert sets[0] == (0.0,)
    assert sets[1] == pytest.approx((1 / 3, 2 / 3), abs=1e-15)


def test_cli_empty_scan_grid(tmp_path):
    code, _ = _run(tmp_path, "scan", SCAN_CFG.replace("scan.a_steps = 6", "scan.a_steps = 0"))
    assert code == 2


def test_cli_bad_config_exit_code(tmp_path):
    assert _run(tmp_path, "orbits", ORBITS_CFG + "map.dimension = 2\n")[0] == 2
    assert _run(tmp_path, "orbits", "map.family doubling\n")[0] == 2


def test_cli_computational_failure_exit_code(tmp_path):
    text = ORBITS_CFG + "numeric.max_iter = 1\nnumeric.tol = 1e-15\nnumeric.n = 64\n"
    text = text.replace("0.0", "0.3")
    assert _run(tmp_path, "subaction", text)[0] == 1


def test_cli_scan_deterministic(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    c1, o1 = _run(tmp_path / "a", "scan", SCAN_CFG)
    c2, o2 = _run(tmp_path / "b", "scan", SCAN_CFG, "--threads", "3")
    assert c1 == c2 == 0
    for name in ("scan.csv", "scan.json"):
        assert (o1 / name).read_bytes() == (o2 / name).read_bytes()


def test_cli_all_subcommands_run(tmp_path):
    cases = {
        "oracle": ORBITS_CFG + "numeric.n = 128\n",
        "subaction": ORBITS_CFG + "numeric.n = 256\n",
        "extend": "map.family = sine\nmap.offset = 0.5\nmap.amp = 0.25\nnumeric.verify_period = 6\n",
        "lock-test": ("map.family = logistic\nmap.a = 3.2\npotential.family = distance\n"
                      "potential.orbit_period = 2\nnumeric.samples = 20\nnumeric.max_period = 6\n"),
    }
    for cmd, text in cases.items():
        d = tmp_path / cmd
        d.mkdir()
        assert _run(d, cmd, text)[0] == 0, cmd
    lock = json.loads((tmp_path / "lock-test" / "out" / "lock_test.json").read_text())
    assert lock["lock_rate"] == 1.0


def test_console_entry_point(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text(CERT_CFG)
    proc = subprocess.run([sys.executable, "-m", "ergolock.cli", "certify", "--config", str(cfg),
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "certificate.json").exists()
