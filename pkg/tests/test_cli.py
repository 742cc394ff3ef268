from __future__ import annotations

import json
import math
import subprocess
import sys

import pytest

from wellspec import cli


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


SUBCRITICAL = """
nu = 3
[potential]
kind = "flat"
rho = 1.0
depth = 2.0
[geometry]
kind = "straight"
n = 1
"""

BEND = f"""
nu = 2
[potential]
kind = "flat"
depth = 4.0
rho = 0.5
[bend_sweep]
n = 7
a = 2.0
betas = [0.0, {math.pi / 12!r}, {math.pi / 6!r}, {math.pi / 4!r}, {math.pi / 3!r}]
[solver]
radial_order = 4
angular_order = 8
"""


def test_spectrum_no_bound_state(tmp_path):
    cfg = _write(tmp_path, "c.toml", SUBCRITICAL)
    assert cli.main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    data = json.loads((tmp_path / "o" / "spectrum.json").read_text())
    assert data["no_bound_state"] is True and data["eigenvalues"] == [] and data["schema"] == 1
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    for key in ("config_sha256", "versions", "seed", "wall_time_s", "config", "command"):
        assert key in man


def test_unknown_key_exits_before_compute(tmp_path, capsys):
    cfg = _write(tmp_path, "c.toml", SUBCRITICAL.replace("depth = 2.0", "depht = 2.0"))
    out = tmp_path / "o"
    assert cli.main(["spectrum", "--config", str(cfg), "--out", str(out)]) == 2
    assert "potential.depht" in capsys.readouterr().err
    assert not out.exists()


def test_toml_syntax_error_reports_line(tmp_path, capsys):
    cfg = _write(tmp_path, "c.toml", "nu = 2\n[potential\n")
    assert cli.main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "line 2" in capsys.readouterr().err


def test_missing_table_file(tmp_path):
    cfg = _write(tmp_path, "c.toml", 'nu = 2\n[potential]\nkind = "table"\ntable_path = "nope.csv"\n')
    assert cli.main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_convergence_failure_exit_three(tmp_path):
    text = """
nu = 2
[potential]
kind = "flat"
depth = 4.0
rho = 0.5
[geometry]
kind = "straight"
n = 1
[spectrum]
threshold = true
threshold_a = 2.0
threshold_tol = 1e-12
threshold_max_wells = 41
[solver]
radial_order = 4
angular_order = 4
"""
    cfg = _write(tmp_path, "c.toml", text)
    out = tmp_path / "o"
    assert cli.main(["spectrum", "--config", str(cfg), "--out", str(out)]) == 3
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["diagnostics"]["sequence"]


def test_bend_sweep_and_determinism(tmp_path):
    cfg = _write(tmp_path, "b.toml", BEND)
    for d in ("o1", "o2"):
        assert cli.main(["bend-sweep", "--config", str(cfg), "--out", str(tmp_path / d)]) == 0
    a = (tmp_path / "o1" / "bend_sweep.csv").read_bytes()
    assert a == (tmp_path / "o2" / "bend_sweep.csv").read_bytes()
    lines = a.decode().splitlines()
    assert lines[0] == "beta,e1,e0_reference,n_wells,kappa"
    e1 = [float(line.split(",")[1]) for line in lines[1:]]
    assert all(x < e1[0] - 1e-8 for x in e1[1:])
    summary = json.loads((tmp_path / "o1" / "bend_sweep.json").read_text())
    assert summary["bent_below_straight"] is True


def test_oracle_commands(tmp_path):
    cfg = _write(tmp_path, "p.toml", 'nu = 3\n[oracle]\nkind = "point"\nalpha = 0.0\n'
                                     'centers = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]\n')
    assert cli.main(["oracle", "point", "--config", str(cfg), "--out", str(tmp_path / "p")]) == 0
    data = json.loads((tmp_path / "p" / "oracle_point.json").read_text())
    assert data["kappas"][0] == pytest.approx(0.5671432904, abs=1e-10)
    cfg2 = _write(tmp_path, "r.toml", 'nu = 2\n[potential]\nkind = "flat"\ndepth = 4.0\n')
    assert cli.main(["oracle", "radial", "--config", str(cfg2), "--out", str(tmp_path / "r")]) == 0
    assert len(json.loads((tmp_path / "r" / "oracle_radial.json").read_text())["eigenvalues"]) == 1
    assert cli.main(["spectrum", "radial", "--config", str(cfg2), "--out", str(tmp_path / "x")]) == 2


def test_bands_and_shrink(tmp_path):
    cfg = _write(tmp_path, "b.toml", 'nu = 2\n[potential]\nkind = "flat"\ndepth = 4.0\n'
                                     '[bands]\na = 4.0\nT = 4.0\nh = 0.25\nk = 2\n')
    assert cli.main(["bands", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "b" / "bands.csv").read_text().startswith("theta,band1,band2")
    cfg2 = _write(tmp_path, "s.toml", f'nu = 3\n[potential]\nkind = "flat"\ndepth = {math.pi**2 / 4!r}\n'
                                      '[shrink]\neps = [0.4, 0.2]\nmu_prime0 = 1.0\n'
                                      '[solver]\nradial_order = 4\nangular_order = 4\n')
    assert cli.main(["converge-shrink", "--config", str(cfg2), "--out", str(tmp_path / "s")]) == 0
    assert (tmp_path / "s" / "shrink.csv").read_text().startswith("eps,e_regular,e_point,abs_diff")


def test_circle_opt_seed_flag(tmp_path):
    cfg = _write(tmp_path, "c.toml", 'nu = 2\n[potential]\nkind = "flat"\ndepth = 4.0\n'
                                     '[search]\nn = 3\nradius = 4.0\nbudget = 30\nrestarts = 1\n'
                                     '[solver]\nradial_order = 4\nangular_order = 8\n')
    assert cli.main(["circle-opt", "--config", str(cfg), "--out", str(tmp_path / "c"), "--seed", "5"]) == 0
    data = json.loads((tmp_path / "c" / "circle_opt.json").read_text())
    assert data["seed"] == 5 and data["schema"] == 1


def test_console_entry_point(tmp_path):
    cfg = _write(tmp_path, "c.toml", SUBCRITICAL)
    proc = subprocess.run([sys.executable, "-m", "wellspec.cli", "spectrum", "--config", str(cfg),
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0
