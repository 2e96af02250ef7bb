"""Command-line interface: happy paths and structured failure exits."""

import pytest

from fisslab.cli import main

GEOM = """
[domain]
x = [0.0, 1.0]
bottom = 0.0
top = 1.0

[[fissure]]
height = 0.2
breakpoints = [0.0, 1.0]
segments = [[0.4]]
"""

BAD_GEOM = GEOM.replace("height = 0.2", "height = 0.3") \
               .replace("segments = [[0.4]]", "segments = [[0.9]]")

SWEEP = """
[sweep]
geometry = "geom.toml"
eps = [0.4, 0.2]
target_h = 0.1
output_dir = "out"

[data]
alpha = "0.1"
F = "1"
"""


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "geom.toml").write_text(GEOM)
    (tmp_path / "sweep.toml").write_text(SWEEP)
    return tmp_path


def test_validate_ok(workdir, capsys):
    assert main(["validate", str(workdir / "geom.toml")]) == 0
    assert "ok: 1 fissure" in capsys.readouterr().out


def test_validate_rejects_pinched(workdir, capsys):
    (workdir / "bad.toml").write_text(BAD_GEOM)
    assert main(["validate", str(workdir / "bad.toml")]) == 2
    err = capsys.readouterr().err
    assert "DisconnectedBlockError" in err


def test_mesh_writes_file(workdir, capsys):
    out = workdir / "mesh.txt"
    assert main(["mesh", str(workdir / "geom.toml"), "--h", "0.1",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "fisslab-mesh 1"


def test_mesh_too_coarse_fails(workdir, capsys):
    assert main(["mesh", str(workdir / "geom.toml"), "--h", "0.5"]) == 2
    assert "TargetTooCoarse" in capsys.readouterr().err


def test_solve_eps_and_dump(workdir, capsys):
    dump = workdir / "system.txt"
    assert main(["solve-eps", str(workdir / "sweep.toml"), "--eps", "0.4",
                 "--dump-system", str(dump)]) == 0
    out = capsys.readouterr().out
    assert "solved" in out and "u1_l2" in out
    assert dump.read_text().startswith("fisslab-system 1")


def test_solve_limit(workdir, capsys):
    assert main(["solve-limit", str(workdir / "sweep.toml")]) == 0
    assert "limit problem: solved" in capsys.readouterr().out


def test_report_missing_file_is_clean_error(workdir, capsys):
    assert main(["report", str(workdir / "nowhere")]) == 2
    assert "error:" in capsys.readouterr().err


def test_sweep_and_report(workdir, capsys):
    assert main(["sweep", str(workdir / "sweep.toml")]) == 0
    capsys.readouterr()
    assert main(["report", str(workdir / "out")]) == 0
    out = capsys.readouterr().out
    assert "ratio_tau_n" in out
    assert out.count("ok") >= 2
