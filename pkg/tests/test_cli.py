import os
import subprocess
import sys

import pytest

from magloc.cli import main


@pytest.fixture
def phantom_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("ph") / "ph.txt"
    assert main(["phantom", "--resolution", "0.02", "--out", str(path)]) == 0
    return path


def write_cfg(tmp_path, phantom, extra=""):
    p = tmp_path / "c.ini"
    p.write_text(f"[wires]\narrangement = W6\n[simulation]\nruns_per_point = 2\nphantom = {phantom}\n{extra}")
    return p


def test_phantom_counts(tmp_path, capsys):
    assert main(["phantom", "--out", str(tmp_path / "fine.txt")]) == 0
    fine = int(capsys.readouterr().out.split("voxels = ")[1].split()[0])
    assert 400_000 <= fine <= 800_000
    assert main(["phantom", "--resolution", "0.02", "--out", str(tmp_path / "c.txt")]) == 0
    coarse = int(capsys.readouterr().out.split("voxels = ")[1].split()[0])
    assert 0.7 * 64 <= fine / coarse <= 1.3 * 64


def test_usage_errors(tmp_path):
    for argv in (["phantom"], ["run", "--bogus"], ["report"], ["frobnicate"],
                 ["phantom", "--out", "x", "--resolution", "-1"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2
    assert main(["phantom", "--out", str(tmp_path / "x"), "--resolution", "0.5"]) == 2


def test_validate(tmp_path, phantom_file, capsys):
    assert main(["validate", "--phantom", str(phantom_file)]) == 0
    out = capsys.readouterr().out
    assert "max_field_uT = " in out and "status = ok" in out and "[wires]" in out
    bad = tmp_path / "bad.ini"
    bad.write_text("[wires\narrangement=W6\n")
    assert main(["validate", "--config", str(bad)]) == 2
    # a wire straight through the phantom
    x, y, _ = map(float, phantom_file.read_text().splitlines()[1].split(","))
    wires = tmp_path / "w.txt"
    wires.write_text(
        f"axis=X offset_a={y} offset_b=0.0 current=100\naxis=Y offset_a={x} offset_b=0.0 current=100\n"
        f"axis=Z offset_a={x} offset_b={y} current=100\n"
    )
    assert main(["validate", "--wires", str(wires), "--phantom", str(phantom_file)]) == 1
    assert "SATURATED" in capsys.readouterr().out


def test_run_and_report(tmp_path, phantom_file, capsys):
    cfgp = write_cfg(tmp_path, phantom_file)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(cfgp), "--seed", "4", "--out", str(a), "--threads", "1"]) == 0
    assert main(["run", "--config", str(cfgp), "--seed", "4", "--out", str(b), "--threads", "8"]) == 0
    assert (a / "points.csv").read_bytes() == (b / "points.csv").read_bytes()
    assert "Median position error = " in (a / "summary.txt").read_text()
    assert "seed = 4" in (a / "manifest.txt").read_text()
    capsys.readouterr()
    assert main(["report", "--in", str(a), "--projection", "xz", "--slice", "x=0.7"]) == 0
    assert (a / "projection_xz.csv").exists() and (a / "slice_x_+0.7000.csv").exists()
    assert main(["report", "--in", str(a), "--slice", "z=9"]) == 1
    assert main(["report", "--in", str(tmp_path / "missing"), "--projection", "xz"]) == 2


def test_run_saturation_exit(tmp_path, phantom_file):
    cfgp = write_cfg(tmp_path, phantom_file)
    assert main(["run", "--config", str(cfgp), "--current", "1e6", "--out", str(tmp_path / "o")]) == 1


def test_run_needs_output(tmp_path, phantom_file):
    assert main(["run", "--config", str(write_cfg(tmp_path, phantom_file))]) == 2


def test_console_script_and_env_threads(tmp_path, phantom_file):
    cfgp = write_cfg(tmp_path, phantom_file)
    env = dict(os.environ, MAGLOC_THREADS="4")
    proc = subprocess.run([sys.executable, "-m", "magloc.cli", "run", "--config", str(cfgp),
                           "--out", str(tmp_path / "e")], capture_output=True, text=True, env=env)
    assert proc.returncode == 0, proc.stderr
    assert "Median position error" in proc.stdout
