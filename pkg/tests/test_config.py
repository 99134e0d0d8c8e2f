import pytest

from magloc.config import ScenarioConfig, load_config, parse_config
from magloc.errors import ConfigError
from magloc.sensor import MagnetometerSpec


def test_defaults_and_round_trip():
    cfg = ScenarioConfig()
    assert cfg.arrangement == "W6" and cfg.runs_per_point == 100
    assert cfg.magnetometer == MagnetometerSpec()
    back = parse_config(cfg.to_ini())
    assert back.to_ini() == cfg.to_ini()


def test_parse_full(tmp_path):
    text = """
[wires]
arrangement = w15   # case-insensitive
current = 10
[magnetometer]
rel_error = 0.02
noise_basis = component
[earth]
residual_nt = 0, 0, 0
mapping = yxz
[simulation]
runs_per_point = 7
seed = 42
phantom_resolution = 0.02
output = out
"""
    path = tmp_path / "c.ini"
    path.write_text(text)
    cfg = load_config(path)
    assert cfg.arrangement == "W15" and cfg.current == 10.0
    assert cfg.magnetometer == MagnetometerSpec(0.02, 0.12, "component")
    assert cfg.residual_nt == (0, 0, 0) and cfg.earth_mapping == "yxz"
    assert cfg.runs_per_point == 7 and cfg.seed == 42 and cfg.output == "out"
    assert parse_config(cfg.to_ini()) == cfg.with_overrides(clearance=0.2)


def test_overrides_ignore_none():
    cfg = ScenarioConfig().with_overrides(seed=5, runs_per_point=None)
    assert cfg.seed == 5 and cfg.runs_per_point == 100


@pytest.mark.parametrize(
    "text",
    [
        "[wires]\narrangement = W7\n",
        "[wires]\narrangement = W6\nfile = w.txt\n",
        "[wires]\nbogus = 1\n",
        "[nope]\n",
        "[wires]\narrangement = W6\n[simulation]\nruns_per_point = 0\n",
        "[wires]\narrangement = W6\n[simulation]\nseed = -1\n",
        "[wires]\narrangement = W6\n[magnetometer]\nrel_error = 1.5\n",
        "[wires]\narrangement = W6\n[magnetometer]\nnoise_basis = vector\n",
        "[wires]\narrangement = W6\n[earth]\nresidual_nt = 1, 2\n",
        "[wires]\narrangement = W6\n[earth]\nmapping = xxy\n",
        "[wires]\narrangement = W6\ncurrent = abc\n",
        "[simulation]\nseed = 1\n",
        "not an ini",
    ],
)
def test_bad_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/c.ini")
