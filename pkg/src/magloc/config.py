"""Scenario configuration: dataclass plus INI reader/writer.

Example file::

    [wires]
    arrangement = W6          # or: file = cage.wires
    clearance = 0.2           # metres, optional
    current = 100             # amperes

    [magnetometer]
    rel_error = 0.01
    range_max_tesla = 0.12
    noise_basis = magnitude   # or: component

    [earth]
    residual_nt = 131, 94, 157
    mapping = xyz             # world axes for (north, east, vertical)

    [simulation]
    runs_per_point = 100
    seed = 1
    phantom = generate        # or a voxel file path
    phantom_resolution = 0.005
    output = out

Command-line flags override file values. A run's ``manifest.txt`` is
itself a valid config that reproduces the run.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from magloc import body as _body
from magloc.errors import ConfigError
from magloc.fieldmodel import MU_0, WMM_RESIDUAL_NT, EarthResidualBounds, parse_mapping
from magloc.geometry import ARRANGEMENTS, WireSet, builtin_arrangement, default_clearance, load_wires
from magloc.sensor import NOISE_BASES, MagnetometerSpec

_KEYS = {
    "wires": {"arrangement", "file", "clearance", "current"},
    "magnetometer": {"rel_error", "range_max_tesla", "noise_basis"},
    "earth": {"residual_nt", "mapping"},
    "simulation": {
        "runs_per_point",
        "seed",
        "phantom",
        "phantom_height",
        "phantom_resolution",
        "phantom_margin",
        "phantom_floor",
        "permeability",
        "output",
    },
}
# written into run manifests for the record; ignored when read back
_INFO_SECTIONS = {"run", "wireset"}


@dataclass(frozen=True)
class ScenarioConfig:
    arrangement: str | None = "W6"
    wire_file: str | None = None
    clearance: float | None = None
    current: float | None = None
    magnetometer: MagnetometerSpec = field(default_factory=MagnetometerSpec)
    residual_nt: tuple[float, float, float] = WMM_RESIDUAL_NT
    earth_mapping: str = "xyz"
    runs_per_point: int = 100
    phantom: str = "generate"
    phantom_height: float = _body.REFERENCE_HEIGHT
    phantom_resolution: float = 0.005
    phantom_margin: float = _body.DEFAULT_MARGIN
    phantom_floor: float = _body.DEFAULT_FLOOR
    seed: int = 0
    mu: float = MU_0
    output: str | None = None

    def __post_init__(self):
        if (self.arrangement is None) == (self.wire_file is None):
            raise ConfigError("exactly one of wires.arrangement and wires.file must be set")
        if self.arrangement is not None and self.arrangement.upper() not in ARRANGEMENTS:
            raise ConfigError(f"unknown arrangement {self.arrangement!r}; expected one of {ARRANGEMENTS}")
        if self.runs_per_point < 1:
            raise ConfigError(f"runs_per_point must be >= 1, got {self.runs_per_point}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.current is not None and not self.current > 0:
            raise ConfigError(f"current must be positive, got {self.current}")
        if self.clearance is not None and not self.clearance > 0:
            raise ConfigError(f"clearance must be positive, got {self.clearance}")
        if len(self.residual_nt) != 3 or any(not (v >= 0) for v in self.residual_nt):
            raise ConfigError(f"residual_nt must be three non-negative values, got {self.residual_nt}")
        if not self.mu > 0:
            raise ConfigError(f"permeability must be positive, got {self.mu}")
        try:
            parse_mapping(self.earth_mapping)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def residual(self) -> EarthResidualBounds:
        return EarthResidualBounds.from_nanotesla(*self.residual_nt)

    def with_overrides(self, **kw) -> "ScenarioConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def build_body(self):
        if self.phantom == "generate":
            return _body.generate_phantom(
                self.phantom_height, self.phantom_resolution, self.phantom_margin, self.phantom_floor
            )
        return _body.load_voxels(self.phantom)

    def build_wireset(self, envelope=None) -> WireSet:
        if self.wire_file is not None:
            ws = load_wires(self.wire_file)
            return ws.with_current(self.current) if self.current is not None else ws
        return builtin_arrangement(
            self.arrangement,
            self.clearance,
            100.0 if self.current is None else self.current,
            envelope,
        )

    def to_ini(self) -> str:
        """Fully resolved configuration; reading it back gives an equal config."""
        cp = configparser.ConfigParser()
        wires = {}
        if self.wire_file is not None:
            wires["file"] = self.wire_file
        else:
            wires["arrangement"] = self.arrangement.upper()
            wires["clearance"] = repr(
                default_clearance(self.arrangement) if self.clearance is None else self.clearance
            )
        if self.current is not None or self.wire_file is None:
            wires["current"] = repr(100.0 if self.current is None else float(self.current))
        cp["wires"] = wires
        m = self.magnetometer
        cp["magnetometer"] = {
            "rel_error": repr(m.rel_error),
            "range_max_tesla": repr(m.range_max),
            "noise_basis": m.noise_basis,
        }
        cp["earth"] = {
            "residual_nt": ", ".join(repr(float(v)) for v in self.residual_nt),
            "mapping": self.earth_mapping,
        }
        sim = {
            "runs_per_point": str(self.runs_per_point),
            "seed": str(self.seed),
            "phantom": self.phantom,
        }
        if self.phantom == "generate":
            sim.update(
                phantom_height=repr(self.phantom_height),
                phantom_resolution=repr(self.phantom_resolution),
                phantom_margin=repr(self.phantom_margin),
                phantom_floor=repr(self.phantom_floor),
            )
        sim["permeability"] = repr(self.mu)
        if self.output is not None:
            sim["output"] = self.output
        cp["simulation"] = sim
        lines = []
        for sec in cp.sections():
            lines.append(f"[{sec}]")
            lines.extend(f"{k} = {v}" for k, v in cp[sec].items())
            lines.append("")
        return "\n".join(lines)


def _num(sec, key, conv, default):
    if key not in sec:
        return default
    raw = sec[key]
    try:
        val = conv(raw)
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key}: cannot parse {raw!r}") from None
    if isinstance(val, float) and not math.isfinite(val):
        raise ConfigError(f"[{sec.name}] {key}: must be finite")
    return val


def parse_config(text: str, source: str = "<string>") -> ScenarioConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    for sec in cp.sections():
        if sec in _INFO_SECTIONS:
            continue
        if sec not in _KEYS:
            raise ConfigError(f"{source}: unknown section [{sec}]")
        unknown = set(cp[sec]) - _KEYS[sec]
        if unknown:
            raise ConfigError(f"{source}: unknown keys in [{sec}]: {sorted(unknown)}")

    get = lambda s: cp[s] if cp.has_section(s) else cp[configparser.DEFAULTSECT]  # noqa: E731
    w, mg, e, sim = get("wires"), get("magnetometer"), get("earth"), get("simulation")
    kw = {}
    if "file" in w:
        kw["wire_file"] = w["file"]
        kw["arrangement"] = w.get("arrangement") or None
    elif "arrangement" in w:
        kw["arrangement"] = w["arrangement"].upper()
    kw["clearance"] = _num(w, "clearance", float, None)
    kw["current"] = _num(w, "current", float, None)

    basis = mg.get("noise_basis", MagnetometerSpec.noise_basis)
    if basis not in NOISE_BASES:
        raise ConfigError(f"[magnetometer] noise_basis must be one of {NOISE_BASES}, got {basis!r}")
    try:
        kw["magnetometer"] = MagnetometerSpec(
            _num(mg, "rel_error", float, MagnetometerSpec.rel_error),
            _num(mg, "range_max_tesla", float, MagnetometerSpec.range_max),
            basis,
        )
    except ValueError as exc:
        raise ConfigError(f"[magnetometer] {exc}") from None

    if "residual_nt" in e:
        try:
            vals = tuple(float(v) for v in e["residual_nt"].split(","))
        except ValueError:
            raise ConfigError(f"[earth] residual_nt: cannot parse {e['residual_nt']!r}") from None
        if len(vals) != 3:
            raise ConfigError("[earth] residual_nt needs three values (north, east, vertical)")
        kw["residual_nt"] = vals
    if "mapping" in e:
        kw["earth_mapping"] = e["mapping"]

    kw["runs_per_point"] = _num(sim, "runs_per_point", int, 100)
    kw["seed"] = _num(sim, "seed", int, 0)
    kw["phantom"] = sim.get("phantom", "generate")
    kw["phantom_height"] = _num(sim, "phantom_height", float, _body.REFERENCE_HEIGHT)
    kw["phantom_resolution"] = _num(sim, "phantom_resolution", float, 0.005)
    kw["phantom_margin"] = _num(sim, "phantom_margin", float, _body.DEFAULT_MARGIN)
    kw["phantom_floor"] = _num(sim, "phantom_floor", float, _body.DEFAULT_FLOOR)
    kw["mu"] = _num(sim, "permeability", float, MU_0)
    kw["output"] = sim.get("output")
    if "arrangement" not in kw and "wire_file" not in kw:
        raise ConfigError(f"{source}: [wires] needs 'arrangement' or 'file'")
    return ScenarioConfig(**kw)


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))
