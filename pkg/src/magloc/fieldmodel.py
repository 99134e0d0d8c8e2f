"""Static field of an infinite DC wire and the geomagnetic residual model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from magloc.geometry import PLANE, Wire, WireSet, wire_distance
from magloc.errors import GeometryError, SingularityError

MU_0 = 4e-7 * math.pi
NANOTESLA = 1e-9

# Residual half-widths (northern, eastern, vertical), mean of the 2020 and
# 2025 model error estimates.
WMM_RESIDUAL_NT = (131.0, 94.0, 157.0)


@dataclass(frozen=True)
class FieldVector:
    bx: float
    by: float
    bz: float
    frame: str = "world"

    @classmethod
    def from_array(cls, v, frame: str = "world") -> "FieldVector":
        return cls(float(v[0]), float(v[1]), float(v[2]), frame)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.bx, self.by, self.bz])

    @property
    def magnitude(self) -> float:
        return math.sqrt(self.bx * self.bx + self.by * self.by + self.bz * self.bz)

    def __add__(self, other: "FieldVector") -> "FieldVector":
        if self.frame != other.frame:
            raise ValueError(f"cannot add {self.frame} and {other.frame} frame vectors")
        return FieldVector(self.bx + other.bx, self.by + other.by, self.bz + other.bz, self.frame)


ZERO_FIELD = FieldVector(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class EarthResidualBounds:
    """Half-widths (tesla) of the uniform residual per geomagnetic component."""

    north: float
    east: float
    vertical: float

    def __post_init__(self):
        for v in (self.north, self.east, self.vertical):
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"residual bounds must be finite and >= 0, got {v!r}")

    @classmethod
    def from_nanotesla(cls, north: float, east: float, vertical: float) -> "EarthResidualBounds":
        return cls(north * NANOTESLA, east * NANOTESLA, vertical * NANOTESLA)

    @classmethod
    def wmm(cls) -> "EarthResidualBounds":
        return cls.from_nanotesla(*WMM_RESIDUAL_NT)

    @classmethod
    def zero(cls) -> "EarthResidualBounds":
        return cls(0.0, 0.0, 0.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.north, self.east, self.vertical])


def parse_mapping(mapping: str) -> tuple[int, int, int]:
    """World axis index receiving each of the (north, east, vertical) components.

    ``"xyz"`` maps north->x, east->y, vertical->z.
    """
    m = str(mapping).strip().lower()
    if sorted(m) != ["x", "y", "z"]:
        raise ValueError(f"earth mapping must be a permutation of 'xyz', got {mapping!r}")
    return tuple("xyz".index(c) for c in m)


def flux_density_at(wire: Wire, point, mu: float = MU_0) -> FieldVector:
    """World-frame flux density of ``wire`` at ``point``: magnitude mu*I/(2*pi*R), azimuthal."""
    p = np.asarray(point, dtype=float)
    r = wire_distance(wire, p)
    if not r > 0:
        raise SingularityError(f"point {tuple(p)} lies on the axis of {wire}")
    a, b = PLANE[wire.axis]
    radial = np.zeros(3)
    radial[a] = p[a] - wire.offset[0]
    radial[b] = p[b] - wire.offset[1]
    direction = np.cross(wire.direction, radial / r)
    return FieldVector.from_array(mu * wire.current / (2 * math.pi * r) * direction)


def field_magnitudes(wireset: WireSet, points, mu: float = MU_0) -> np.ndarray:
    """``(len(points), len(wireset))`` array of per-wire field magnitudes (inf on an axis)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty((len(pts), len(wireset)))
    for j, w in enumerate(wireset):
        a, b = PLANE[w.axis]
        r = np.hypot(pts[:, a] - w.offset[0], pts[:, b] - w.offset[1])
        with np.errstate(divide="ignore"):
            out[:, j] = mu * w.current / (2 * math.pi * r)
    return out


def field_vectors(wireset: WireSet, points, mu: float = MU_0) -> np.ndarray:
    """``(len(points), len(wireset), 3)`` world-frame fields; points must be off every axis."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros((len(pts), len(wireset), 3))
    for j, w in enumerate(wireset):
        a, b = PLANE[w.axis]
        da = pts[:, a] - w.offset[0]
        db = pts[:, b] - w.offset[1]
        r2 = da * da + db * db
        if np.any(r2 == 0):
            raise SingularityError(f"a point lies on the axis of wire {j}")
        k = mu * w.current / (2 * math.pi) / r2
        # axis x radial for the cyclic triple (axis, a, b); sign flips for Y
        sign = -1.0 if w.axis == "Y" else 1.0
        out[:, j, a] = -sign * k * db
        out[:, j, b] = sign * k * da
    return out


def earth_residual(
    bounds: EarthResidualBounds, rng: np.random.Generator, mapping: str = "xyz"
) -> FieldVector:
    """One world-frame residual vector, each component uniform on [-bound, +bound].

    Consumes exactly three uniforms from ``rng``.
    """
    u = rng.random(3)
    comps = bounds.as_array() * (2.0 * u - 1.0)
    world = np.empty(3)
    world[list(parse_mapping(mapping))] = comps
    return FieldVector.from_array(world)


@dataclass(frozen=True)
class SaturationReport:
    max_field: float
    worst_voxel: tuple[float, float, float]
    worst_wire: int
    limit: float
    ok: bool


def validate_saturation(wireset: WireSet, body, limit: float = 0.12, mu: float = MU_0) -> SaturationReport:
    """Largest single-wire field magnitude over all body voxels, checked against ``limit``.

    A voxel on a wire axis yields an infinite field and ``ok=False``.
    """
    if wireset is None or len(wireset.wires) == 0:
        raise GeometryError("wire set is empty")
    voxels = body.voxels if hasattr(body, "voxels") else np.asarray(body, dtype=float)
    if len(voxels) == 0:
        raise ValueError("body has no voxels")
    mags = field_magnitudes(wireset, voxels, mu)
    flat = int(np.argmax(mags))
    iv, iw = divmod(flat, mags.shape[1])
    worst = float(mags[iv, iw])
    return SaturationReport(
        max_field=worst,
        worst_voxel=tuple(float(v) for v in voxels[iv]),
        worst_wire=iw,
        limit=limit,
        ok=bool(worst <= limit),
    )
