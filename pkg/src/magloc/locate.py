"""Ranging and lateration.

Ranging inverts the infinite-wire field law, ``R = mu * I / (2 * pi * B)``.
Three axis-aligned wires meeting at a corner give a closed-form
trilateration; families of three or more parallel wires each yield an
in-plane least-squares fix, and the fixes are merged by wire-count
weighted means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from magloc.errors import (
    ArityError,
    InvalidMeasurementError,
    SingularityError,
    UnlocalizableError,
)
from magloc.fieldmodel import MU_0
from magloc.geometry import AXES, AXIS_INDEX, PLANE, Wire, WireSet, _collinear


@dataclass(frozen=True)
class Position:
    x: float
    y: float
    z: float
    available: tuple[bool, bool, bool] = (True, True, True)
    saturated: bool = False

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class PlanarFix:
    """In-plane coordinates recovered from one wire family.

    For family Z these are (x, y); for X, (y, z); for Y, (x, z).
    """

    family: str
    coord_a: float
    coord_b: float


def range_from_field(b: float, current: float, mu: float = MU_0) -> float:
    if not (b > 0 and math.isfinite(b)):
        raise InvalidMeasurementError(f"flux density must be positive and finite, got {b!r}")
    if not current > 0:
        raise InvalidMeasurementError(f"current must be positive, got {current!r}")
    return mu * current / (2 * math.pi * b)


def _clamped_root(v: float) -> float:
    return math.sqrt(v) if v > 0 else 0.0


def trilaterate(rx: float, ry: float, rz: float) -> Position:
    """Closed-form position from distances to the X, Y and Z coordinate axes.

    A negative radicand (inconsistent noisy distances) is clamped to zero
    per coordinate.
    """
    if not (rx > 0 and ry > 0 and rz > 0):
        raise InvalidMeasurementError(f"distances must be positive, got {(rx, ry, rz)}")
    x2, y2, z2 = rx * rx, ry * ry, rz * rz
    return Position(
        _clamped_root(0.5 * (z2 + y2 - x2)),
        _clamped_root(0.5 * (x2 + z2 - y2)),
        _clamped_root(0.5 * (x2 + y2 - z2)),
    )


class FamilySolver:
    """Linearized least-squares lateration for one family of parallel wires.

    Subtracting the first wire's circle equation from the others gives
    ``A r = b`` with rows ``2 (o_i - o_1)`` and right-hand side
    ``R_1^2 - R_i^2 + |o_i|^2 - |o_1|^2``. The minimizer is precomputed
    as a 2 x (k-1) matrix from a QR factorization of ``A``, since ``A``
    depends only on the geometry.
    """

    def __init__(self, offsets):
        off = np.asarray(offsets, dtype=float).reshape(-1, 2)
        if len(off) < 3:
            raise ArityError(f"lateration needs at least 3 wires, got {len(off)}")
        if _collinear(off):
            raise SingularityError("wire offsets are collinear; lateration system is singular")
        self.offsets = off
        self.matrix = 2.0 * (off[1:] - off[0])
        sq = np.einsum("ij,ij->i", off, off)
        self.constant = sq[1:] - sq[0]
        q, r = np.linalg.qr(self.matrix)
        self.pinv = np.linalg.solve(r, q.T)

    def rhs(self, distances) -> np.ndarray:
        d2 = np.square(np.asarray(distances, dtype=float))
        return d2[..., :1] - d2[..., 1:] + self.constant

    def solve(self, distances) -> np.ndarray:
        """In-plane coordinates; ``distances`` may carry leading batch axes."""
        return self.rhs(distances) @ self.pinv.T


def laterate_family(wires: Sequence[Wire], distances: Sequence[float]) -> PlanarFix:
    if len(wires) != len(distances):
        raise ArityError(f"{len(wires)} wires but {len(distances)} distances")
    if len(wires) < 3:
        raise ArityError(f"lateration needs at least 3 wires, got {len(wires)}")
    families = {w.axis for w in wires}
    if len(families) != 1:
        raise ValueError(f"wires must share one axis, got {sorted(families)}")
    # zero is allowed: the point lies on that wire
    if any(not (d >= 0 and math.isfinite(d)) for d in distances):
        raise InvalidMeasurementError("distances must be finite and non-negative")
    a, b = FamilySolver([w.offset for w in wires]).solve(distances)
    return PlanarFix(families.pop(), float(a), float(b))


def fuse(fixes: Sequence[PlanarFix], n: int, m: int, p: int) -> Position:
    """Merge per-family fixes by wire-count weighted means.

    Each coordinate is the mean of the fixes that contain it, weighted by
    the wire count of their family; families without a fix weigh zero.
    """
    counts = {"X": n, "Y": m, "Z": p}
    sums = [0.0, 0.0, 0.0]
    weights = [0, 0, 0]
    for fix in fixes:
        w = counts[fix.family]
        ia, ib = PLANE[fix.family]
        sums[ia] += w * fix.coord_a
        sums[ib] += w * fix.coord_b
        weights[ia] += w
        weights[ib] += w
    for i, wsum in enumerate(weights):
        if wsum == 0:
            raise UnlocalizableError(f"no wire family constrains the {'xyz'[i]} coordinate")
    return Position(*(s / w for s, w in zip(sums, weights)))


def localize(measurements, wireset: WireSet, spec=None, mu: float = MU_0) -> Position:
    """Position from one measurement per wire (same order as ``wireset``).

    ``spec`` is accepted for symmetry with the sensor model and unused.
    Families with fewer than three wires are left out of the fusion.
    """
    if len(measurements) != len(wireset):
        raise ArityError(f"{len(measurements)} measurements for {len(wireset)} wires")
    saturated = any(getattr(mm, "saturated", False) for mm in measurements)
    dist = [
        range_from_field(getattr(mm, "magnitude", mm), w.current, mu)
        for mm, w in zip(measurements, wireset)
    ]
    if wireset.mode == "trilateration":
        by = {w.axis: d for w, d in zip(wireset, dist)}
        rel = trilaterate(by["X"], by["Y"], by["Z"])
        cx, cy, cz = wireset.corner
        return Position(rel.x + cx, rel.y + cy, rel.z + cz, saturated=saturated)

    fixes = []
    counts = list(wireset.counts)
    for axis in AXES:
        idx = wireset.family(axis)
        if len(idx) < 3:
            counts[AXIS_INDEX[axis]] = 0
            continue
        fixes.append(laterate_family([wireset.wires[i] for i in idx], [dist[i] for i in idx]))
    pos = fuse(fixes, *counts)
    return Position(pos.x, pos.y, pos.z, saturated=saturated)
