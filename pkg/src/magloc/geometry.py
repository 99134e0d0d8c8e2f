"""Wires, wire arrangements and sensor orientations.

Every wire is an infinite straight conductor parallel to one coordinate
axis. Its ``offset`` holds the two coordinates of the wire in the plane
perpendicular to its axis, in ascending axis order:

    X-wire -> (y, z),  Y-wire -> (x, z),  Z-wire -> (x, y)

Current flows in the +axis direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from magloc.body import BoundingBox, default_envelope
from magloc.errors import GeometryError

AXES = ("X", "Y", "Z")
AXIS_INDEX = {"X": 0, "Y": 1, "Z": 2}
# in-plane coordinate indices for each wire family
PLANE = {"X": (1, 2), "Y": (0, 2), "Z": (0, 1)}

ARRANGEMENTS = ("W3", "W6", "W9", "W15", "W30")

# Distance (m) between the body bounding box and the cage. The three-wire
# corner sits further out than the multi-wire cages.
DEFAULT_CLEARANCE = 0.2
DEFAULT_CORNER_CLEARANCE = 1.0


@dataclass(frozen=True)
class Wire:
    axis: str
    offset: tuple[float, float]
    current: float

    def __post_init__(self):
        axis = str(self.axis).upper()
        if axis not in AXIS_INDEX:
            raise GeometryError(f"wire axis must be one of X, Y, Z; got {self.axis!r}")
        off = tuple(float(v) for v in self.offset)
        if len(off) != 2 or not all(math.isfinite(v) for v in off):
            raise GeometryError(f"wire offset must be two finite numbers, got {self.offset!r}")
        cur = float(self.current)
        if not (cur > 0 and math.isfinite(cur)):
            raise GeometryError(f"wire current must be positive and finite, got {self.current!r}")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "offset", off)
        object.__setattr__(self, "current", cur)

    @property
    def axis_index(self) -> int:
        return AXIS_INDEX[self.axis]

    @property
    def direction(self) -> np.ndarray:
        d = np.zeros(3)
        d[self.axis_index] = 1.0
        return d


def wire_distance(wire: Wire, point) -> float:
    """Perpendicular distance from ``point`` to the infinite line of ``wire``."""
    a, b = PLANE[wire.axis]
    return math.hypot(point[a] - wire.offset[0], point[b] - wire.offset[1])


def _collinear(points: np.ndarray, tol: float = 1e-9) -> bool:
    if len(points) < 3:
        return True
    d = points[1:] - points[0]
    scale = max(np.abs(d).max(), 1e-300)
    return np.linalg.matrix_rank(d / scale, tol=tol) < 2


@dataclass(frozen=True)
class WireSet:
    """Ordered wires plus the lateration mode they support.

    ``trilateration`` mode is exactly one wire per axis, all three passing
    through a common corner point. Otherwise at least two axis families
    need three or more wires with non-collinear offsets.
    """

    wires: tuple[Wire, ...]

    def __post_init__(self):
        wires = tuple(self.wires)
        if not wires:
            raise GeometryError("wire set is empty")
        object.__setattr__(self, "wires", wires)
        counts = self.counts
        if len(wires) == 3 and counts == (1, 1, 1):
            self._check_corner()
            return
        usable = [ax for ax, k in zip(AXES, counts) if k >= 3]
        for ax in usable:
            if _collinear(self.family_offsets(ax)):
                raise GeometryError(f"{ax}-wire offsets are collinear")
        if len(usable) < 2:
            raise GeometryError(
                f"wire set {counts} supports neither trilateration (one wire per axis) "
                "nor multilateration (two axis families with >= 3 wires)"
            )

    def _check_corner(self):
        by = {w.axis: w.offset for w in self.wires}
        # X:(y,z) Y:(x,z) Z:(x,y) must agree pairwise
        if not (
            math.isclose(by["Y"][0], by["Z"][0], abs_tol=1e-12)
            and math.isclose(by["X"][0], by["Z"][1], abs_tol=1e-12)
            and math.isclose(by["X"][1], by["Y"][1], abs_tol=1e-12)
        ):
            raise GeometryError("three-wire set must have X, Y and Z wires meeting at one corner")

    def __len__(self) -> int:
        return len(self.wires)

    def __iter__(self):
        return iter(self.wires)

    @property
    def counts(self) -> tuple[int, int, int]:
        """``(n, m, p)``: number of X-, Y- and Z-wires."""
        c = [0, 0, 0]
        for w in self.wires:
            c[w.axis_index] += 1
        return tuple(c)

    @property
    def n(self) -> int:
        return self.counts[0]

    @property
    def m(self) -> int:
        return self.counts[1]

    @property
    def p(self) -> int:
        return self.counts[2]

    @property
    def mode(self) -> str:
        return "trilateration" if self.counts == (1, 1, 1) else "multilateration"

    @property
    def corner(self) -> tuple[float, float, float]:
        """Common point of the three wires in trilateration mode."""
        if self.mode != "trilateration":
            raise GeometryError("corner is only defined for a three-wire set")
        by = {w.axis: w.offset for w in self.wires}
        return (by["Z"][0], by["Z"][1], by["X"][1])

    def family(self, axis: str) -> list[int]:
        return [i for i, w in enumerate(self.wires) if w.axis == axis]

    def family_offsets(self, axis: str) -> np.ndarray:
        return np.array([self.wires[i].offset for i in self.family(axis)], dtype=float).reshape(-1, 2)

    def with_current(self, current: float) -> "WireSet":
        return WireSet(tuple(Wire(w.axis, w.offset, current) for w in self.wires))

    def to_text(self) -> str:
        lines = ["# axis offset_a offset_b [m] current [A]"]
        for w in self.wires:
            lines.append(
                f"axis={w.axis} offset_a={w.offset[0]!r} offset_b={w.offset[1]!r} current={w.current!r}"
            )
        return "\n".join(lines) + "\n"


def parse_wires(text: str, source: str = "<string>") -> WireSet:
    """Parse ``key=value`` wire records, one wire per line."""
    wires = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        rec = {}
        for tok in line.replace(",", " ").split():
            if "=" not in tok:
                raise GeometryError(f"{source}:{lineno}: expected key=value, got {tok!r}")
            k, v = tok.split("=", 1)
            rec[k.strip().lower()] = v.strip()
        missing = {"axis", "offset_a", "offset_b", "current"} - rec.keys()
        if missing:
            raise GeometryError(f"{source}:{lineno}: missing fields {sorted(missing)}")
        try:
            wires.append(
                Wire(rec["axis"], (float(rec["offset_a"]), float(rec["offset_b"])), float(rec["current"]))
            )
        except ValueError as exc:
            raise GeometryError(f"{source}:{lineno}: {exc}") from None
    return WireSet(tuple(wires))


def load_wires(path) -> WireSet:
    path = Path(path)
    return parse_wires(path.read_text(), str(path))


def save_wires(wireset: WireSet, path) -> None:
    Path(path).write_text(wireset.to_text())


def family_split(total: int) -> tuple[int, int, int]:
    """Number of (X, Y, Z) wires for a cage of ``total`` wires.

    Z-wires run along the body and take the largest share (about 7/15);
    X and Y get about 4/15 each, never fewer than three.
    """
    if total == 3:
        return (1, 1, 1)
    if total == 6:
        return (0, 3, 3)
    k = max(3, round(total * 4 / 15))
    if total - 2 * k < 3:
        raise GeometryError(f"cannot split {total} wires into three families of >= 3")
    return (k, k, total - 2 * k)


def _perimeter_points(lo, hi, k: int, phase: float = 0.5) -> list[tuple[float, float]]:
    """``k`` points evenly spaced along a rectangle's perimeter.

    Arc length is measured clockwise (in the (a, b) plane) from the
    midpoint of the top edge ``b = hi[1]``; ``phase`` shifts the start as
    a fraction of the spacing, so the default puts each point in the
    middle of one of ``k`` equal arcs.
    """
    w, h = hi[0] - lo[0], hi[1] - lo[1]
    per = 2 * (w + h)
    step = per / k
    pts = []
    for j in range(k):
        s = ((j + phase) * step + w / 2) % per
        if s < w:
            pts.append((lo[0] + s, hi[1]))
        elif s < w + h:
            pts.append((hi[0], hi[1] - (s - w)))
        elif s < 2 * w + h:
            pts.append((hi[0] - (s - w - h), lo[1]))
        else:
            pts.append((lo[0], lo[1] + (s - 2 * w - h)))
    return pts


def cage_box(envelope: BoundingBox, clearance: float) -> BoundingBox:
    """The cage around ``envelope``: ``clearance`` on the four sides and
    above the head, down to the floor plane ``z = 0`` below the feet."""
    lo = (envelope.lo[0] - clearance, envelope.lo[1] - clearance, 0.0)
    hi = (envelope.hi[0] + clearance, envelope.hi[1] + clearance, envelope.hi[2] + clearance)
    return BoundingBox(lo, hi)


def default_clearance(name: str) -> float:
    return DEFAULT_CORNER_CLEARANCE if str(name).upper() == "W3" else DEFAULT_CLEARANCE


def builtin_arrangement(
    name: str,
    clearance: float | None = None,
    current: float = 100.0,
    envelope: BoundingBox | None = None,
) -> WireSet:
    """One of the cage arrangements W3, W6, W9, W15, W30 around ``envelope``.

    W3 is the X/Y/Z triple through the cage corner nearest the origin.
    The others spread each family evenly over the perimeter of the cage's
    cross-section perpendicular to that family's axis. ``clearance=None``
    selects the per-arrangement default.
    """
    name = str(name).upper()
    if name not in ARRANGEMENTS:
        raise GeometryError(f"unknown arrangement {name!r}; expected one of {ARRANGEMENTS}")
    if clearance is None:
        clearance = default_clearance(name)
    if not (clearance > 0 and math.isfinite(clearance)):
        raise GeometryError(f"clearance must be positive, got {clearance}")
    if envelope is None:
        envelope = default_envelope()
    cage = cage_box(envelope, clearance)
    lo, hi = cage.lo, cage.hi

    if name == "W3":
        cx, cy, cz = lo
        return WireSet(
            (
                Wire("X", (cy, cz), current),
                Wire("Y", (cx, cz), current),
                Wire("Z", (cx, cy), current),
            )
        )

    total = int(name[1:])
    counts = family_split(total)
    wires = []
    for axis, k in zip(AXES, counts):
        if k == 0:
            continue
        a, b = PLANE[axis]
        for off in _perimeter_points((lo[a], lo[b]), (hi[a], hi[b]), k):
            wires.append(Wire(axis, off, current))
    return WireSet(tuple(wires))


@dataclass(frozen=True)
class Rotation:
    """Unit quaternion ``(w, x, y, z)``; rotates sensor-frame vectors into the world frame."""

    quaternion: tuple[float, float, float, float]

    def __post_init__(self):
        q = np.asarray(self.quaternion, dtype=float)
        nrm = np.linalg.norm(q)
        if q.shape != (4,) or not nrm > 0:
            raise GeometryError(f"invalid quaternion {self.quaternion!r}")
        object.__setattr__(self, "quaternion", tuple(float(v) for v in q / nrm))

    @classmethod
    def identity(cls) -> "Rotation":
        return cls((1.0, 0.0, 0.0, 0.0))

    @property
    def matrix(self) -> np.ndarray:
        return quaternion_matrix(np.asarray(self.quaternion))

    def apply(self, v) -> np.ndarray:
        return self.matrix @ np.asarray(v, dtype=float)

    def inverse_apply(self, v) -> np.ndarray:
        """World-frame vector expressed in the sensor frame."""
        return self.matrix.T @ np.asarray(v, dtype=float)

    def __mul__(self, other: "Rotation") -> "Rotation":
        w1, x1, y1, z1 = self.quaternion
        w2, x2, y2, z2 = other.quaternion
        return Rotation(
            (
                w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
                w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
                w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
                w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
            )
        )


def quaternion_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrices for unit quaternions ``q[..., (w, x, y, z)]``."""
    w, x, y, z = np.moveaxis(np.asarray(q, dtype=float), -1, 0)
    return np.stack(
        [
            np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)], -1),
            np.stack([2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)], -1),
            np.stack([2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)], -1),
        ],
        -2,
    )


def quaternion_from_uniforms(u) -> np.ndarray:
    """Shoemake's map from three U[0, 1) draws to a uniform unit quaternion."""
    u = np.asarray(u, dtype=float)
    u1, u2, u3 = u[..., 0], u[..., 1], u[..., 2]
    a, b = np.sqrt(1.0 - u1), np.sqrt(u1)
    t2, t3 = 2 * np.pi * u2, 2 * np.pi * u3
    return np.stack([b * np.cos(t3), a * np.sin(t2), a * np.cos(t2), b * np.sin(t3)], -1)


def random_rotation(rng: np.random.Generator) -> Rotation:
    """Uniformly distributed rotation; consumes exactly three uniforms from ``rng``."""
    return Rotation(tuple(quaternion_from_uniforms(rng.random(3))))
