"""Voxelized standing human phantom.

The phantom is a union of analytic solids (legs and arms as tapered
cylinders, an elliptic-cylinder torso, a neck and an ellipsoidal head)
sampled on a regular grid. Z is the vertical axis; the body faces +y and
is mirror-symmetric about the sagittal plane ``x = const``.

Voxel files are plain text, one ``x,y,z`` voxel centre per line in
metres; lines starting with ``#`` are comments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from magloc.errors import PhantomError

REFERENCE_HEIGHT = 1.75

# Solid dimensions in metres for a 1.75 m body; everything scales with height.
_HALF_WIDTH = 0.25
_HALF_DEPTH = 0.11
_LEG_X, _LEG_TOP, _LEG_R0, _LEG_R1 = 0.08, 0.84, 0.045, 0.085
_TORSO_Z0, _TORSO_Z1, _TORSO_A, _TORSO_B = 0.82, 1.45, 0.16, 0.11
_NECK_Z0, _NECK_Z1, _NECK_R = 1.44, 1.54, 0.055
_HEAD_C, _HEAD_AX = 1.64, (0.075, 0.095, 0.11)
_ARM_X, _ARM_Z0, _ARM_Z1, _ARM_R0, _ARM_R1 = 0.20, 0.78, 1.42, 0.035, 0.05

DEFAULT_MARGIN = 0.5
DEFAULT_FLOOR = 0.0


@dataclass(frozen=True)
class BoundingBox:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    @property
    def size(self) -> tuple[float, float, float]:
        return tuple(h - l for l, h in zip(self.lo, self.hi))

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        pts = np.atleast_2d(points)
        lo = np.asarray(self.lo) - tol
        hi = np.asarray(self.hi) + tol
        return np.all((pts >= lo) & (pts <= hi), axis=1)


@dataclass(frozen=True, eq=False)
class BodyModel:
    """Voxel centres (metres) of candidate nano-machine positions."""

    voxels: np.ndarray
    resolution: float
    bounding_box: BoundingBox = field(default=None)

    def __post_init__(self):
        vox = np.ascontiguousarray(self.voxels, dtype=np.float64)
        if vox.ndim != 2 or vox.shape[1] != 3:
            raise PhantomError(f"voxels must have shape (N, 3), got {vox.shape}")
        if not np.all(np.isfinite(vox)):
            raise PhantomError("voxel coordinates must be finite")
        if len(vox) and vox.min() < 0:
            raise PhantomError("voxel coordinates must be non-negative")
        if not self.resolution > 0:
            raise PhantomError(f"resolution must be positive, got {self.resolution}")
        vox.setflags(write=False)
        object.__setattr__(self, "voxels", vox)
        if self.bounding_box is None and len(vox):
            half = self.resolution / 2
            box = BoundingBox(
                tuple(float(v) for v in vox.min(axis=0) - half),
                tuple(float(v) for v in vox.max(axis=0) + half),
            )
            object.__setattr__(self, "bounding_box", box)

    def __len__(self) -> int:
        return len(self.voxels)

    @property
    def height(self) -> float:
        return self.bounding_box.size[2]


def default_envelope(
    height: float = REFERENCE_HEIGHT,
    margin: float = DEFAULT_MARGIN,
    floor: float = DEFAULT_FLOOR,
) -> BoundingBox:
    """Analytic bounding box of ``generate_phantom`` output with the same arguments."""
    s = height / REFERENCE_HEIGHT
    return BoundingBox(
        (margin, margin, floor),
        (margin + 2 * _HALF_WIDTH * s, margin + 2 * _HALF_DEPTH * s, floor + height),
    )


def _tapered(r, z, z0, z1, r0, r1):
    t = (z - z0) / (z1 - z0)
    inside_z = (z >= z0) & (z <= z1)
    return inside_z & (r <= r0 + (r1 - r0) * t)


def _solid_mask(x, y, z):
    # x, y, z are broadcastable local coordinates of a 1.75 m body
    ax = np.abs(x)
    leg = _tapered(np.hypot(ax - _LEG_X, y), z, 0.0, _LEG_TOP, _LEG_R0, _LEG_R1)
    arm = _tapered(np.hypot(ax - _ARM_X, y), z, _ARM_Z0, _ARM_Z1, _ARM_R0, _ARM_R1)
    torso = (
        (z >= _TORSO_Z0) & (z <= _TORSO_Z1)
        & ((x / _TORSO_A) ** 2 + (y / _TORSO_B) ** 2 <= 1.0)
    )
    neck = (z >= _NECK_Z0) & (z <= _NECK_Z1) & (x * x + y * y <= _NECK_R**2)
    a, b, c = _HEAD_AX
    head = (x / a) ** 2 + (y / b) ** 2 + ((z - _HEAD_C) / c) ** 2 <= 1.0
    return leg | arm | torso | neck | head


def generate_phantom(
    height: float = REFERENCE_HEIGHT,
    resolution: float = 0.005,
    margin: float = DEFAULT_MARGIN,
    floor: float = DEFAULT_FLOOR,
) -> BodyModel:
    """Voxelize the procedural humanoid.

    The body occupies ``x, y >= margin`` and ``z >= floor``. The grid is
    symmetric about the sagittal midline so left/right limbs voxelize
    identically.
    """
    if not (height > 0 and math.isfinite(height)):
        raise PhantomError(f"height must be positive, got {height}")
    if not (0 < resolution <= height / 50):
        raise PhantomError(
            f"resolution must be in (0, height/50 = {height / 50:.4g}], got {resolution}"
        )
    if margin < 0 or floor < 0:
        raise PhantomError("margin and floor must be non-negative")

    s = height / REFERENCE_HEIGHT
    half_w, half_d = _HALF_WIDTH * s, _HALF_DEPTH * s
    nx = 2 * math.ceil(half_w / resolution)
    ny = 2 * math.ceil(half_d / resolution)
    nz = math.ceil(height / resolution - 1e-9)

    # symmetric cell centres: +/-(k + 1/2) * resolution
    xs = (np.arange(nx) - nx // 2 + 0.5) * resolution
    ys = (np.arange(ny) - ny // 2 + 0.5) * resolution
    zs = (np.arange(nz) + 0.5) * resolution
    mask = _solid_mask(
        xs[:, None, None] / s, ys[None, :, None] / s, zs[None, None, :] / s
    )
    i, j, k = np.nonzero(mask)
    voxels = np.column_stack(
        [
            xs[i] + (margin + half_w),
            ys[j] + (margin + half_d),
            zs[k] + floor,
        ]
    )
    return BodyModel(voxels, resolution)


def save_voxels(body: BodyModel, path) -> None:
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"# magloc voxel phantom: {len(body)} voxels, resolution {body.resolution!r} m\n")
        for x, y, z in body.voxels.tolist():
            fh.write(f"{x!r},{y!r},{z!r}\n")


def _infer_resolution(voxels: np.ndarray) -> float:
    gaps = []
    for col in voxels.T:
        u = np.unique(col)
        if len(u) > 1:
            d = np.diff(u)
            d = d[d > 1e-12]
            if len(d):
                gaps.append(d.min())
    if not gaps:
        return 1.0
    return float(min(gaps))


def load_voxels(path) -> BodyModel:
    """Read a voxel file; resolution is the smallest positive coordinate gap."""
    path = Path(path)
    rows = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise PhantomError(f"{path}:{lineno}: expected 'x,y,z', got {line!r}")
            try:
                xyz = [float(p) for p in parts]
            except ValueError:
                raise PhantomError(f"{path}:{lineno}: cannot parse {line!r}") from None
            if not all(math.isfinite(v) for v in xyz):
                raise PhantomError(f"{path}:{lineno}: non-finite coordinate in {line!r}")
            if min(xyz) < 0:
                raise PhantomError(
                    f"{path}:{lineno}: negative coordinate violates the (+x, +y, +z) octant: {line!r}"
                )
            rows.append(xyz)
    if not rows:
        raise PhantomError(f"{path}: no voxels")
    voxels = np.array(rows, dtype=np.float64)
    return BodyModel(voxels, _infer_resolution(voxels))
