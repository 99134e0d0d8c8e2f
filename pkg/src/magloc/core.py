"""Kernel plan, backend selection and the per-voxel random streams.

The compiled ``magloc._core`` extension is used when it imports and
``MAGLOC_PURE`` is unset; otherwise the NumPy kernel in
``magloc._pycore`` runs. Both consume the same plan and the same
uniform draws, and agree to rounding.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from magloc import _pycore
from magloc.fieldmodel import MU_0, EarthResidualBounds, parse_mapping
from magloc.geometry import AXES, AXIS_INDEX, PLANE, WireSet
from magloc.locate import FamilySolver
from magloc.sensor import MagnetometerSpec

try:
    if os.environ.get("MAGLOC_PURE"):
        raise ImportError("MAGLOC_PURE is set")
    from magloc import _core as _compiled
except ImportError:
    _compiled = None

BACKENDS = ("cython", "numpy") if _compiled is not None else ("numpy",)
BACKEND = BACKENDS[0]

# uniforms consumed per run before the per-wire block: rotation (3) + residual (3)
RUN_HEADER = 6


def draws_per_run(n_wires: int) -> int:
    return RUN_HEADER + 3 * n_wires


def voxel_stream(seed: int, voxel_index: int) -> np.random.Generator:
    """Counter-based stream for one voxel.

    Philox keyed by ``seed`` with the voxel index in the third counter
    word; run ``r`` reads draws ``[r*K, (r+1)*K)`` of this stream, so
    every draw is a fixed function of (seed, voxel, run) regardless of
    how voxels are scheduled.
    """
    return np.random.Generator(
        np.random.Philox(key=int(seed) & 0xFFFFFFFFFFFFFFFF, counter=[0, 0, int(voxel_index), 0])
    )


def block_uniforms(seed: int, indices, runs: int, per_run: int) -> np.ndarray:
    out = np.empty((len(indices), runs, per_run))
    for row, idx in enumerate(indices):
        out[row] = voxel_stream(seed, idx).random((runs, per_run))
    return out


@dataclass(frozen=True, eq=False)
class KernelPlan:
    """Flat arrays describing wires, noise and lateration for the kernels."""

    currents: np.ndarray
    mu: float
    rel_error: float
    range_max: float
    noise_basis: int
    bounds: np.ndarray
    perm: np.ndarray
    mode: int
    tri_index: np.ndarray
    corner: np.ndarray
    fam_idx: np.ndarray
    fam_k: np.ndarray
    fam_pinv: np.ndarray
    fam_const: np.ndarray
    fam_weight: np.ndarray
    plane: np.ndarray

    @classmethod
    def build(
        cls,
        wireset: WireSet,
        spec: MagnetometerSpec,
        bounds: EarthResidualBounds,
        mapping: str = "xyz",
        mu: float = MU_0,
    ) -> "KernelPlan":
        nw = len(wireset)
        kmax = max(max(wireset.counts), 3)
        fam_idx = np.full((3, kmax), -1, dtype=np.int64)
        fam_k = np.zeros(3, dtype=np.int64)
        fam_pinv = np.zeros((3, 2, kmax - 1))
        fam_const = np.zeros((3, kmax - 1))
        fam_weight = np.zeros(3)
        tri_index = np.zeros(3, dtype=np.int64)
        corner = np.zeros(3)
        if wireset.mode == "trilateration":
            mode = 0
            for i, w in enumerate(wireset):
                tri_index[w.axis_index] = i
            corner[:] = wireset.corner
        else:
            mode = 1
            for axis in AXES:
                f = AXIS_INDEX[axis]
                idx = wireset.family(axis)
                if len(idx) < 3:
                    continue
                solver = FamilySolver(wireset.family_offsets(axis))
                k = len(idx)
                fam_idx[f, :k] = idx
                fam_k[f] = k
                fam_pinv[f, :, : k - 1] = solver.pinv
                fam_const[f, : k - 1] = solver.constant
                fam_weight[f] = k
        return cls(
            currents=np.array([w.current for w in wireset], dtype=np.float64).reshape(nw),
            mu=float(mu),
            rel_error=float(spec.rel_error),
            range_max=float(spec.range_max),
            noise_basis=0 if spec.noise_basis == "component" else 1,
            bounds=bounds.as_array(),
            perm=np.array(parse_mapping(mapping), dtype=np.int64),
            mode=mode,
            tri_index=tri_index,
            corner=corner,
            fam_idx=fam_idx,
            fam_k=fam_k,
            fam_pinv=fam_pinv,
            fam_const=fam_const,
            fam_weight=fam_weight,
            plane=np.array([PLANE[a] for a in AXES], dtype=np.int64),
        )


def get_kernel(backend: str | None = None):
    backend = backend or BACKEND
    if backend == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernel is not available; build with `pip install -e .`")
        return _compiled.simulate_block
    if backend == "numpy":
        return _pycore.simulate_block
    raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")


def simulate_block(positions, fields, uniforms, plan: KernelPlan, backend: str | None = None):
    return get_kernel(backend)(positions, fields, uniforms, plan)


def default_chunk(n_wires: int, runs: int) -> int:
    # keep the (chunk, runs, wires, 3) temporaries of the NumPy kernel near 16 MB
    return max(16, min(1024, 2_000_000 // max(1, runs * max(n_wires, 1) * 3)))


__all__ = [
    "BACKEND",
    "BACKENDS",
    "KernelPlan",
    "block_uniforms",
    "default_chunk",
    "draws_per_run",
    "get_kernel",
    "simulate_block",
    "voxel_stream",
]
