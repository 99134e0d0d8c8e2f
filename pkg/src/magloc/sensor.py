"""Tri-axial Hall magnetometer model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from magloc.fieldmodel import FieldVector
from magloc.geometry import Rotation

NOISE_BASES = ("component", "magnitude")


@dataclass(frozen=True)
class MagnetometerSpec:
    """Relative error bound and full-scale range of each Hall element.

    ``noise_basis="component"`` perturbs every sensor-frame component by
    its own uniform relative error; ``"magnitude"`` applies a single
    relative error to the combined magnitude.
    """

    rel_error: float = 0.01
    range_max: float = 0.12
    noise_basis: str = "magnitude"

    def __post_init__(self):
        if not (0 <= self.rel_error < 1):
            raise ValueError(f"rel_error must be in [0, 1), got {self.rel_error}")
        if not (self.range_max > 0):
            raise ValueError(f"range_max must be positive, got {self.range_max}")
        if self.noise_basis not in NOISE_BASES:
            raise ValueError(f"noise_basis must be one of {NOISE_BASES}, got {self.noise_basis!r}")


@dataclass(frozen=True)
class Measurement:
    magnitude: float
    saturated: bool = False


def measure(
    true_field: FieldVector,
    residual: FieldVector,
    orientation: Rotation,
    spec: MagnetometerSpec,
    rng: np.random.Generator,
) -> Measurement:
    """Noisy magnitude of ``true_field + residual`` seen through a rotated triad.

    Always consumes three uniforms from ``rng`` (only the first is used
    with magnitude-basis noise), so stream layout does not depend on the
    noise model. Components beyond ``spec.range_max`` set ``saturated``
    and are clipped to the range.
    """
    u = rng.random(3)
    world = true_field.vector + residual.vector
    comps = orientation.inverse_apply(world)
    saturated = bool(np.any(np.abs(comps) > spec.range_max))
    if spec.noise_basis == "component":
        noisy = comps + spec.rel_error * np.abs(comps) * (2.0 * u - 1.0)
        noisy = np.clip(noisy, -spec.range_max, spec.range_max)
        mag = math.sqrt(float(noisy @ noisy))
    else:
        clipped = np.clip(comps, -spec.range_max, spec.range_max)
        mag = math.sqrt(float(clipped @ clipped)) * (1.0 + spec.rel_error * (2.0 * u[0] - 1.0))
    return Measurement(mag, saturated)
